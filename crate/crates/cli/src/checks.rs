//! Deterministic suites that need no simulation run: geometry identities,
//! rate tables and regime sweeps.

use std::f64::consts::PI;

use hypknn::blocks::{build_blocks, internal_volume_ratio};
use hypknn::hypgeom::*;
use hypknn::limitlaw::{relative_entropy, scalar_rate, BinnedMeasure, Regime, default_entropy_edges};
use hypknn::RngStream;
use rand::Rng;
use serde::Serialize;

use crate::compare::decreasing;
use crate::config::ExperimentConfig;
use crate::CliError;

const TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct Identity {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn identity(name: impl Into<String>, dev: f64, tol: f64) -> Identity {
    Identity {
        name: name.into(),
        max_deviation: dev,
        tolerance: tol,
        pass: dev <= tol,
    }
}

fn closed_form_volume(r: f64, d: usize) -> Option<f64> {
    match d {
        2 => Some(2.0 * PI * (r.cosh() - 1.0)),
        3 => Some(PI * ((2.0 * r).sinh() - 2.0 * r)),
        4 => Some(2.0 * PI * PI * (r.cosh().powi(3) / 3.0 - r.cosh() + 2.0 / 3.0)),
        5 => Some(8.0 * PI * PI / 3.0 * ((4.0 * r).sinh() / 32.0 - (2.0 * r).sinh() / 4.0 + 1.5 * r / 4.0)),
        _ => None,
    }
}

/// Runs the identity suite. `perturb` is added to every computed distance.
pub fn geometry_suite(perturb: f64) -> Vec<Identity> {
    let mut rng = RngStream::new(0x9e0).rng();
    let mut out = Vec::new();
    let (mut phi, mut sym, mut tri) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20_000 {
        let d = rng.random_range(2..6usize);
        let mut pt = || {
            let x: Vec<f64> = (0..d - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
            HPoint::new(x, rng.random_range(0.01..3.0)).expect("positive height")
        };
        let (a, b, c) = (pt(), pt(), pt());
        let dist = |p: &HPoint, q: &HPoint| dist_hyp(p, q).expect("same dimension") + perturb;
        let kappa = a.x.iter().zip(&b.x).map(|(s, t)| (s - t).powi(2)).sum::<f64>().sqrt() / a.y;
        let ab = dist(&a, &b);
        let p = phi_dist(kappa, b.y / a.y).expect("valid arguments");
        phi = phi.max((ab - p).abs() / ab.max(1.0));
        sym = sym.max((ab - dist(&b, &a)).abs());
        tri = tri.max(ab - dist(&a, &c) - dist(&c, &b));
    }
    out.push(identity("dist_hyp vs phi_dist", phi, TOL));
    out.push(identity("symmetry", sym, TOL));
    out.push(identity("triangle inequality excess", tri.max(0.0), TOL));
    for d in 2..=5usize {
        let (mut quad, mut inv) = (0.0f64, 0.0f64);
        for i in 1..=100 {
            let r = i as f64 * 0.08;
            let closed = closed_form_volume(r, d).expect("d in 2..=5");
            let q = ball_volume_quadrature(r, d).expect("valid arguments");
            quad = quad.max(((q - closed) / closed).abs());
            let back = inverse_ball_volume(ball_volume(r, d).expect("valid"), d).expect("valid") + perturb;
            inv = inv.max((back - r).abs() / r.max(1.0));
        }
        out.push(identity(format!("ball volume quadrature vs closed form d={d}"), quad, TOL));
        out.push(identity(format!("inverse ball volume round trip d={d}"), inv, TOL));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub lambda: f64,
    pub regime: Regime,
    pub tau_mass: f64,
    /// `(a, scalar_rate(a))` for masses around `tau(E_0)`.
    pub scalar_rates: Vec<(f64, f64)>,
    /// `(c, H(c tau | tau))`.
    pub scaled_entropy: Vec<(f64, f64)>,
}

pub fn rates(config: &ExperimentConfig) -> Result<Vec<RateRow>, CliError> {
    let mut rows = Vec::new();
    for regime in config.validate()? {
        let t = regime.reference();
        let tau = t.total_mass();
        let err = |e: hypknn::Error| CliError::Usage(e.to_string());
        let scalar_rates = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0]
            .iter()
            .map(|&c| Ok((c * tau, scalar_rate(c * tau, &t).map_err(err)?)))
            .collect::<Result<_, CliError>>()?;
        let base = BinnedMeasure::reference(&default_entropy_edges(regime.s0, regime.u_cap), &t).map_err(err)?;
        let scaled_entropy = [0.5, 2.0, 5.0]
            .iter()
            .map(|&c| Ok((c, relative_entropy(&base.scaled(c), &t).map_err(err)?)))
            .collect::<Result<_, CliError>>()?;
        rows.push(RateRow {
            lambda: regime.lambda,
            regime,
            tau_mass: tau,
            scalar_rates,
            scaled_entropy,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub v: f64,
    pub w: f64,
    pub u: f64,
    pub r_s0: f64,
    pub r_w: f64,
    pub blocks: usize,
    pub internal_ratio: f64,
    pub divergence_margin: f64,
    pub satisfies_divergence: bool,
}

pub const SWEEP_HEADER: &str = "lambda,v,w,u,r_s0,r_w,blocks,internal_ratio,divergence_margin,satisfies_divergence";

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.lambda,
            self.v,
            self.w,
            self.u,
            self.r_s0,
            self.r_w,
            self.blocks,
            self.internal_ratio,
            self.divergence_margin,
            self.satisfies_divergence
        )
    }
}

/// Trend flags over a sweep. At fixed `u` the margin is constant, so a
/// divergent family needs growing `u`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepTrend {
    pub all_admissible: bool,
    pub margin_decreasing: bool,
    pub ratio_decreasing: bool,
}

pub fn sweep(config: &ExperimentConfig) -> Result<(Vec<SweepRow>, SweepTrend), CliError> {
    let mut rows = Vec::new();
    for r in config.validate()? {
        let bs = build_blocks(&r).map_err(|e| CliError::Usage(e.to_string()))?;
        rows.push(SweepRow {
            lambda: r.lambda,
            v: r.v,
            w: r.w,
            u: r.u,
            r_s0: r.r_s0,
            r_w: r.r_w,
            blocks: bs.count,
            internal_ratio: internal_volume_ratio(&r, &bs),
            divergence_margin: r.divergence_margin(),
            satisfies_divergence: r.satisfies_divergence(),
        });
    }
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let margins: Vec<f64> = rows.iter().map(|r| r.divergence_margin).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.internal_ratio).collect();
    let trend = SweepTrend {
        all_admissible: rows.iter().all(|r| r.satisfies_divergence),
        margin_decreasing: decreasing(&margins),
        ratio_decreasing: decreasing(&ratios),
    };
    Ok((rows, trend))
}
