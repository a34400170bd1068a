#![allow(dead_code)]

use hypknn::hypgeom::{gap, Ceiling, Region};
use hypknn::nnscore::ball_volume_from_gap;
use hypknn::sampler::{sample_extended, sample_region, PointConfig};
use hypknn::RngStream;

/// Smallest gap key from `(x, y)` to any point of `pools`, skipping the point itself.
pub fn nearest_gap(x: &[f64], y: f64, pools: &[&PointConfig]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for pool in pools {
        for j in 0..pool.len() {
            if pool.y(j) == y && pool.x(j) == x {
                continue;
            }
            let g = gap(x, y, pool.x(j), pool.y(j));
            best = Some(best.map_or(g, |b: f64| b.min(g)));
        }
    }
    best
}

/// Setup for the extension-vs-fixed-box comparison of nearest-neighbour radii (d = 2).
pub struct LawOracle {
    pub lambda: f64,
    pub r_max: f64,
    /// Only interior points at or below this height are used; their radius-`r_max`
    /// balls fit in `enlarged`.
    pub y_max: f64,
    pub enlarged: Region,
}

impl LawOracle {
    pub fn small() -> Self {
        let (lambda, r_max, y_max) = (2.0f64, 1.0f64, 0.5f64);
        let pad = y_max * r_max.sinh() * 1.01;
        let enlarged = Region::new(
            vec![-pad],
            vec![1.0 + pad],
            (-lambda - r_max).exp() * 0.99,
            Ceiling::Finite(y_max * r_max.exp() * 1.01),
        )
        .unwrap();
        Self { lambda, r_max, y_max, enlarged }
    }

    fn window(&self) -> Region {
        Region::window(2, self.lambda).unwrap()
    }

    fn radii(&self, probes: &PointConfig, pools: &[&PointConfig], out: &mut Vec<f64>) {
        let w = self.window();
        let gmax = hypknn::hypgeom::gap_from_dist(self.r_max);
        for i in 0..probes.len() {
            let (x, y) = (probes.x(i), probes.y(i));
            if !w.contains(x, y) || y > self.y_max {
                continue;
            }
            if let Some(g) = nearest_gap(x, y, pools).filter(|&g| g <= gmax) {
                out.push(hypknn::hypgeom::dist_from_gap(g));
            }
        }
    }

    /// Uncensored nearest-neighbour radii from the adaptive extension.
    pub fn extended(&self, seed: u64, target: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut rep = 0;
        while out.len() < target {
            let (int, ext) = sample_extended(&self.window(), self.r_max, 2, &RngStream::new(seed).child(rep)).unwrap();
            self.radii(&int, &[&int, &ext], &mut out);
            rep += 1;
        }
        out.truncate(target);
        out
    }

    /// The same radii from one fixed enlarged box sampled in full.
    pub fn brute(&self, seed: u64, target: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut rep = 0;
        while out.len() < target {
            let all = sample_region(&self.enlarged, 2, &RngStream::new(seed).child(rep)).unwrap();
            self.radii(&all, &[&all], &mut out);
            rep += 1;
        }
        out.truncate(target);
        out
    }
}

/// Score of a gap key for dimension `d` and centring `v`.
pub fn score_of_gap(g: f64, d: usize, v: f64) -> f64 {
    ball_volume_from_gap(g, d) - v
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Hyperbolic area (d = 2) of the part of `B_r((x, y))` below height `h`.
///
/// The ball is the Euclidean disc with centre height `y cosh r` and radius `y sinh r`;
/// with `t = c - rho cos(theta)` the chord integrand is smooth.
pub fn disc_area_below(y: f64, r: f64, h: f64) -> f64 {
    let (c, rho) = (y * r.cosh(), y * r.sinh());
    if c - rho >= h {
        return 0.0;
    }
    let theta1 = if c + rho <= h { std::f64::consts::PI } else { ((c - h) / rho).clamp(-1.0, 1.0).acos() };
    let f = |t: f64| {
        let s = t.sin();
        let den = c - rho * t.cos();
        2.0 * rho * rho * s * s / (den * den)
    };
    simpson(&f, 0.0, theta1, 1e-12)
}

/// Poisson lower tail `P(Pois(m) < k)`.
pub fn pois_below(m: f64, k: usize) -> f64 {
    let mut term = (-m).exp();
    let mut acc = 0.0;
    for i in 0..k {
        if i > 0 {
            term *= m / i as f64;
        }
        acc += term;
    }
    acc
}
