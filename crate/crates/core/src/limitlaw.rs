//! Thresholds, the limiting intensity `tau_k` and relative-entropy rates.

use serde::{Deserialize, Serialize};

use crate::blocks;
use crate::error::{Error, Result};
use crate::hypgeom::{ball_volume, inverse_ball_volume, Region};
use crate::quadrature;
use crate::real::{ln_factorial, Real};

/// How the auxiliary threshold `w` is derived from `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "")]
#[derive(Default)]
pub enum WRule<F: Real = f64> {
    /// `w = sqrt(v)`.
    #[default]
    Sqrt,
    /// `w = v^p` for `0 < p < 1`.
    Power(F),
    Fixed(F),
}


impl<F: Real> WRule<F> {
    fn apply(self, v: F) -> F {
        match self {
            WRule::Sqrt => v.sqrt(),
            WRule::Power(p) => v.powf(p),
            WRule::Fixed(w) => w,
        }
    }
}

/// Score headroom above `s0` at which kNN radii are censored.
pub const DEFAULT_CAP_OFFSET: f64 = 40.0;

/// Full parameter bundle of one simulation regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Regime<F: Real = f64> {
    pub d: usize,
    pub k: usize,
    pub s0: F,
    pub lambda: F,
    /// Recentring threshold for ball volumes.
    pub v: F,
    pub w: F,
    /// Expected exceedance scale `|W| e^{-v} v^{k-1}`.
    pub u: F,
    pub u_cap: F,
    pub window_volume: F,
    /// `r(s0)`, the exceedance radius.
    pub r_s0: F,
    /// `r(w)`, the internal-region radius.
    pub r_w: F,
    /// `r(u_cap)`, the censoring radius.
    pub r_cap: F,
    /// Relative residual of the threshold solve (zero for explicit `v`).
    pub solver_residual: F,
}

fn ln_window_volume<F: Real>(d: usize, lambda: F) -> F {
    let p = F::lit((d - 1) as f64);
    p * lambda - p.ln()
}

fn ln_u_of<F: Real>(d: usize, k: usize, lambda: F, v: F) -> F {
    let mut out = ln_window_volume(d, lambda) - v;
    if k > 1 {
        out = out + F::lit((k - 1) as f64) * v.ln();
    }
    out
}

fn check_basic<F: Real>(d: usize, k: usize, lambda: F) -> Result<()> {
    if d < 2 {
        return Err(Error::regime("dimension must be at least 2"));
    }
    if k < 1 {
        return Err(Error::regime("k must be at least 1"));
    }
    if !(lambda > F::zero()) || !lambda.is_finite() {
        return Err(Error::regime(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

impl<F: Real> Regime<F> {
    /// Regime with an explicitly given threshold `v`.
    pub fn from_threshold(d: usize, k: usize, s0: F, lambda: F, v: F, w_rule: WRule<F>) -> Result<Self> {
        check_basic(d, k, lambda)?;
        Self::assemble(d, k, s0, lambda, v, w_rule, F::zero())
    }

    fn assemble(
        d: usize,
        k: usize,
        s0: F,
        lambda: F,
        v: F,
        w_rule: WRule<F>,
        solver_residual: F,
    ) -> Result<Self> {
        if !(v > F::zero()) || !v.is_finite() {
            return Err(Error::regime(format!("threshold v must be positive, got {v}")));
        }
        let w = w_rule.apply(v);
        if !(w > F::zero() && w < v) {
            return Err(Error::regime(format!("need 0 < w < v, got w = {w}, v = {v}")));
        }
        if !(s0 + v >= F::zero()) {
            return Err(Error::regime("s0 + v must be nonnegative"));
        }
        let u = ln_u_of(d, k, lambda, v).exp();
        let u_cap = s0 + F::lit(DEFAULT_CAP_OFFSET);
        let r_s0 = inverse_ball_volume(s0 + v, d)?;
        let r_w = inverse_ball_volume(w + v, d)?;
        let r_cap = inverse_ball_volume(u_cap + v, d)?;
        Ok(Self {
            d,
            k,
            s0,
            lambda,
            v,
            w,
            u,
            u_cap,
            window_volume: ln_window_volume(d, lambda).exp(),
            r_s0,
            r_w,
            r_cap,
            solver_residual,
        })
    }

    /// Replaces the censoring level, recomputing `r_cap`.
    pub fn with_u_cap(mut self, u_cap: F) -> Result<Self> {
        if !(u_cap > self.s0) {
            return Err(Error::regime("u_cap must exceed s0"));
        }
        self.u_cap = u_cap;
        self.r_cap = inverse_ball_volume(u_cap + self.v, self.d)?;
        Ok(self)
    }

    /// Overrides `w` directly (debug regimes such as `w = s0`).
    pub fn with_w(mut self, w: F) -> Result<Self> {
        if !(w + self.v >= F::zero()) {
            return Err(Error::regime("w + v must be nonnegative"));
        }
        self.w = w;
        self.r_w = inverse_ball_volume(w + self.v, self.d)?;
        Ok(self)
    }

    pub fn window(&self) -> Region<F> {
        Region::window(self.d, self.lambda).expect("validated regime")
    }

    /// `v - (d-1) lambda - (k-1) log lambda`; negative for admissible regimes.
    pub fn divergence_margin(&self) -> F {
        self.v
            - F::lit((self.d - 1) as f64) * self.lambda
            - F::lit((self.k - 1) as f64) * self.lambda.ln()
    }

    pub fn satisfies_divergence(&self) -> bool {
        self.divergence_margin() < F::zero()
    }

    /// `u` recomputed from `v` (consistency check).
    pub fn recomputed_u(&self) -> F {
        ln_u_of(self.d, self.k, self.lambda, self.v).exp()
    }

    pub fn reference(&self) -> RefMeasure<F> {
        RefMeasure {
            k: self.k,
            s0: self.s0,
        }
    }
}

/// Solves `|W| e^{-v} v^{k-1} = target_u` for `v` on the decreasing branch `v > k - 1`.
pub fn solve_regime<F: Real>(
    d: usize,
    k: usize,
    s0: F,
    lambda: F,
    target_u: F,
    w_rule: WRule<F>,
) -> Result<Regime<F>> {
    check_basic(d, k, lambda)?;
    if !(target_u >= F::one()) || !target_u.is_finite() {
        return Err(Error::regime(format!("target u must be >= 1, got {target_u}")));
    }
    let ln_target = target_u.ln();
    let ln_w = ln_window_volume(d, lambda);
    let km1 = F::lit((k - 1) as f64);
    let ln_sup = if k == 1 { ln_w } else { ln_w - km1 + km1 * km1.ln() };
    if ln_target >= ln_sup {
        return Err(Error::regime(format!(
            "target u = {target_u} not attainable; attainable range is [1, {})",
            ln_sup.exp()
        )));
    }
    let v = if k == 1 {
        ln_w - ln_target
    } else {
        let g = |v: F| ln_u_of(d, k, lambda, v) - ln_target;
        let mut lo = km1;
        let mut hi = km1 + F::one();
        while g(hi) > F::zero() {
            lo = hi;
            hi = km1 + (hi - km1) * F::lit(2.0);
            if !hi.is_finite() {
                return Err(Error::regime("threshold bracket did not close"));
            }
        }
        let mut v = F::lit(0.5) * (lo + hi);
        for _ in 0..300 {
            let gv = g(v);
            if gv > F::zero() {
                lo = v;
            } else {
                hi = v;
            }
            let slope = km1 / v - F::one();
            let newton = v - gv / slope;
            let next = if newton > lo && newton < hi { newton } else { F::lit(0.5) * (lo + hi) };
            let done = (next - v).abs() <= F::lit(F::TOL_FLOOR) * v;
            v = next;
            if done || hi - lo <= F::lit(F::TOL_FLOOR) * v {
                break;
            }
        }
        v
    };
    let residual = ((ln_u_of(d, k, lambda, v) - ln_target).exp() - F::one()).abs();
    Regime::assemble(d, k, s0, lambda, v, w_rule, residual)
}

/// `r(u)`: radius whose ball volume is `u + v`.
pub fn r_threshold<F: Real>(u: F, regime: &Regime<F>) -> Result<F> {
    let vol = u + regime.v;
    if !(vol >= F::zero()) {
        return Err(Error::domain(format!("u + v must be nonnegative, got {vol}")));
    }
    inverse_ball_volume(vol, regime.d)
}

/// The limiting intensity `tau_k` on `E_0 = [s0, inf)` with density `e^{-u} / (k-1)!`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RefMeasure<F: Real = f64> {
    pub k: usize,
    pub s0: F,
}

impl<F: Real> RefMeasure<F> {
    pub fn new(k: usize, s0: F) -> Result<Self> {
        if k < 1 {
            return Err(Error::usage("k must be at least 1"));
        }
        Ok(Self { k, s0 })
    }

    fn ln_norm(&self) -> F {
        F::lit(ln_factorial(self.k - 1))
    }

    /// `tau_k(E_0) = e^{-s0} / (k-1)!`.
    pub fn total_mass(&self) -> F {
        (-self.s0 - self.ln_norm()).exp()
    }
}

pub fn tau_density<F: Real>(u: F, reference: &RefMeasure<F>) -> F {
    if u < reference.s0 {
        F::zero()
    } else {
        (-u - reference.ln_norm()).exp()
    }
}

/// `tau_k([a, b])`; `b` may be `+inf`.
pub fn tau_mass<F: Real>(a: F, b: F, reference: &RefMeasure<F>) -> Result<F> {
    if !(b >= a) {
        return Err(Error::usage("tau_mass needs b >= a"));
    }
    let a = a.max(reference.s0);
    let b = b.max(reference.s0);
    let norm = reference.ln_norm();
    let upper = if b.is_infinite() { F::zero() } else { (-b - norm).exp() };
    Ok((-a - norm).exp() - upper)
}

/// Density of the mean measure of one block's separated exceedance process.
pub fn q_density<F: Real>(u: F, regime: &Regime<F>) -> Result<F> {
    if !(u > regime.s0) {
        return Ok(F::zero());
    }
    let blockset = blocks::build_blocks(regime)?;
    let internal = blockset.block_volume() * (F::one() - blocks::internal_volume_ratio(regime, &blockset));
    Ok(q_density_with_volume(u, regime, internal))
}

/// `|Q^-| e^{-(u+v)} (u+v)^{k-1} / (k-1)!` for a given internal-region volume.
pub fn q_density_with_volume<F: Real>(u: F, regime: &Regime<F>, internal_volume: F) -> F {
    let s = u + regime.v;
    let km1 = regime.k - 1;
    let ln = -s + F::lit(km1 as f64) * s.ln() - F::lit(ln_factorial(km1));
    internal_volume * ln.exp()
}

/// `P(Poisson(volume) <= k - 1)`, summed in log space.
pub fn poisson_lower_tail<F: Real>(volume: F, k: usize) -> F {
    ln_poisson_lower_tail(volume, k).exp().min(F::one())
}

/// `log P(Poisson(volume) <= k - 1)` by log-sum-exp.
pub fn ln_poisson_lower_tail<F: Real>(volume: F, k: usize) -> F {
    if volume == F::zero() {
        return F::zero();
    }
    let lv = volume.ln();
    let terms: Vec<F> = (0..k)
        .map(|i| -volume + F::lit(i as f64) * lv - F::lit(ln_factorial(i)))
        .collect();
    let m = terms.iter().copied().fold(F::neg_infinity(), F::max);
    let sum: F = terms.iter().map(|&t| (t - m).exp()).sum();
    (m + sum.ln()).min(F::zero())
}

/// Probability that a ball of radius `r` holds at most `k - 1` Poisson points.
pub fn exceed_prob<F: Real>(r: F, k: usize, d: usize) -> Result<F> {
    if k < 1 {
        return Err(Error::usage("k must be at least 1"));
    }
    Ok(poisson_lower_tail(ball_volume(r, d)?, k))
}

/// `s_lambda = exceed_prob(r(s0))`.
pub fn s_lambda<F: Real>(regime: &Regime<F>) -> F {
    poisson_lower_tail(regime.s0 + regime.v, regime.k)
}

/// `s'_lambda = exceed_prob(r(w))`.
pub fn s_lambda_prime<F: Real>(regime: &Regime<F>) -> F {
    poisson_lower_tail(regime.w + regime.v, regime.k)
}

/// Piecewise-constant measure on consecutive bins `[edges[i], edges[i+1])`.
/// The last edge may be `+inf` (overflow bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BinnedMeasure<F: Real = f64> {
    pub edges: Vec<F>,
    pub masses: Vec<F>,
}

impl<F: Real> BinnedMeasure<F> {
    pub fn new(edges: Vec<F>, masses: Vec<F>) -> Result<Self> {
        if edges.len() < 2 || masses.len() + 1 != edges.len() {
            return Err(Error::usage("need n + 1 edges for n bin masses"));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::usage("bin edges must be strictly increasing"));
        }
        if masses.iter().any(|m| !(*m >= F::zero())) {
            return Err(Error::domain("bin masses must be nonnegative"));
        }
        Ok(Self { edges, masses })
    }

    pub fn total(&self) -> F {
        self.masses.iter().copied().sum()
    }

    /// Bin masses of the reference measure on the same edges.
    pub fn reference(edges: &[F], reference: &RefMeasure<F>) -> Result<Self> {
        let masses = edges
            .windows(2)
            .map(|w| tau_mass(w[0], w[1], reference))
            .collect::<Result<Vec<_>>>()?;
        Self::new(edges.to_vec(), masses)
    }

    /// Integrates a density over each bin (the overflow bin via `t -> a + t / (1 - t)`).
    pub fn from_density<G: Fn(F) -> F>(density: G, edges: Vec<F>) -> Result<Self> {
        let masses = edges
            .windows(2)
            .map(|w| {
                if w[1].is_infinite() {
                    let a = w[0];
                    let one = F::one();
                    quadrature::integrate(
                        |t: F| density(a + t / (one - t)) / ((one - t) * (one - t)),
                        F::zero(),
                        one,
                        1e-12,
                    )
                    .value
                } else {
                    quadrature::integrate(&density, w[0], w[1], 1e-12).value
                }
            })
            .collect();
        Self::new(edges, masses)
    }

    pub fn scaled(&self, c: F) -> Self {
        Self {
            edges: self.edges.clone(),
            masses: self.masses.iter().map(|&m| m * c).collect(),
        }
    }
}

/// Default entropy binning: 64 uniform bins on `[s0, min(u_cap, s0 + 20)]` plus an overflow bin.
pub fn default_entropy_edges<F: Real>(s0: F, u_cap: F) -> Vec<F> {
    uniform_edges(s0, u_cap.min(s0 + F::lit(20.0)), 64, true)
}

pub fn uniform_edges<F: Real>(lo: F, hi: F, bins: usize, overflow: bool) -> Vec<F> {
    let step = (hi - lo) / F::lit(bins as f64);
    let mut edges: Vec<F> = (0..=bins).map(|i| lo + step * F::lit(i as f64)).collect();
    edges[bins] = hi;
    if overflow {
        edges.push(F::infinity());
    }
    edges
}

/// `H(rho | tau_k) = sum_b rho_b log(rho_b / tau_b) - rho(E_0) + tau_k(E_0)`.
///
/// Returns `+inf` when `rho` charges a bin of zero reference mass.
pub fn relative_entropy<F: Real>(rho: &BinnedMeasure<F>, reference: &RefMeasure<F>) -> Result<F> {
    if rho.masses.iter().any(|m| !(*m >= F::zero())) {
        return Err(Error::domain("negative bin mass"));
    }
    let tau = BinnedMeasure::reference(&rho.edges, reference)?;
    let mut acc = F::zero();
    for (&r, &t) in rho.masses.iter().zip(&tau.masses) {
        if r == F::zero() {
            continue;
        }
        if t == F::zero() {
            return Ok(F::infinity());
        }
        acc = acc + r * (r / t).ln();
    }
    Ok(acc - rho.total() + reference.total_mass())
}

/// Relative entropy of a smooth density at two bin resolutions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyRefinement<F: Real = f64> {
    pub coarse: F,
    pub fine: F,
    /// Two-grid estimate of the remaining error of `fine`.
    pub error_estimate: F,
    pub extrapolated: F,
}

/// Bins the density uniformly on `[s0, hi]` (plus overflow) with `bins` and
/// `2 * bins` cells and combines both values Richardson-style.
pub fn entropy_refinement<F: Real, G: Fn(F) -> F + Copy>(
    density: G,
    reference: &RefMeasure<F>,
    hi: F,
    bins: usize,
) -> Result<EntropyRefinement<F>> {
    let coarse = relative_entropy(
        &BinnedMeasure::from_density(density, uniform_edges(reference.s0, hi, bins, true))?,
        reference,
    )?;
    let fine = relative_entropy(
        &BinnedMeasure::from_density(density, uniform_edges(reference.s0, hi, 2 * bins, true))?,
        reference,
    )?;
    // Binning error of a smooth log-ratio is second order in the bin width.
    let err = (fine - coarse) / F::lit(3.0);
    Ok(EntropyRefinement {
        coarse,
        fine,
        error_estimate: err.abs(),
        extrapolated: fine + err,
    })
}

/// Rate of the total mass: `a log(a / tau(E_0)) - a + tau(E_0)`.
pub fn scalar_rate<F: Real>(a: F, reference: &RefMeasure<F>) -> Result<F> {
    if !(a >= F::zero()) {
        return Err(Error::domain(format!("mass must be nonnegative, got {a}")));
    }
    let t = reference.total_mass();
    if a == F::zero() {
        return Ok(t);
    }
    Ok(a * (a / t).ln() - a + t)
}
