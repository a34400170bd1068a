//! Exact geometry of the half-space model `R^{d-1} x (0, inf)`.
//!
//! Points are stored in natural coordinates `(x, y)`. Pairwise distances
//! are routed through the *gap* `g = |z1 - z2|^2 / (2 y1 y2) = cosh(dist) - 1`,
//! which is monotone in the distance, cheap, and lets
//! `arcosh(1 + g) = log1p(g + sqrt(g (g + 2)))` be evaluated without
//! cancellation for nearby points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HPoint<F: Real = f64> {
    pub x: Vec<F>,
    pub y: F,
}

impl<F: Real> HPoint<F> {
    pub fn new(x: Vec<F>, y: F) -> Result<Self> {
        if !(y > F::zero()) || !y.is_finite() {
            return Err(Error::domain(format!("height must be positive and finite, got {y}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("horizontal coordinates must be finite"));
        }
        Ok(Self { x, y })
    }

    /// Ambient dimension `d` (horizontal dimension plus one).
    pub fn dim(&self) -> usize {
        self.x.len() + 1
    }
}

/// Upper height bound of a [`Region`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum Ceiling<F: Real = f64> {
    Finite(F),
    Unbounded,
}

impl<F: Real> Ceiling<F> {
    pub fn finite(self) -> Option<F> {
        match self {
            Ceiling::Finite(v) => Some(v),
            Ceiling::Unbounded => None,
        }
    }

    /// `y^{-(d-1)}` with the unbounded ceiling contributing zero.
    fn inverse_power(self, p: i32) -> F {
        match self {
            Ceiling::Finite(v) => v.powi(-p),
            Ceiling::Unbounded => F::zero(),
        }
    }
}

/// Axis-aligned product region: horizontal box times a height interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Region<F: Real = f64> {
    pub lo: Vec<F>,
    pub hi: Vec<F>,
    pub y_lo: F,
    pub y_hi: Ceiling<F>,
}

impl<F: Real> Region<F> {
    pub fn new(lo: Vec<F>, hi: Vec<F>, y_lo: F, y_hi: Ceiling<F>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::usage("region bounds have different dimensions"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::domain("region requires finite lo <= hi in every coordinate"));
        }
        if !(y_lo > F::zero()) || !y_lo.is_finite() {
            return Err(Error::domain(format!("region floor must be positive, got {y_lo}")));
        }
        if let Ceiling::Finite(top) = y_hi {
            if !(top >= y_lo) || !top.is_finite() {
                return Err(Error::domain("region ceiling must be finite and >= floor"));
            }
        }
        Ok(Self { lo, hi, y_lo, y_hi })
    }

    /// The sampling window `[0, 1]^{d-1} x [e^{-lambda}, inf)`.
    pub fn window(d: usize, lambda: F) -> Result<Self> {
        if d < 2 {
            return Err(Error::usage("dimension must be at least 2"));
        }
        Self::new(
            vec![F::zero(); d - 1],
            vec![F::one(); d - 1],
            (-lambda).exp(),
            Ceiling::Unbounded,
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len() + 1
    }

    pub fn contains(&self, x: &[F], y: F) -> bool {
        y >= self.y_lo
            && self.y_hi.finite().is_none_or(|top| y <= top)
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    pub fn contains_point(&self, p: &HPoint<F>) -> bool {
        self.contains(&p.x, p.y)
    }

    /// Lebesgue measure of the horizontal box.
    pub fn horizontal_measure(&self) -> F {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(F::one(), |acc, (&a, &b)| acc * (b - a))
    }

    /// Hyperbolic volume `|box| (y_lo^{-(d-1)} - y_hi^{-(d-1)}) / (d-1)`.
    pub fn volume(&self) -> F {
        let p = (self.dim() - 1) as i32;
        let leb = self.horizontal_measure();
        if leb == F::zero() {
            return F::zero();
        }
        leb * (self.y_lo.powi(-p) - self.y_hi.inverse_power(p)) / F::lit(p as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BallSpec<F: Real = f64> {
    pub center: HPoint<F>,
    pub radius: F,
}

impl<F: Real> BallSpec<F> {
    pub fn new(center: HPoint<F>, radius: F) -> Result<Self> {
        if !(radius >= F::zero()) || !radius.is_finite() {
            return Err(Error::domain(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        Ok(Self { center, radius })
    }
}

#[inline]
pub fn euclidean_sq<F: Real>(x1: &[F], y1: F, x2: &[F], y2: F) -> F {
    let dy = y1 - y2;
    x1.iter()
        .zip(x2)
        .fold(dy * dy, |acc, (&a, &b)| acc + (a - b) * (a - b))
}

/// `cosh(dist_hyp) - 1` for raw coordinates; no validation.
#[inline]
pub fn gap<F: Real>(x1: &[F], y1: F, x2: &[F], y2: F) -> F {
    euclidean_sq(x1, y1, x2, y2) / (F::lit(2.0) * y1 * y2)
}

/// Inverse of [`gap`]: `arcosh(1 + g)` evaluated stably.
#[inline]
pub fn dist_from_gap<F: Real>(g: F) -> F {
    (g + (g * (g + F::lit(2.0))).sqrt()).ln_1p()
}

/// `cosh(r) - 1 = 2 sinh^2(r/2)`.
#[inline]
pub fn gap_from_dist<F: Real>(r: F) -> F {
    let s = (r * F::lit(0.5)).sinh();
    F::lit(2.0) * s * s
}

/// Hyperbolic distance between raw coordinates; no validation.
#[inline]
pub fn dist_raw<F: Real>(x1: &[F], y1: F, x2: &[F], y2: F) -> F {
    dist_from_gap(gap(x1, y1, x2, y2))
}

pub fn dist_hyp<F: Real>(z1: &HPoint<F>, z2: &HPoint<F>) -> Result<F> {
    if z1.x.len() != z2.x.len() {
        return Err(Error::usage(format!(
            "dimension mismatch: {} vs {}",
            z1.dim(),
            z2.dim()
        )));
    }
    if !(z1.y > F::zero() && z2.y > F::zero()) {
        return Err(Error::domain("heights must be positive"));
    }
    Ok(dist_raw(&z1.x, z1.y, &z2.x, z2.y))
}

/// Distance expressed through the relative horizontal offset `kappa = |x1 - x2| / y1`
/// and the height ratio `v = y2 / y1`:
/// `Phi(t) = log t - log 4 + 2 log(1 + sqrt(1 - 4/t))`, `t = (kappa^2 + (v + 1)^2) / v`.
pub fn phi_dist<F: Real>(kappa: F, v: F) -> Result<F> {
    if !(v > F::zero()) {
        return Err(Error::domain(format!("height ratio must be positive, got {v}")));
    }
    if !(kappa >= F::zero()) {
        return Err(Error::domain(format!("offset must be nonnegative, got {kappa}")));
    }
    let one = F::one();
    let k2 = kappa * kappa;
    let near = k2 + (v - one) * (v - one); // v (t - 4)
    let far = k2 + (v + one) * (v + one); // v t
    // log(t/4) = log1p((t - 4)/4) and 1 - 4/t = near / far, both free of cancellation.
    let log_t_over_4 = (near / (F::lit(4.0) * v)).ln_1p();
    let root = (near / far).sqrt();
    Ok(log_t_over_4 + F::lit(2.0) * root.ln_1p())
}

/// Surface content `2 pi^{d/2} / Gamma(d/2)` of the unit sphere in `R^d`.
pub fn sphere_constant<F: Real>(d: usize) -> F {
    // Gamma(d/2) built multiplicatively from Gamma(1) = 1 or Gamma(1/2) = sqrt(pi).
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut a = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while a < d as f64 / 2.0 - 0.25 {
        gamma *= a;
        a += 1.0;
    }
    F::lit(2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma)
}

fn check_ball_args<F: Real>(r: F, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::usage("dimension must be at least 2"));
    }
    if !(r >= F::zero()) {
        return Err(Error::domain(format!("radius must be nonnegative, got {r}")));
    }
    Ok(())
}

/// `beta_d * int_0^r sinh^{d-1}(u) du` by adaptive quadrature, for any `d >= 2`.
pub fn ball_volume_quadrature<F: Real>(r: F, d: usize) -> Result<F> {
    check_ball_args(r, d)?;
    if r == F::zero() {
        return Ok(F::zero());
    }
    let p = (d - 1) as i32;
    let est = quadrature::integrate(|u: F| u.sinh().powi(p), F::zero(), r, 1e-13);
    Ok(sphere_constant::<F>(d) * est.value)
}

/// Hyperbolic volume of a ball of radius `r` in dimension `d`.
///
/// Closed forms for `d = 2` (`4 pi sinh^2(r/2)`) and `d = 3`
/// (`pi (sinh 2r - 2r)`); quadrature otherwise.
pub fn ball_volume<F: Real>(r: F, d: usize) -> Result<F> {
    check_ball_args(r, d)?;
    Ok(ball_volume_unchecked(r, d))
}

pub(crate) fn ball_volume_unchecked<F: Real>(r: F, d: usize) -> F {
    let pi = F::PI();
    match d {
        2 => F::lit(2.0) * pi * gap_from_dist(r),
        3 => {
            let x = F::lit(2.0) * r;
            let excess = if x < F::lit(1e-3) {
                // sinh x - x by its series; the direct difference cancels.
                let x2 = x * x;
                x * x2 / F::lit(6.0) * (F::one() + x2 / F::lit(20.0) * (F::one() + x2 / F::lit(42.0)))
            } else {
                x.sinh() - x
            };
            pi * excess
        }
        _ => ball_volume_quadrature(r, d).expect("arguments validated"),
    }
}

/// Unique `r >= 0` with `ball_volume(r, d) = volume`.
pub fn inverse_ball_volume<F: Real>(volume: F, d: usize) -> Result<F> {
    if d < 2 {
        return Err(Error::usage("dimension must be at least 2"));
    }
    if !(volume >= F::zero()) || !volume.is_finite() {
        return Err(Error::domain(format!("volume must be finite and nonnegative, got {volume}")));
    }
    if volume == F::zero() {
        return Ok(F::zero());
    }
    if d == 2 {
        let s = (volume / (F::lit(4.0) * F::PI())).sqrt();
        return Ok(F::lit(2.0) * s.asinh());
    }
    let mut lo = F::zero();
    let mut hi = F::one();
    let mut doublings = 0;
    while ball_volume_unchecked(hi, d) < volume {
        lo = hi;
        hi = hi * F::lit(2.0);
        doublings += 1;
        if doublings > 60 || !hi.is_finite() {
            return Err(Error::domain("ball volume bracket did not close"));
        }
    }
    let beta = sphere_constant::<F>(d);
    let p = (d - 1) as i32;
    let tol_abs = F::lit(1e-12_f64.max(F::TOL_FLOOR));
    let mut r = F::lit(0.5) * (lo + hi);
    for _ in 0..200 {
        let f = ball_volume_unchecked(r, d) - volume;
        if f == F::zero() {
            return Ok(r);
        }
        if f < F::zero() {
            lo = r;
        } else {
            hi = r;
        }
        let slope = beta * r.sinh().powi(p);
        let newton = r - f / slope;
        let next = if slope > F::zero() && newton > lo && newton < hi {
            newton
        } else {
            F::lit(0.5) * (lo + hi)
        };
        let step = (next - r).abs();
        r = next;
        if step <= tol_abs * F::lit(1e-2) || hi - lo <= tol_abs * F::lit(1e-2) * (F::one() + r) {
            break;
        }
    }
    Ok(r)
}

/// Hyperbolic volume of a region, checking it lives in dimension `d`.
pub fn region_volume<F: Real>(region: &Region<F>, d: usize) -> Result<F> {
    if region.dim() != d {
        return Err(Error::usage(format!(
            "region has dimension {}, expected {d}",
            region.dim()
        )));
    }
    Ok(region.volume())
}

/// Tightest region containing the ball.
///
/// In half-space coordinates `B_r((x, y))` is the Euclidean ball centred at
/// `(x, y cosh r)` with radius `y sinh r`, so the extent is exact:
/// heights `[y e^{-r}, y e^{r}]`, horizontal offsets up to `y sinh r`.
pub fn ball_bbox<F: Real>(ball: &BallSpec<F>) -> Region<F> {
    let HPoint { x, y } = &ball.center;
    let half = *y * ball.radius.sinh();
    Region {
        lo: x.iter().map(|&c| c - half).collect(),
        hi: x.iter().map(|&c| c + half).collect(),
        y_lo: *y * (-ball.radius).exp(),
        y_hi: Ceiling::Finite(*y * ball.radius.exp()),
    }
}

/// Exact containment of a hyperbolic ball in a product region.
///
/// Both sets are products-with-Euclidean-ball structure: the ball is a
/// Euclidean ball, so it fits iff its per-axis projections fit.
pub fn ball_in_region<F: Real>(ball: &BallSpec<F>, region: &Region<F>) -> bool {
    let HPoint { x, y } = &ball.center;
    let r = ball.radius;
    if x.len() != region.lo.len() {
        return false;
    }
    if *y * (-r).exp() < region.y_lo {
        return false;
    }
    if let Ceiling::Finite(top) = region.y_hi {
        if *y * r.exp() > top {
            return false;
        }
    }
    let half = *y * r.sinh();
    x.iter()
        .zip(region.lo.iter().zip(&region.hi))
        .all(|(&c, (&a, &b))| c - half >= a && c + half <= b)
}
