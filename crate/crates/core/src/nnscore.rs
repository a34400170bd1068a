//! kNN radii, recentred ball-volume scores and stopping sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgeom::{ball_volume_unchecked, dist_from_gap, gap, gap_from_dist, BallSpec, HPoint};
use crate::index::{kth_gap, LayeredIndex};
use crate::limitlaw::Regime;
use crate::real::Real;
use crate::sampler::PointConfig;

/// A radius or score that is either known exactly or right-censored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "")]
pub enum Censorable<F: Real = f64> {
    Exact(F),
    Censored,
}

impl<F: Real> Censorable<F> {
    pub fn exact(self) -> Option<F> {
        match self {
            Censorable::Exact(v) => Some(v),
            Censorable::Censored => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, Censorable::Censored)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScoredPoint<F: Real = f64> {
    pub point: HPoint<F>,
    pub radius_k: Censorable<F>,
    pub score: Censorable<F>,
    pub exceeds: bool,
}

/// Ball volume from the gap key; for `d = 2` this is exactly `2 pi g`.
#[inline]
pub fn ball_volume_from_gap<F: Real>(g: F, d: usize) -> F {
    if d == 2 {
        F::lit(2.0) * F::PI() * g
    } else {
        ball_volume_unchecked(dist_from_gap(g), d)
    }
}

fn locate<F: Real>(x: &HPoint<F>, config: &PointConfig<F>) -> Result<usize> {
    if x.dim() != config.dim() {
        return Err(Error::usage("point and configuration differ in dimension"));
    }
    (0..config.len())
        .find(|&i| config.y(i) == x.y && config.x(i) == x.x.as_slice())
        .ok_or_else(|| Error::usage("point is not an atom of the configuration"))
}

/// Brute-force gap of the `k`-th nearest other atom to atom `i`, among atoms accepted by `accept`.
pub fn kth_gap_brute<F: Real>(
    config: &PointConfig<F>,
    i: usize,
    k: usize,
    accept: impl Fn(usize) -> bool,
) -> Option<F> {
    let (x, y) = (config.x(i), config.y(i));
    let mut gaps: Vec<F> = (0..config.len())
        .filter(|&j| j != i && accept(j))
        .map(|j| gap(x, y, config.x(j), config.y(j)))
        .collect();
    if gaps.len() < k {
        return None;
    }
    let (_, kth, _) = gaps.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
    Some(*kth)
}

fn censor_gap<F: Real>(g: Option<F>, r_cap: F) -> Censorable<F> {
    match g {
        Some(g) if g <= gap_from_dist(r_cap) => Censorable::Exact(dist_from_gap(g)),
        _ => Censorable::Censored,
    }
}

/// `R_k(x)`: distance from atom `x` to its `k`-th nearest other atom, censored beyond `r_cap`.
pub fn knn_radius<F: Real>(x: &HPoint<F>, config: &PointConfig<F>, k: usize, r_cap: F) -> Result<Censorable<F>> {
    if k < 1 {
        return Err(Error::usage("k must be at least 1"));
    }
    let i = locate(x, config)?;
    Ok(censor_gap(kth_gap_brute(config, i, k, |_| true), r_cap))
}

/// Indexed variant of [`knn_radius`] for atom `i`; `index` must be built over `config` with offset 0.
pub fn knn_radius_indexed<F: Real>(
    index: &LayeredIndex<F>,
    config: &PointConfig<F>,
    i: usize,
    k: usize,
    r_cap: F,
) -> Result<Censorable<F>> {
    if k < 1 {
        return Err(Error::usage("k must be at least 1"));
    }
    if i >= config.len() || index.len() != config.len() {
        return Err(Error::usage("atom index out of range or index/config mismatch"));
    }
    let me = i as u32;
    let g = kth_gap(&[index], config.x(i), config.y(i), k, r_cap, r_cap, |id| id != me);
    Ok(censor_gap(g, r_cap))
}

/// Score from a (possibly censored) gap key.
pub fn score_from_gap<F: Real>(point: HPoint<F>, g: Option<F>, regime: &Regime<F>) -> ScoredPoint<F> {
    match g {
        Some(g) if g <= gap_from_dist(regime.r_cap) => {
            let s = ball_volume_from_gap(g, regime.d) - regime.v;
            ScoredPoint {
                point,
                radius_k: Censorable::Exact(dist_from_gap(g)),
                score: Censorable::Exact(s),
                exceeds: s > regime.s0,
            }
        }
        _ => ScoredPoint {
            point,
            radius_k: Censorable::Censored,
            score: Censorable::Censored,
            exceeds: regime.u_cap > regime.s0,
        },
    }
}

/// `f(x, config) = |B_{R_k(x)}| - v` with the exceedance flag.
pub fn score<F: Real>(x: &HPoint<F>, config: &PointConfig<F>, regime: &Regime<F>) -> Result<ScoredPoint<F>> {
    let i = locate(x, config)?;
    let g = kth_gap_brute(config, i, regime.k, |_| true);
    Ok(score_from_gap(x.clone(), g, regime))
}

/// The kNN ball `B_{R_k(x)}(x)`.
pub fn stopping_set<F: Real>(x: &HPoint<F>, config: &PointConfig<F>, k: usize) -> Result<BallSpec<F>> {
    if k < 1 {
        return Err(Error::usage("k must be at least 1"));
    }
    let i = locate(x, config)?;
    let g = kth_gap_brute(config, i, k, |_| true)
        .ok_or_else(|| Error::Unavailable(format!("fewer than {k} other atoms; radius censored")))?;
    Ok(BallSpec {
        center: x.clone(),
        radius: dist_from_gap(g),
    })
}
