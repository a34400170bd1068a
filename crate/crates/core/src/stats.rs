//! Distances between discrete measures and the hypothesis checks used by the acceptance suite.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::blocks::AtomMeasure;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::RngStream;

/// `sup_A |mu1(A) - mu2(A)|` for measures given as weights on a common support.
pub fn tv_discrete(mu1: &[f64], mu2: &[f64]) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(Error::usage("measures live on different supports"));
    }
    let (mut pos, mut neg) = (0.0, 0.0);
    for (a, b) in mu1.iter().zip(mu2) {
        let diff = a - b;
        if diff > 0.0 {
            pos += diff;
        } else {
            neg -= diff;
        }
    }
    Ok(f64::max(pos, neg))
}

/// [`tv_discrete`] for finitely supported measures given as `(location, weight)` pairs.
pub fn tv_atoms(mu1: &[(f64, f64)], mu2: &[(f64, f64)]) -> f64 {
    let mut diff: HashMap<u64, f64> = HashMap::new();
    for &(x, w) in mu1 {
        *diff.entry(x.to_bits()).or_default() += w;
    }
    for &(x, w) in mu2 {
        *diff.entry(x.to_bits()).or_default() -= w;
    }
    let mut vals: Vec<f64> = diff.into_values().collect();
    vals.sort_by(f64::total_cmp);
    let pos: f64 = vals.iter().filter(|v| **v > 0.0).sum();
    let neg: f64 = -vals.iter().filter(|v| **v < 0.0).sum::<f64>();
    pos.max(neg)
}

/// Exact total variation distance between two Poisson laws.
pub fn poisson_tv(m1: f64, m2: f64) -> f64 {
    let (p1, p2) = match (Poisson::new(m1), Poisson::new(m2)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return if m1 == m2 { 0.0 } else { 1.0 },
    };
    let top = (m1.max(m2) + 40.0 * m1.max(m2).sqrt() + 40.0) as u64;
    0.5 * (0..=top).map(|k| (p1.pmf(k) - p2.pmf(k)).abs()).sum::<f64>()
}

/// Per-replicate bin counts on `E_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedLaw {
    pub edges: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl BinnedLaw {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::usage("bin edges must be strictly increasing"));
        }
        Ok(Self {
            edges,
            counts: Vec::new(),
        })
    }

    pub fn from_measures<F: Real>(edges: Vec<f64>, measures: &[AtomMeasure<F>]) -> Result<Self> {
        let mut law = Self::new(edges)?;
        let fe: Vec<F> = law.edges.iter().map(|&e| F::lit(e)).collect();
        for m in measures {
            law.counts.push(m.bin_counts(&fe, true));
        }
        Ok(law)
    }

    pub fn push(&mut self, counts: Vec<u64>) -> Result<()> {
        if counts.len() + 1 != self.edges.len() {
            return Err(Error::usage("count vector length does not match bins"));
        }
        self.counts.push(counts);
        Ok(())
    }

    pub fn replicates(&self) -> usize {
        self.counts.len()
    }

    /// Total count per replicate.
    pub fn totals(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c.iter().sum()).collect()
    }

    /// Applies the same permutation to every bin.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            edges: self.edges.clone(),
            counts: self
                .counts
                .iter()
                .map(|c| perm.iter().map(|&p| c[p]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawTv {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// Set when either sample has fewer than 100 replicates.
    pub low_replicates: bool,
}

fn capped_keys(law: &BinnedLaw, cap: u64) -> Vec<Vec<u64>> {
    law.counts
        .iter()
        .map(|c| c.iter().map(|&v| v.min(cap)).collect())
        .collect()
}

fn plug_in_tv(a: &[&Vec<u64>], b: &[&Vec<u64>]) -> f64 {
    // Integer tallies keep the result exact and independent of hash order.
    let mut tally: HashMap<&Vec<u64>, (i128, i128)> = HashMap::new();
    for k in a {
        tally.entry(*k).or_default().0 += 1;
    }
    for k in b {
        tally.entry(*k).or_default().1 += 1;
    }
    let (na, nb) = (a.len() as i128, b.len() as i128);
    let num: i128 = tally.values().map(|(ca, cb)| (ca * nb - cb * na).abs()).sum();
    num as f64 / (2 * na * nb) as f64
}

/// Plug-in TV between the empirical laws of capped count vectors, with a 95%
/// bootstrap percentile interval from `resamples` resamples.
pub fn empirical_law_tv(
    a: &BinnedLaw,
    b: &BinnedLaw,
    cap: u64,
    resamples: usize,
    stream: &RngStream,
) -> Result<LawTv> {
    if a.edges != b.edges {
        return Err(Error::usage("laws use different bin edges"));
    }
    if a.counts.is_empty() || b.counts.is_empty() {
        return Err(Error::usage("empty sample"));
    }
    let ka = capped_keys(a, cap);
    let kb = capped_keys(b, cap);
    let ra: Vec<&Vec<u64>> = ka.iter().collect();
    let rb: Vec<&Vec<u64>> = kb.iter().collect();
    let estimate = plug_in_tv(&ra, &rb);
    let mut rng = stream.rng();
    let mut boot = Vec::with_capacity(resamples);
    let mut sa = Vec::with_capacity(ka.len());
    let mut sb = Vec::with_capacity(kb.len());
    for _ in 0..resamples {
        sa.clear();
        sb.clear();
        sa.extend((0..ka.len()).map(|_| &ka[rng.random_range(0..ka.len())]));
        sb.extend((0..kb.len()).map(|_| &kb[rng.random_range(0..kb.len())]));
        boot.push(plug_in_tv(&sa, &sb));
    }
    boot.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (ci_low, ci_high) = if boot.is_empty() {
        (estimate, estimate)
    } else {
        (quantile_sorted(&boot, 0.025), quantile_sorted(&boot, 0.975))
    };
    Ok(LawTv {
        estimate,
        ci_low,
        ci_high,
        n_a: ka.len(),
        n_b: kb.len(),
        low_replicates: ka.len() < 100 || kb.len() < 100,
    })
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonFit {
    pub n: usize,
    pub mean: f64,
    pub dispersion: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub degenerate: bool,
}

/// Dispersion index and chi-square goodness of fit against `Poisson(sample mean)`,
/// with cells pooled until each expects at least 5.
pub fn poisson_fit(counts: &[u64]) -> Result<PoissonFit> {
    let n = counts.len();
    if n < 100 {
        return Err(Error::usage(format!("poisson_fit needs at least 100 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = counts.iter().sum::<u64>() as f64 / nf;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if mean == 0.0 {
        return Ok(PoissonFit {
            n,
            mean,
            dispersion: f64::NAN,
            chi_square: f64::NAN,
            dof: 0,
            p_value: f64::NAN,
            degenerate: true,
        });
    }
    let law = Poisson::new(mean).map_err(|e| Error::domain(e.to_string()))?;
    let max = *counts.iter().max().unwrap();
    let mut observed: HashMap<u64, f64> = HashMap::new();
    for &c in counts {
        *observed.entry(c).or_default() += 1.0;
    }
    // Cells [start, end) with the last cell open to infinity.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    let mut k = 0u64;
    loop {
        let tail = if k == 0 { nf } else { nf * law.sf(k - 1) };
        let tail_obs: f64 = observed.iter().filter(|(v, _)| **v >= k).map(|(_, c)| c).sum();
        if tail < 10.0 || k > max + 1_000 {
            // Remaining mass becomes the open tail cell.
            exp_acc += tail;
            obs_acc += tail_obs;
            match cells.last_mut() {
                Some(last) if exp_acc < 5.0 => {
                    last.0 += exp_acc;
                    last.1 += obs_acc;
                }
                _ => cells.push((exp_acc, obs_acc)),
            }
            break;
        }
        exp_acc += nf * law.pmf(k);
        obs_acc += observed.get(&k).copied().unwrap_or(0.0);
        if exp_acc >= 5.0 {
            cells.push((exp_acc, obs_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
        k += 1;
    }
    let chi_square: f64 = cells.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(2);
    let p_value = if dof == 0 {
        f64::NAN
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| Error::domain(e.to_string()))?
            .sf(chi_square)
    };
    Ok(PoissonFit {
        n,
        mean,
        dispersion: var / mean,
        chi_square,
        dof,
        p_value,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    /// `statistic > critical` at the 1% level.
    pub reject: bool,
}

/// One-sample KS statistic against `cdf`, flagged at the asymptotic 1% level `1.628 / sqrt(n)`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::usage("empty sample"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let critical = 1.628 / n.sqrt();
    Ok(KsResult {
        statistic: d,
        critical,
        reject: d > critical,
    })
}

/// Asymptotic Kolmogorov tail `P(K > t)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * t * t).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::usage("empty sample"));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let t = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_sf(t)))
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Uniform JSON record for every reported check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test: String,
    pub statistic: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub decision: String,
}

impl TestRecord {
    pub fn new(test: impl Into<String>, statistic: f64, ci: (f64, f64), n: usize, pass: bool) -> Self {
        Self {
            test: test.into(),
            statistic,
            ci_low: ci.0,
            ci_high: ci.1,
            n,
            decision: if pass { "pass" } else { "fail" }.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        assert_eq!(tv_discrete(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(tv_discrete(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_discrete(&[2.0], &[1.0]).unwrap(), 1.0);
        assert!(tv_discrete(&[1.0], &[1.0, 0.0]).is_err());
        assert_eq!(tv_atoms(&[(0.5, 1.0)], &[(1.5, 1.0)]), 1.0);
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 5e-4);
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 5e-4);
    }

    #[test]
    fn poisson_tv_symmetry() {
        assert_eq!(poisson_tv(3.0, 3.0), 0.0);
        assert!((poisson_tv(5.0, 7.0) - poisson_tv(7.0, 5.0)).abs() < 1e-15);
    }
}
