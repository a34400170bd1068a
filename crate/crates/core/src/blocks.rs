//! Blocks, internal regions, layers, and the exceedance processes built on them.

use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgeom::{dist_from_gap, gap_from_dist, BallSpec, Ceiling, HPoint, Region};
use crate::index::{count_within, kth_gap, LayeredIndex};
use crate::limitlaw::Regime;
use crate::nnscore::score_from_gap;
use crate::real::{ln_factorial, Real};
use crate::rng::RngStream;
use crate::sampler::{sample_exterior, sample_region, PointConfig};

/// Tiling of the window into congruent vertical blocks `S_m x [e^{-lambda}, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BlockSet<F: Real = f64> {
    pub blocks: Vec<Region<F>>,
    /// Number of blocks along each horizontal axis.
    pub per_axis: Vec<usize>,
    pub count: usize,
}

/// Splits `n` into `parts` integer factors, each close to `n^{1/parts}`.
pub fn near_cubic_factors(n: usize, parts: usize) -> Vec<usize> {
    let mut rest = n.max(1);
    let mut out = Vec::with_capacity(parts);
    for left in (1..=parts).rev() {
        if left == 1 {
            out.push(rest);
            break;
        }
        let target = (rest as f64).powf(1.0 / left as f64);
        let best = (1..=rest)
            .filter(|f| rest.is_multiple_of(*f))
            .min_by(|a, b| {
                let da = (*a as f64 - target).abs();
                let db = (*b as f64 - target).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap_or(1);
        out.push(best);
        rest /= best;
    }
    out
}

impl<F: Real> BlockSet<F> {
    /// Horizontal side lengths of every block.
    pub fn sides(&self) -> Vec<F> {
        self.per_axis.iter().map(|&m| F::one() / F::lit(m as f64)).collect()
    }

    /// Block containing the horizontal position `x`, or `None` outside `[0, 1]^{d-1}`.
    pub fn block_of(&self, x: &[F]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for (a, &c) in x.iter().enumerate() {
            if !(c >= F::zero() && c <= F::one()) {
                return None;
            }
            let m = self.per_axis[a];
            let t = (c * F::lit(m as f64)).floor().to_usize().unwrap_or(0).min(m - 1);
            idx += t * stride;
            stride *= m;
        }
        Some(idx)
    }

    /// Hyperbolic volume of one block.
    pub fn block_volume(&self) -> F {
        self.blocks[0].volume()
    }

    pub fn floor(&self) -> F {
        self.blocks[0].y_lo
    }

    /// Euclidean distance from `x` to the boundary of `S_m`.
    pub fn boundary_distance(&self, x: &[F], m: usize) -> F {
        let b = &self.blocks[m];
        x.iter()
            .zip(b.lo.iter().zip(&b.hi))
            .map(|(&c, (&lo, &hi))| (c - lo).min(hi - c))
            .fold(F::infinity(), F::min)
    }

    /// Membership in the internal region of block `m`.
    pub fn in_internal_region(&self, z: &HPoint<F>, m: usize, regime: &Regime<F>) -> Result<bool> {
        let block = self
            .blocks
            .get(m)
            .ok_or_else(|| Error::usage(format!("block index {m} out of range")))?;
        if !block.contains_point(z) {
            return Err(Error::usage("point is not in the given block"));
        }
        Ok(self.boundary_distance(&z.x, m) >= internal_region_margin(z.y, regime))
    }
}

/// Partitions `[0,1]^{d-1}` into `floor(u)` congruent boxes.
pub fn build_blocks<F: Real>(regime: &Regime<F>) -> Result<BlockSet<F>> {
    if !(regime.u >= F::one()) {
        return Err(Error::regime(format!("need u >= 1 for blocking, got {}", regime.u)));
    }
    // Relative slack so a solved u of 19.99999... still gives 20 blocks.
    let count = (regime.u * F::lit(1.0 + 1e-9))
        .floor()
        .to_usize()
        .ok_or_else(|| Error::regime("block count not representable"))?;
    blocks_with_count(regime.d, regime.lambda, count)
}

/// Tiling with an explicit block count.
pub fn blocks_with_count<F: Real>(d: usize, lambda: F, count: usize) -> Result<BlockSet<F>> {
    if d < 2 || count == 0 {
        return Err(Error::usage("need d >= 2 and at least one block"));
    }
    let hdim = d - 1;
    let per_axis = near_cubic_factors(count, hdim);
    let y_lo = (-lambda).exp();
    let mut blocks = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rest = idx;
        let mut lo = Vec::with_capacity(hdim);
        let mut hi = Vec::with_capacity(hdim);
        for &m in &per_axis {
            let t = rest % m;
            rest /= m;
            let mf = F::lit(m as f64);
            lo.push(F::lit(t as f64) / mf);
            hi.push(if t + 1 == m { F::one() } else { F::lit((t + 1) as f64) / mf });
        }
        blocks.push(Region::new(lo, hi, y_lo, Ceiling::Unbounded)?);
    }
    Ok(BlockSet {
        blocks,
        per_axis,
        count,
    })
}

/// `x(y) = y e^{r(w)}`.
pub fn internal_region_margin<F: Real>(y: F, regime: &Regime<F>) -> F {
    y * regime.r_w.exp()
}

/// Internal-region membership of `z` in block `m` of the regime's default tiling.
pub fn in_internal_region<F: Real>(z: &HPoint<F>, m: usize, regime: &Regime<F>) -> Result<bool> {
    build_blocks(regime)?.in_internal_region(z, m, regime)
}

/// `|Q_m \ Q_m^-| / |Q_m|` by exact integration over height.
pub fn internal_volume_ratio<F: Real>(regime: &Regime<F>, blockset: &BlockSet<F>) -> F {
    boundary_volume_ratio(&blockset.sides(), blockset.floor(), regime.r_w.exp(), regime.d)
}

/// Boundary-strip fraction of a box column `prod [0, s_a] x [y0, inf)` when the
/// margin at height `y` is `c y`.
///
/// The internal slice is `prod max(s_a - 2 c y, 0)`; below `Y = min s_a / (2c)`
/// the deficit is a polynomial in `y`, above it the whole slice is lost.
pub fn boundary_volume_ratio<F: Real>(sides: &[F], y0: F, c: F, d: usize) -> F {
    if c <= F::zero() {
        return F::zero();
    }
    let p = (d - 1) as i32;
    let pf = F::lit(p as f64);
    let area: F = sides.iter().copied().fold(F::one(), |a, s| a * s);
    let total = area * y0.powi(-p) / pf;
    let y_star = sides.iter().copied().fold(F::infinity(), F::min) / (F::lit(2.0) * c);
    if y_star <= y0 {
        return F::one();
    }
    // Coefficients of prod (s_a - 2 c y) in powers of y.
    let mut coef = vec![F::one()];
    for &s in sides {
        let mut next = vec![F::zero(); coef.len() + 1];
        for (j, &a) in coef.iter().enumerate() {
            next[j] = next[j] + a * s;
            next[j + 1] = next[j + 1] - a * F::lit(2.0) * c;
        }
        coef = next;
    }
    // Deficit = area - poly = -sum_{j >= 1} coef_j y^j, integrated against y^{-d}.
    let mut strip = F::zero();
    for (j, &a) in coef.iter().enumerate().skip(1) {
        let e = j as i32 - d as i32 + 1;
        let integral = if e == 0 {
            (y_star / y0).ln()
        } else {
            (y_star.powi(e) - y0.powi(e)) / F::lit(e as f64)
        };
        strip = strip - a * integral;
    }
    strip = strip + area * y_star.powi(-p) / pf;
    (strip / total).max(F::zero()).min(F::one())
}

/// One atom of an exceedance measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Atom<F: Real = f64> {
    pub value: F,
    pub weight: F,
    pub censored: bool,
}

/// Finite atomic measure on `E_0 = [s0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AtomMeasure<F: Real = f64> {
    pub s0: F,
    pub u_cap: F,
    pub atoms: Vec<Atom<F>>,
}

impl<F: Real> AtomMeasure<F> {
    pub fn new(s0: F, u_cap: F) -> Self {
        Self {
            s0,
            u_cap,
            atoms: Vec::new(),
        }
    }

    pub fn push(&mut self, value: F) -> Result<()> {
        if !(value >= self.s0) {
            return Err(Error::domain(format!("atom {value} below s0 = {}", self.s0)));
        }
        self.atoms.push(Atom {
            value,
            weight: F::one(),
            censored: false,
        });
        Ok(())
    }

    /// A right-censored atom, recorded at `u_cap`.
    pub fn push_censored(&mut self) {
        self.atoms.push(Atom {
            value: self.u_cap,
            weight: F::one(),
            censored: true,
        });
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> F {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn censored_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.censored).count()
    }

    /// Mass on `(u, inf)`, censored atoms included.
    pub fn mass_above(&self, u: F) -> F {
        self.atoms.iter().filter(|a| a.value > u).map(|a| a.weight).sum()
    }

    /// Number of atoms falling in each bin `[e_i, e_{i+1})`; censored atoms are
    /// skipped unless `with_censored`.
    pub fn bin_counts(&self, edges: &[F], with_censored: bool) -> Vec<u64> {
        let mut out = vec![0u64; edges.len().saturating_sub(1)];
        for a in &self.atoms {
            if a.censored && !with_censored {
                continue;
            }
            if let Some(b) = bin_index(edges, a.value) {
                out[b] += 1;
            }
        }
        out
    }

    pub fn scaled(&self, c: F) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.weight = a.weight * c;
        }
        out
    }

    pub fn extend(&mut self, other: &Self) {
        self.atoms.extend_from_slice(&other.atoms);
    }
}

/// Bin containing `v` for half-open bins `[e_i, e_{i+1})`; the last edge may be `+inf`.
pub fn bin_index<F: Real>(edges: &[F], v: F) -> Option<usize> {
    if edges.len() < 2 || v < edges[0] || !(v < edges[edges.len() - 1]) {
        return None;
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}

/// Per-atom data for the four boundary counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCounts {
    /// Strip points (outside every internal region) with `R_k > r(w)`.
    pub n1: u64,
    /// Internal-region points with `R_k > r(s0)`.
    pub n2: u64,
    /// Internal-region points with `R_k > r(w)`.
    pub n1_swapped: u64,
    /// Strip points with `R_k > r(s0)`.
    pub n2_swapped: u64,
}

/// Interior and exterior samples with indexes and per-point block data.
///
/// Candidates are interior points with fewer than `k` same-block interior
/// neighbours within `min(r(s0), r(w))`; every other point has a score at or
/// below `s0` under every neighbour restriction used here.
pub struct Scene<F: Real = f64> {
    regime: Regime<F>,
    blocks: BlockSet<F>,
    interior: PointConfig<F>,
    exterior: PointConfig<F>,
    int_index: LayeredIndex<F>,
    ext_index: LayeredIndex<F>,
    int_block: Vec<u32>,
    ext_block: Vec<u32>,
    internal: Vec<bool>,
    candidates: Vec<u32>,
    r_low: F,
}

const NO_BLOCK: u32 = u32::MAX;

impl<F: Real> Scene<F> {
    pub fn new(
        interior: PointConfig<F>,
        exterior: PointConfig<F>,
        regime: &Regime<F>,
        blocks: &BlockSet<F>,
    ) -> Result<Self> {
        let d = regime.d;
        if interior.dim() != d || exterior.dim() != d {
            return Err(Error::usage("configuration dimension differs from regime"));
        }
        let rho = regime.r_cap.max(F::lit(0.25));
        let int_index = LayeredIndex::build(&interior, 0, rho)?;
        let int_block: Vec<u32> = (0..interior.len())
            .map(|i| blocks.block_of(interior.x(i)).map_or(NO_BLOCK, |b| b as u32))
            .collect();
        if int_block.contains(&NO_BLOCK) {
            return Err(Error::usage("interior point outside the window"));
        }
        let internal: Vec<bool> = (0..interior.len())
            .map(|i| {
                blocks.boundary_distance(interior.x(i), int_block[i] as usize)
                    >= internal_region_margin(interior.y(i), regime)
            })
            .collect();
        let r_low = regime.r_s0.min(regime.r_w);
        // Shrunk so rounding never turns an exceedance into a non-candidate.
        let r_probe = dist_from_gap(gap_from_dist(r_low) * F::lit(1.0 - 1e-9));
        let k = regime.k;
        let candidates = (0..interior.len())
            .filter(|&i| {
                let (me, m) = (i as u32, int_block[i]);
                let found = count_within(&[&int_index], interior.x(i), interior.y(i), r_probe, k, |id| {
                    id != me && int_block[id as usize] == m
                });
                found < k
            })
            .map(|i| i as u32)
            .collect();
        let mut scene = Self {
            regime: regime.clone(),
            blocks: blocks.clone(),
            interior,
            exterior: PointConfig::empty(d),
            int_index,
            ext_index: LayeredIndex::build(&PointConfig::empty(d), 0, rho)?,
            int_block,
            ext_block: Vec::new(),
            internal,
            candidates,
            r_low,
        };
        scene.set_exterior(exterior)?;
        Ok(scene)
    }

    /// Replaces the exterior sample.
    pub fn set_exterior(&mut self, exterior: PointConfig<F>) -> Result<()> {
        let rho = self.regime.r_cap.max(F::lit(0.25));
        let offset = self.interior.len() as u32;
        self.ext_index = LayeredIndex::build(&exterior, offset, rho)?;
        self.ext_block = (0..exterior.len())
            .map(|i| self.blocks.block_of(exterior.x(i)).map_or(NO_BLOCK, |b| b as u32))
            .collect();
        self.exterior = exterior;
        Ok(())
    }

    pub fn interior(&self) -> &PointConfig<F> {
        &self.interior
    }

    pub fn exterior(&self) -> &PointConfig<F> {
        &self.exterior
    }

    pub fn candidates(&self) -> &[u32] {
        &self.candidates
    }

    pub fn block_of_point(&self, i: usize) -> usize {
        self.int_block[i] as usize
    }

    pub fn is_internal(&self, i: usize) -> bool {
        self.internal[i]
    }

    fn block_of_id(&self, id: u32) -> u32 {
        let n = self.interior.len() as u32;
        if id < n {
            self.int_block[id as usize]
        } else {
            self.ext_block[(id - n) as usize]
        }
    }

    /// Same-block interior kNN gap (no exterior points).
    pub fn block_gap(&self, i: usize) -> Option<F> {
        let (me, m) = (i as u32, self.int_block[i]);
        let n = self.interior.len() as u32;
        kth_gap(
            &[&self.int_index],
            self.interior.x(i),
            self.interior.y(i),
            self.regime.k,
            self.r_low,
            self.regime.r_cap,
            |id| id != me && id < n && self.int_block[id as usize] == m,
        )
    }

    /// kNN gap among all interior and exterior points.
    pub fn global_gap(&self, i: usize) -> Option<F> {
        let me = i as u32;
        kth_gap(
            &[&self.int_index, &self.ext_index],
            self.interior.x(i),
            self.interior.y(i),
            self.regime.k,
            self.r_low,
            self.regime.r_cap,
            |id| id != me,
        )
    }

    /// kNN gap among points of the column above `S_m`, exterior included.
    pub fn column_gap(&self, i: usize) -> Option<F> {
        let (me, m) = (i as u32, self.int_block[i]);
        kth_gap(
            &[&self.int_index, &self.ext_index],
            self.interior.x(i),
            self.interior.y(i),
            self.regime.k,
            self.r_low,
            self.regime.r_cap,
            |id| id != me && self.block_of_id(id) == m,
        )
    }

    /// Balls that the exterior must cover: radius `min(block radius, r_cap)` around every candidate.
    pub fn anchor_balls(&self) -> Vec<BallSpec<F>> {
        self.candidates
            .iter()
            .map(|&i| {
                let i = i as usize;
                let radius = match self.block_gap(i) {
                    Some(g) => dist_from_gap(g),
                    None => self.regime.r_cap,
                };
                BallSpec {
                    center: self.interior.point(i),
                    radius,
                }
            })
            .collect()
    }

    fn push_score(&self, out: &mut AtomMeasure<F>, i: usize, g: Option<F>) -> Result<()> {
        let sp = score_from_gap(self.interior.point(i), g, &self.regime);
        if !sp.exceeds {
            return Ok(());
        }
        match sp.score.exact() {
            Some(s) => out.push(s),
            None => {
                out.push_censored();
                Ok(())
            }
        }
    }

    fn empty_measure(&self) -> AtomMeasure<F> {
        AtomMeasure::new(self.regime.s0, self.regime.u_cap)
    }

    /// `xi`: exceedance scores of interior points against the full process.
    pub fn xi(&self) -> Result<AtomMeasure<F>> {
        let mut out = self.empty_measure();
        for &i in &self.candidates {
            self.push_score(&mut out, i as usize, self.global_gap(i as usize))?;
        }
        Ok(out)
    }

    fn eta_with(&self, gap_of: impl Fn(usize) -> Option<F>) -> Result<(AtomMeasure<F>, Vec<AtomMeasure<F>>)> {
        let mut per_block = vec![self.empty_measure(); self.blocks.count];
        for &i in &self.candidates {
            let i = i as usize;
            if self.internal[i] {
                self.push_score(&mut per_block[self.int_block[i] as usize], i, gap_of(i))?;
            }
        }
        let mut total = self.empty_measure();
        for m in &per_block {
            total.extend(m);
        }
        Ok((total, per_block))
    }

    /// `eta`: internal-region points scored against their own block's interior points.
    pub fn eta(&self) -> Result<(AtomMeasure<F>, Vec<AtomMeasure<F>>)> {
        self.eta_with(|i| self.block_gap(i))
    }

    /// `eta` with neighbours taken from the whole column above each block,
    /// including exterior points below the window floor.
    pub fn eta_column(&self) -> Result<(AtomMeasure<F>, Vec<AtomMeasure<F>>)> {
        self.eta_with(|i| self.column_gap(i))
    }

    /// Boundary error counts from full-process radii.
    pub fn boundary_counts(&self) -> BoundaryCounts {
        let g_w = gap_from_dist(self.regime.r_w);
        let g_s0 = gap_from_dist(self.regime.r_s0);
        let mut out = BoundaryCounts::default();
        for &i in &self.candidates {
            let i = i as usize;
            let g = self.global_gap(i).unwrap_or(F::infinity());
            let (beyond_w, beyond_s0) = ((g > g_w) as u64, (g > g_s0) as u64);
            if self.internal[i] {
                out.n2 += beyond_s0;
                out.n1_swapped += beyond_w;
            } else {
                out.n1 += beyond_w;
                out.n2_swapped += beyond_s0;
            }
        }
        out
    }

    /// Interior atoms of the exceedance process: points with at most `k`
    /// process points (itself included) in `B_{r(s0)}`.
    pub fn exceedance_indices(&self) -> Vec<usize> {
        let g_s0 = gap_from_dist(self.regime.r_s0);
        self.candidates
            .iter()
            .map(|&i| i as usize)
            .filter(|&i| self.global_gap(i).is_none_or(|g| g > g_s0))
            .collect()
    }
}

/// Interior on the window plus an exterior covering every candidate's kNN ball.
///
/// The anchor set depends on the interior only and the exterior is sampled
/// independently on the union of anchor-ball boxes outside the window, so all
/// radii computed by the scene agree exactly with those of a global process.
/// Substreams: `child(0)` interior, `child(1)` exterior.
pub fn sample_scene<F: Real>(regime: &Regime<F>, blocks: &BlockSet<F>, stream: &RngStream) -> Result<Scene<F>> {
    let window = regime.window();
    let interior = sample_region(&window, regime.d, &stream.child(0))?;
    let mut scene = Scene::new(interior, PointConfig::empty(regime.d), regime, blocks)?;
    let balls = scene.anchor_balls();
    let exterior = sample_exterior(&window, &balls, &stream.child(1))?;
    scene.set_exterior(exterior)?;
    Ok(scene)
}

/// `xi` for explicit samples (exterior from `sample_extended` with `r_max = r_cap`).
pub fn build_xi<F: Real>(
    interior: &PointConfig<F>,
    exterior: &PointConfig<F>,
    regime: &Regime<F>,
) -> Result<AtomMeasure<F>> {
    let blocks = build_blocks(regime)?;
    Scene::new(interior.clone(), exterior.clone(), regime, &blocks)?.xi()
}

/// Separated process `eta` and its per-block parts; uses interior points only.
pub fn build_eta<F: Real>(
    interior: &PointConfig<F>,
    regime: &Regime<F>,
    blocks: &BlockSet<F>,
) -> Result<(AtomMeasure<F>, Vec<AtomMeasure<F>>)> {
    Scene::new(interior.clone(), PointConfig::empty(regime.d), regime, blocks)?.eta()
}

pub fn boundary_counts<F: Real>(
    interior: &PointConfig<F>,
    exterior: &PointConfig<F>,
    regime: &Regime<F>,
    blocks: &BlockSet<F>,
) -> Result<BoundaryCounts> {
    Ok(Scene::new(interior.clone(), exterior.clone(), regime, blocks)?.boundary_counts())
}

fn zeta_with_mass<F: Real>(regime: &Regime<F>, mass: f64, stream: &RngStream) -> Result<AtomMeasure<F>> {
    let mut rng = stream.rng();
    let mut out = AtomMeasure::new(regime.s0, regime.u_cap);
    if mass > 0.0 {
        let dist = Poisson::new(mass).map_err(|e| Error::domain(format!("zeta mean {mass}: {e}")))?;
        let n: f64 = dist.sample(&mut rng);
        for _ in 0..n as u64 {
            let e: f64 = Exp1.sample(&mut rng);
            out.push(regime.s0 + F::lit(e))?;
        }
    }
    Ok(out)
}

fn tau_total<F: Real>(regime: &Regime<F>) -> f64 {
    (-regime.s0.as_f64() - ln_factorial(regime.k - 1)).exp()
}

/// Poisson process on `E_0` with intensity `u * tau_k`.
pub fn sample_zeta<F: Real>(regime: &Regime<F>, stream: &RngStream) -> Result<AtomMeasure<F>> {
    zeta_with_mass(regime, regime.u.as_f64() * tau_total(regime), stream)
}

/// One block's comparison process: Poisson on `E_0` with intensity `tau_k`.
pub fn sample_zeta_block<F: Real>(regime: &Regime<F>, stream: &RngStream) -> Result<AtomMeasure<F>> {
    zeta_with_mass(regime, tau_total(regime), stream)
}

/// Vertical layers of one block, its tail, and the diluted box families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LayerRegions<F: Real = f64> {
    /// Layer thickness in log-height, `r(s0)` nudged so the layer count is integral.
    pub r_prime: F,
    pub l0: usize,
    pub layers: Vec<Region<F>>,
    pub tail: Region<F>,
    /// `diluted[l]` holds the boxes of layer `l`.
    pub diluted: Vec<Vec<Region<F>>>,
}

/// Layers `S x T_l`, `T_l = [e^{-lambda + l r'}, e^{-lambda + (l+1) r'})` for
/// `0 <= l <= l0`, where `side(S) = e^{-lambda + (l0 + 2) r'}`, plus the tail and
/// the diluted boxes `8 h_l z + [0, h_l]^{d-1} x T_l`, `h_l = e^{-lambda + (l+1) r'}`.
pub fn layer_regions<F: Real>(regime: &Regime<F>, block: &Region<F>) -> Result<LayerRegions<F>> {
    if block.dim() != regime.d {
        return Err(Error::usage("block dimension differs from regime"));
    }
    let side = block
        .lo
        .iter()
        .zip(&block.hi)
        .map(|(&a, &b)| b - a)
        .fold(F::infinity(), F::min);
    let span = side.ln() + regime.lambda;
    let r = regime.r_s0;
    if !(span > F::zero()) || !(r > F::zero()) {
        return Err(Error::regime("block side must exceed the window floor and r(s0) > 0"));
    }
    let l0 = ((span / r).floor().to_usize().unwrap_or(0)).saturating_sub(2).max(1);
    let r_prime = span / F::lit((l0 + 2) as f64);
    let level = |l: usize| (-regime.lambda + r_prime * F::lit(l as f64)).exp();
    let mut layers = Vec::with_capacity(l0 + 1);
    let mut diluted = Vec::with_capacity(l0 + 1);
    for l in 0..=l0 {
        let (y_lo, y_hi) = (level(l), level(l + 1));
        layers.push(Region::new(block.lo.clone(), block.hi.clone(), y_lo, Ceiling::Finite(y_hi))?);
        let h = level(l + 1);
        let step = F::lit(8.0) * h;
        let per_axis: Vec<usize> = block
            .lo
            .iter()
            .zip(&block.hi)
            .map(|(&a, &b)| {
                let fit = ((b - a - h) / step).floor();
                if fit < F::zero() {
                    0
                } else {
                    fit.to_usize().unwrap_or(0) + 1
                }
            })
            .collect();
        let total: usize = per_axis.iter().product();
        let mut family = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rest = idx;
            let mut lo = Vec::with_capacity(per_axis.len());
            let mut hi = Vec::with_capacity(per_axis.len());
            for (a, &m) in per_axis.iter().enumerate() {
                let z = rest % m;
                rest /= m;
                let start = block.lo[a] + step * F::lit(z as f64);
                lo.push(start);
                hi.push((start + h).min(block.hi[a]));
            }
            family.push(Region::new(lo, hi, y_lo, Ceiling::Finite(y_hi))?);
        }
        diluted.push(family);
    }
    let tail = Region::new(block.lo.clone(), block.hi.clone(), level(l0 + 1), Ceiling::Unbounded)?;
    Ok(LayerRegions {
        r_prime,
        l0,
        layers,
        tail,
        diluted,
    })
}
