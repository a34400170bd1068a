//! Poisson sampling with intensity `y^{-d} dx dy` on product regions, and the
//! adaptive exterior extension used to get boundary-correct kNN radii.
//!
//! A window such as `[0,1]^{d-1} x [e^{-lambda}, inf)` has no finite
//! hyperbolic neighbourhood: the horizontal padding `y sinh r` needed at
//! height `y` makes the dilated volume diverge. Instead the interior is
//! sampled first and the exterior is then sampled on the (finite) union of
//! ball bounding boxes around the realized interior points. The union is a
//! function of the interior only and the exterior is independent of it, so
//! interior plus exterior agree in law with the global process on
//! `W` together with that union.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgeom::{ball_bbox, BallSpec, Ceiling, HPoint, Region};
use crate::real::Real;
use crate::rng::RngStream;

/// Finite simple point configuration with region provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PointConfig<F: Real = f64> {
    dim: usize,
    /// Row-major: `x_1 .. x_{d-1}, y` per point.
    coords: Vec<F>,
    region_ids: Vec<u32>,
    regions: Vec<Region<F>>,
    seed_path: Vec<u64>,
}

impl<F: Real> PointConfig<F> {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            region_ids: Vec::new(),
            regions: Vec::new(),
            seed_path: Vec::new(),
        }
    }

    /// Builds a configuration from explicit points, validating containment and simplicity.
    pub fn from_points(region: Region<F>, points: &[HPoint<F>]) -> Result<Self> {
        let dim = region.dim();
        let mut out = Self::empty(dim);
        out.regions.push(region);
        let mut seen: HashMap<u64, Vec<u32>> = HashMap::new();
        for p in points {
            if p.dim() != dim {
                return Err(Error::usage("point dimension does not match region"));
            }
            if !out.regions[0].contains_point(p) {
                return Err(Error::usage("point lies outside the configuration's region"));
            }
            let key = p.y.as_f64().to_bits();
            if let Some(same_y) = seen.get(&key) {
                if same_y.iter().any(|&j| out.x(j as usize) == p.x.as_slice()) {
                    return Err(Error::usage("duplicate point in configuration"));
                }
            }
            seen.entry(key).or_default().push(out.len() as u32);
            out.push_raw(&p.x, p.y, 0);
        }
        Ok(out)
    }

    fn push_raw(&mut self, x: &[F], y: F, region_id: u32) {
        self.coords.extend_from_slice(x);
        self.coords.push(y);
        self.region_ids.push(region_id);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[F] {
        &self.coords[i * self.dim..i * self.dim + self.dim - 1]
    }

    #[inline]
    pub fn y(&self, i: usize) -> F {
        self.coords[i * self.dim + self.dim - 1]
    }

    pub fn point(&self, i: usize) -> HPoint<F> {
        HPoint {
            x: self.x(i).to_vec(),
            y: self.y(i),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = HPoint<F>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn region_id(&self, i: usize) -> u32 {
        self.region_ids[i]
    }

    pub fn regions(&self) -> &[Region<F>] {
        &self.regions
    }

    /// The sampled domain when the configuration comes from a single region.
    pub fn source(&self) -> Option<&Region<F>> {
        match self.regions.as_slice() {
            [r] => Some(r),
            _ => None,
        }
    }

    pub fn seed_path(&self) -> &[u64] {
        &self.seed_path
    }

    pub fn raw_coords(&self) -> &[F] {
        &self.coords
    }

    /// Sub-configuration of the atoms accepted by `keep`; provenance is retained.
    pub fn filtered(&self, mut keep: impl FnMut(&[F], F) -> bool) -> Self {
        let mut out = Self {
            dim: self.dim,
            coords: Vec::new(),
            region_ids: Vec::new(),
            regions: self.regions.clone(),
            seed_path: self.seed_path.clone(),
        };
        for i in 0..self.len() {
            if keep(self.x(i), self.y(i)) {
                out.push_raw(self.x(i), self.y(i), self.region_ids[i]);
            }
        }
        out
    }

    /// Union of two configurations over disjoint regions.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::usage("cannot merge configurations of different dimension"));
        }
        let mut out = self.clone();
        let shift = out.regions.len() as u32;
        out.regions.extend(other.regions.iter().cloned());
        out.coords.extend_from_slice(&other.coords);
        out.region_ids.extend(other.region_ids.iter().map(|r| r + shift));
        Ok(out)
    }

    pub(crate) fn from_raw(
        dim: usize,
        coords: Vec<F>,
        region_ids: Vec<u32>,
        regions: Vec<Region<F>>,
        seed_path: Vec<u64>,
    ) -> Result<Self> {
        if dim < 2 || coords.len() != region_ids.len() * dim {
            return Err(Error::Format("coordinate block does not match point count".into()));
        }
        Ok(Self {
            dim,
            coords,
            region_ids,
            regions,
            seed_path,
        })
    }
}

#[inline]
fn open01<F: Real, R: Rng + ?Sized>(rng: &mut R) -> F {
    let u: f64 = Open01.sample(rng);
    F::lit(u)
}

/// Height by inverse CDF of the density proportional to `y^{-d}` on `[y_lo, y_hi)`.
#[inline]
pub fn height_from_uniform<F: Real>(u: F, y_lo: F, y_hi: Ceiling<F>, d: usize) -> F {
    let p = F::lit((d - 1) as f64);
    let ratio = match y_hi {
        Ceiling::Finite(top) => (y_lo / top).powf(p),
        Ceiling::Unbounded => F::zero(),
    };
    let y = y_lo * (F::one() - u * (F::one() - ratio)).powf(-F::one() / p);
    match y_hi {
        Ceiling::Finite(top) => y.max(y_lo).min(top),
        Ceiling::Unbounded => y.max(y_lo),
    }
}

fn draw_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::domain(format!("region volume must be finite, got {mean}")));
    }
    let dist = Poisson::new(mean).map_err(|e| Error::domain(format!("poisson mean {mean}: {e}")))?;
    let n: f64 = dist.sample(rng);
    Ok(n as u64)
}

struct Filler<F: Real> {
    cfg: PointConfig<F>,
    by_height: HashMap<u64, Vec<u32>>,
}

impl<F: Real> Filler<F> {
    fn new(dim: usize, seed_path: Vec<u64>) -> Self {
        let mut cfg = PointConfig::empty(dim);
        cfg.seed_path = seed_path;
        Self {
            cfg,
            by_height: HashMap::new(),
        }
    }

    fn fill<R: Rng + ?Sized>(&mut self, region: &Region<F>, rng: &mut R) -> Result<()> {
        let d = self.cfg.dim;
        let id = self.cfg.regions.len() as u32;
        self.cfg.regions.push(region.clone());
        let n = draw_count(region.volume().as_f64(), rng)?;
        let mut x = vec![F::zero(); d - 1];
        let mut placed = 0;
        while placed < n {
            for (i, xi) in x.iter_mut().enumerate() {
                let (a, b) = (region.lo[i], region.hi[i]);
                *xi = (a + open01::<F, _>(rng) * (b - a)).min(b);
            }
            let y = height_from_uniform(open01(rng), region.y_lo, region.y_hi, d);
            let key = y.as_f64().to_bits();
            if let Some(same) = self.by_height.get(&key) {
                if same.iter().any(|&j| self.cfg.x(j as usize) == x.as_slice()) {
                    // Exact collision: redraw so the configuration stays simple.
                    continue;
                }
            }
            self.by_height.entry(key).or_default().push(self.cfg.len() as u32);
            self.cfg.push_raw(&x, y, id);
            placed += 1;
        }
        Ok(())
    }
}

/// Poisson process with hyperbolic-volume intensity on `region`.
pub fn sample_region<F: Real>(region: &Region<F>, d: usize, stream: &RngStream) -> Result<PointConfig<F>> {
    if region.dim() != d {
        return Err(Error::usage(format!("region dimension {} != {d}", region.dim())));
    }
    let mut filler = Filler::new(d, stream.path.clone());
    filler.fill(region, &mut stream.rng())?;
    Ok(filler.cfg)
}

/// Independent Poisson processes on each of a family of disjoint regions,
/// drawn sequentially from one stream.
pub fn sample_regions<F: Real>(regions: &[Region<F>], d: usize, stream: &RngStream) -> Result<PointConfig<F>> {
    let mut filler = Filler::new(d, stream.path.clone());
    let mut rng = stream.rng();
    for region in regions {
        if region.dim() != d {
            return Err(Error::usage("region dimension mismatch"));
        }
        filler.fill(region, &mut rng)?;
    }
    Ok(filler.cfg)
}

/// Disjoint regions covering the union of the balls' bounding boxes minus the window.
///
/// Recursive sweep: slabs along each horizontal axis between consecutive box
/// endpoints, then the union of height intervals of the boxes active in the
/// slab, with the window's height range removed where the slab lies inside
/// the window horizontally.
pub fn cover_outside<F: Real>(window: &Region<F>, boxes: &[Region<F>]) -> Vec<Region<F>> {
    let d = window.dim();
    let finite: Vec<&Region<F>> = boxes
        .iter()
        .filter(|b| b.dim() == d && b.horizontal_measure() > F::zero())
        .filter(|b| b.y_hi.finite().is_some_and(|t| t > b.y_lo))
        .collect();
    let mut out = Vec::new();
    if finite.is_empty() {
        return out;
    }
    let mut lo = Vec::with_capacity(d - 1);
    let mut hi = Vec::with_capacity(d - 1);
    sweep(&finite, 0, window, true, &mut lo, &mut hi, &mut out);
    out
}

fn sweep<F: Real>(
    boxes: &[&Region<F>],
    axis: usize,
    window: &Region<F>,
    inside: bool,
    lo: &mut Vec<F>,
    hi: &mut Vec<F>,
    out: &mut Vec<Region<F>>,
) {
    let hdim = window.dim() - 1;
    if axis == hdim {
        let mut iv: Vec<(F, F)> = boxes
            .iter()
            .map(|b| (b.y_lo, b.y_hi.finite().expect("finite box")))
            .collect();
        iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(F, F)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        for (a, b) in merged {
            let top = if inside { b.min(window.y_lo) } else { b };
            if top > a {
                out.push(Region {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    y_lo: a,
                    y_hi: Ceiling::Finite(top),
                });
            }
            if !inside {
                continue;
            }
            // Part above the window ceiling, if the window is bounded.
            if let Ceiling::Finite(wtop) = window.y_hi {
                let start = a.max(wtop);
                if b > start {
                    out.push(Region {
                        lo: lo.clone(),
                        hi: hi.clone(),
                        y_lo: start,
                        y_hi: Ceiling::Finite(b),
                    });
                }
            }
        }
        return;
    }
    let mut cuts: Vec<F> = Vec::with_capacity(2 * boxes.len() + 2);
    for b in boxes {
        cuts.push(b.lo[axis]);
        cuts.push(b.hi[axis]);
    }
    let first = cuts.iter().copied().fold(F::infinity(), F::min);
    let last = cuts.iter().copied().fold(F::neg_infinity(), F::max);
    for c in [window.lo[axis], window.hi[axis]] {
        if c > first && c < last {
            cuts.push(c);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut order: Vec<&Region<F>> = boxes.to_vec();
    order.sort_by(|a, b| a.lo[axis].partial_cmp(&b.lo[axis]).unwrap());
    let mut next = 0;
    let mut active: Vec<&Region<F>> = Vec::new();
    for pair in cuts.windows(2) {
        let (c0, c1) = (pair[0], pair[1]);
        while next < order.len() && order[next].lo[axis] <= c0 {
            active.push(order[next]);
            next += 1;
        }
        active.retain(|b| b.hi[axis] > c0);
        if active.is_empty() {
            continue;
        }
        let slab_inside = inside && window.lo[axis] <= c0 && c1 <= window.hi[axis];
        lo.push(c0);
        hi.push(c1);
        sweep(&active, axis + 1, window, slab_inside, lo, hi, out);
        lo.pop();
        hi.pop();
    }
}

/// Disjoint regions, disjoint from `window`, covering the bounding boxes of
/// radius-`r_max` balls around every anchor, minus the window.
pub fn dilation_regions<F: Real>(
    window: &Region<F>,
    r_max: F,
    d: usize,
    anchors: &PointConfig<F>,
) -> Result<Vec<Region<F>>> {
    if window.dim() != d || (!anchors.is_empty() && anchors.dim() != d) {
        return Err(Error::usage("dimension mismatch in dilation"));
    }
    if !(r_max >= F::zero()) {
        return Err(Error::domain("r_max must be nonnegative"));
    }
    let boxes: Vec<Region<F>> = anchors
        .points()
        .map(|c| ball_bbox(&BallSpec { center: c, radius: r_max }))
        .collect();
    Ok(cover_outside(window, &boxes))
}

/// Exterior sample on the union of the given balls' bounding boxes minus the window.
pub fn sample_exterior<F: Real>(
    window: &Region<F>,
    balls: &[BallSpec<F>],
    stream: &RngStream,
) -> Result<PointConfig<F>> {
    let boxes: Vec<Region<F>> = balls.iter().map(ball_bbox).collect();
    let regions = cover_outside(window, &boxes);
    sample_regions(&regions, window.dim(), stream)
}

/// Interior sample on `window` plus the exterior needed for radii up to `r_max`.
///
/// Substreams: `child(0)` for the interior, `child(1)` for the exterior.
pub fn sample_extended<F: Real>(
    window: &Region<F>,
    r_max: F,
    d: usize,
    stream: &RngStream,
) -> Result<(PointConfig<F>, PointConfig<F>)> {
    let interior = sample_region(window, d, &stream.child(0))?;
    let regions = dilation_regions(window, r_max, d, &interior)?;
    let exterior = sample_regions(&regions, d, &stream.child(1))?;
    Ok((interior, exterior))
}
