//! Layered grid index for hyperbolic ball queries in the half-space model.
//!
//! Heights are cut into geometric layers `[b e^{j rho}, b e^{(j+1) rho})`.
//! Each layer carries a uniform horizontal grid whose cell side scales with
//! the layer's base height, so a ball query touches a bounded number of cells
//! per layer. Queries enumerate a superset of the ball (its exact bounding
//! box, slightly inflated) and callers filter by the exact gap key.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::hypgeom::{gap, gap_from_dist};
use crate::real::Real;
use crate::sampler::PointConfig;

const INFLATE: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Layer<F: Real> {
    origin: Vec<F>,
    side: F,
    dims: Vec<usize>,
    /// Offsets into the point arrays, one per cell plus a terminator.
    cell_start: Vec<u32>,
}

/// Read-only spatial index over one point configuration.
#[derive(Debug, Clone)]
pub struct LayeredIndex<F: Real = f64> {
    hdim: usize,
    base: F,
    rho: F,
    layers: Vec<Layer<F>>,
    xs: Vec<F>,
    ys: Vec<F>,
    ids: Vec<u32>,
}

impl<F: Real> LayeredIndex<F> {
    /// Indexes `config`; reported ids are `id_offset + position in config`.
    pub fn build(config: &PointConfig<F>, id_offset: u32, rho: F) -> Result<Self> {
        if !(rho > F::zero()) || !rho.is_finite() {
            return Err(Error::domain("layer ratio must be positive and finite"));
        }
        let hdim = config.dim() - 1;
        let n = config.len();
        if n == 0 {
            return Ok(Self {
                hdim,
                base: F::one(),
                rho,
                layers: Vec::new(),
                xs: Vec::new(),
                ys: Vec::new(),
                ids: Vec::new(),
            });
        }
        let base = (0..n).map(|i| config.y(i)).fold(F::infinity(), F::min);
        let layer_of = |y: F| -> usize { ((y / base).ln() / rho).floor().to_usize().unwrap_or(0) };
        let n_layers = (0..n).map(|i| layer_of(config.y(i))).max().unwrap_or(0) + 1;

        let mut by_layer: Vec<Vec<u32>> = vec![Vec::new(); n_layers];
        for i in 0..n {
            by_layer[layer_of(config.y(i))].push(i as u32);
        }

        let mut xs = Vec::with_capacity(n * hdim);
        let mut ys = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        let mut layers = Vec::with_capacity(n_layers);
        for (j, members) in by_layer.iter().enumerate() {
            let layer_base = base * (rho * F::lit(j as f64)).exp();
            let mut origin = vec![F::infinity(); hdim];
            let mut top = vec![F::neg_infinity(); hdim];
            for &i in members {
                for (a, &c) in config.x(i as usize).iter().enumerate() {
                    origin[a] = origin[a].min(c);
                    top[a] = top[a].max(c);
                }
            }
            if members.is_empty() {
                origin.fill(F::zero());
                top.fill(F::zero());
            }
            let budget = 2 * members.len() + 16;
            let mut side = layer_base * rho.sinh();
            let dims = loop {
                let dims: Vec<usize> = origin
                    .iter()
                    .zip(&top)
                    .map(|(&a, &b)| ((b - a) / side).floor().to_usize().unwrap_or(usize::MAX / 4) + 1)
                    .collect();
                let cells = dims.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m));
                match cells {
                    Some(c) if c <= budget => break dims,
                    _ => {
                        let c = dims.iter().fold(1.0f64, |acc, &m| acc * m as f64);
                        let grow = (c / budget as f64).powf(1.0 / hdim as f64).max(1.5);
                        side = side * F::lit(grow);
                    }
                }
            };
            let strides = strides(&dims);
            let n_cells: usize = dims.iter().product();
            let cell_of = |x: &[F]| -> usize {
                x.iter()
                    .enumerate()
                    .map(|(a, &c)| {
                        let t = ((c - origin[a]) / side).floor().to_usize().unwrap_or(0);
                        t.min(dims[a] - 1) * strides[a]
                    })
                    .sum()
            };
            let mut counts = vec![0u32; n_cells + 1];
            let cells: Vec<usize> = members.iter().map(|&i| cell_of(config.x(i as usize))).collect();
            for &c in &cells {
                counts[c + 1] += 1;
            }
            for c in 0..n_cells {
                counts[c + 1] += counts[c];
            }
            let start = ids.len() as u32;
            let mut order: Vec<(usize, u32)> = cells.into_iter().zip(members.iter().copied()).collect();
            order.sort_unstable();
            for (_, i) in order {
                xs.extend_from_slice(config.x(i as usize));
                ys.push(config.y(i as usize));
                ids.push(id_offset + i);
            }
            layers.push(Layer {
                origin,
                side,
                dims,
                cell_start: counts.into_iter().map(|c| c + start).collect(),
            });
        }
        Ok(Self {
            hdim,
            base,
            rho,
            layers,
            xs,
            ys,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn layer_index(&self, y: F) -> Option<isize> {
        if !(y > F::zero()) {
            return None;
        }
        ((y / self.base).ln() / self.rho).floor().to_isize()
    }

    /// Visits every indexed point whose coordinates could lie in `B_r((x, y))`.
    ///
    /// The candidate set is a superset; exact filtering is the caller's job.
    pub fn visit_ball<V>(&self, x: &[F], y: F, r: F, mut visit: V) -> ControlFlow<()>
    where
        V: FnMut(u32, &[F], F) -> ControlFlow<()>,
    {
        if self.layers.is_empty() {
            return ControlFlow::Continue(());
        }
        let slack = F::lit(INFLATE);
        let y_lo = y * (-r).exp() * (F::one() - slack);
        let y_hi = y * r.exp() * (F::one() + slack);
        let last = self.layers.len() as isize - 1;
        let j_lo = self.layer_index(y_lo).unwrap_or(0).max(0);
        let j_hi = match self.layer_index(y_hi) {
            Some(j) if j >= 0 => j.min(last),
            _ => return ControlFlow::Continue(()),
        };
        let scale = x.iter().fold(F::one(), |m, c| m.max(c.abs()));
        let half = y * r.sinh() * (F::one() + slack) + F::epsilon() * F::lit(8.0) * scale;
        let mut lo = vec![0usize; self.hdim];
        let mut hi = vec![0usize; self.hdim];
        'layers: for j in j_lo..=j_hi {
            let layer = &self.layers[j as usize];
            for a in 0..self.hdim {
                let a_lo = ((x[a] - half - layer.origin[a]) / layer.side).floor();
                let a_hi = ((x[a] + half - layer.origin[a]) / layer.side).floor();
                let m = layer.dims[a] as f64;
                let (a_lo, a_hi) = (a_lo.as_f64(), a_hi.as_f64());
                if a_hi < 0.0 || a_lo >= m {
                    continue 'layers;
                }
                lo[a] = a_lo.max(0.0) as usize;
                hi[a] = a_hi.min(m - 1.0) as usize;
            }
            let strides = strides(&layer.dims);
            let mut cur = lo.clone();
            loop {
                let cell: usize = cur.iter().zip(&strides).map(|(c, s)| c * s).sum();
                let (s, e) = (layer.cell_start[cell] as usize, layer.cell_start[cell + 1] as usize);
                for p in s..e {
                    let px = &self.xs[p * self.hdim..(p + 1) * self.hdim];
                    visit(self.ids[p], px, self.ys[p])?;
                }
                // Odometer over the cell box.
                let mut a = 0;
                loop {
                    if a == self.hdim {
                        continue 'layers;
                    }
                    if cur[a] < hi[a] {
                        cur[a] += 1;
                        break;
                    }
                    cur[a] = lo[a];
                    a += 1;
                }
            }
        }
        ControlFlow::Continue(())
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len());
    let mut acc = 1;
    for &m in dims {
        out.push(acc);
        acc *= m;
    }
    out
}

/// Number of accepted points with gap key at most `gap_max` around `(x, y)`,
/// stopping once `limit` is reached.
pub fn count_within<F: Real>(
    indexes: &[&LayeredIndex<F>],
    x: &[F],
    y: F,
    r: F,
    limit: usize,
    accept: impl Fn(u32) -> bool,
) -> usize {
    let gap_max = gap_from_dist(r);
    let mut count = 0;
    for index in indexes {
        let flow = index.visit_ball(x, y, r, |id, px, py| {
            if gap(x, y, px, py) <= gap_max && accept(id) {
                count += 1;
                if count >= limit {
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        });
        if flow.is_break() {
            break;
        }
    }
    count
}

/// Gap key of the `k`-th nearest accepted point, or `None` if fewer than `k`
/// accepted points lie within `r_cap`.
///
/// The search radius starts at `r_start` and grows until it reaches `r_cap`.
pub fn kth_gap<F: Real>(
    indexes: &[&LayeredIndex<F>],
    x: &[F],
    y: F,
    k: usize,
    r_start: F,
    r_cap: F,
    accept: impl Fn(u32) -> bool,
) -> Option<F> {
    let mut r = r_start.min(r_cap).max(F::zero());
    let mut found: Vec<F> = Vec::new();
    loop {
        let gap_max = gap_from_dist(r);
        found.clear();
        for index in indexes {
            let _ = index.visit_ball(x, y, r, |id, px, py| {
                let g = gap(x, y, px, py);
                if g <= gap_max && accept(id) {
                    found.push(g);
                }
                ControlFlow::Continue(())
            });
        }
        if found.len() >= k {
            let (_, kth, _) = found.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
            return Some(*kth);
        }
        if r >= r_cap {
            return None;
        }
        r = (r * F::lit(1.5) + F::lit(0.1)).min(r_cap);
    }
}
