//! Replicate pipeline: one scene per replicate, all processes derived from it.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{sample_scene, sample_zeta, sample_zeta_block, AtomMeasure, BlockSet, BoundaryCounts};
use crate::error::Result;
use crate::limitlaw::Regime;
use crate::real::Real;
use crate::rng::RngStream;

/// Which derived quantities a replicate computes beyond `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outputs {
    pub eta: bool,
    pub eta_column: bool,
    pub counts: bool,
    pub zeta: bool,
}

impl Outputs {
    pub const ALL: Self = Self {
        eta: true,
        eta_column: true,
        counts: true,
        zeta: true,
    };
    pub const XI_ONLY: Self = Self {
        eta: false,
        eta_column: false,
        counts: false,
        zeta: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReplicateRecord<F: Real = f64> {
    pub replicate: u64,
    pub n_interior: usize,
    pub n_exterior: usize,
    pub xi: AtomMeasure<F>,
    pub eta: Option<Vec<AtomMeasure<F>>>,
    pub eta_column: Option<Vec<AtomMeasure<F>>>,
    pub counts: Option<BoundaryCounts>,
    pub zeta: Option<AtomMeasure<F>>,
    /// One independent single-block comparison process per block.
    pub zeta_blocks: Option<Vec<AtomMeasure<F>>>,
}

impl<F: Real> ReplicateRecord<F> {
    /// Sum of per-block measures.
    pub fn total(blocks: &[AtomMeasure<F>]) -> Option<AtomMeasure<F>> {
        let mut it = blocks.iter();
        let mut out = it.next()?.clone();
        for m in it {
            out.extend(m);
        }
        Some(out)
    }
}

/// Stream of replicate `r`: `(seed, [r])`; the scene uses `child(0)`, zeta `child(1)`
/// and the single-block zeta of block `m` uses `child(2).child(m)`.
pub fn replicate_stream(master_seed: u64, replicate: u64) -> RngStream {
    RngStream::new(master_seed).descend(&[replicate])
}

pub fn run_replicate<F: Real>(
    regime: &Regime<F>,
    blocks: &BlockSet<F>,
    master_seed: u64,
    replicate: u64,
    outputs: Outputs,
) -> Result<ReplicateRecord<F>> {
    let stream = replicate_stream(master_seed, replicate);
    let scene = sample_scene(regime, blocks, &stream.child(0))?;
    let xi = scene.xi()?;
    let eta = if outputs.eta { Some(scene.eta()?.1) } else { None };
    let eta_column = if outputs.eta_column {
        Some(scene.eta_column()?.1)
    } else {
        None
    };
    let counts = outputs.counts.then(|| scene.boundary_counts());
    let (zeta, zeta_blocks) = if outputs.zeta {
        let per_block = (0..blocks.count as u64)
            .map(|m| sample_zeta_block(regime, &stream.child(2).child(m)))
            .collect::<Result<Vec<_>>>()?;
        (Some(sample_zeta(regime, &stream.child(1))?), Some(per_block))
    } else {
        (None, None)
    };
    Ok(ReplicateRecord {
        replicate,
        n_interior: scene.interior().len(),
        n_exterior: scene.exterior().len(),
        xi,
        eta,
        eta_column,
        counts,
        zeta,
        zeta_blocks,
    })
}

/// Replicates in `range`, computed in parallel and returned in index order.
pub fn run_replicates<F: Real>(
    regime: &Regime<F>,
    blocks: &BlockSet<F>,
    master_seed: u64,
    range: Range<u64>,
    outputs: Outputs,
) -> Result<Vec<ReplicateRecord<F>>> {
    range
        .into_par_iter()
        .map(|r| run_replicate(regime, blocks, master_seed, r, outputs))
        .collect()
}
