//! Poisson processes in the hyperbolic half-space, kNN-ball exceedances and
//! their Poisson and large-deviation limits.
//!
//! Numeric code is generic over [`Real`] (`f64` and `f32`); the aliases below
//! fix the common `f64` instantiation.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocks;
pub mod error;
pub mod experiment;
pub mod hypgeom;
pub mod index;
pub mod io;
pub mod limitlaw;
pub mod nnscore;
pub mod quadrature;
pub mod real;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use real::Real;
pub use rng::RngStream;

pub type HPointF64 = hypgeom::HPoint<f64>;
pub type HPointF32 = hypgeom::HPoint<f32>;
pub type RegionF64 = hypgeom::Region<f64>;
pub type RegionF32 = hypgeom::Region<f32>;
pub type BallSpecF64 = hypgeom::BallSpec<f64>;
pub type PointConfigF64 = sampler::PointConfig<f64>;
pub type PointConfigF32 = sampler::PointConfig<f32>;
pub type RegimeF64 = limitlaw::Regime<f64>;
pub type RefMeasureF64 = limitlaw::RefMeasure<f64>;
pub type AtomMeasureF64 = blocks::AtomMeasure<f64>;
pub type BlockSetF64 = blocks::BlockSet<f64>;
pub type SceneF64 = blocks::Scene<f64>;
pub type ScoredPointF64 = nnscore::ScoredPoint<f64>;
