//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the geometry, sampling and scoring code is generic over.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Smallest relative tolerance iterative routines should ask for.
    const TOL_FLOOR: f64;

    /// Converts an `f64` literal. Panics only for values the type cannot hold at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f64 {
    const TOL_FLOOR: f64 = 4.0 * f64::EPSILON;
}

impl Real for f32 {
    const TOL_FLOOR: f64 = 16.0 * f32::EPSILON as f64;
}

/// `ln(n!)` for small integers, accumulated exactly in `f64`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}
