//! Scalar abstraction for strengths, energies and weights.
//!
//! The argumentation math only needs ordered field operations plus a few
//! float conveniences, so everything in [`crate::semantics`] and
//! [`crate::clash`] is written against [`Scalar`]. `f64` is the working
//! precision of the pipeline; `f32` is supported for embedding the
//! semantics in memory-constrained callers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable for strengths and energies.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + Serialize + DeserializeOwned + 'static {
    /// Converts a literal. Panics only if the literal is not representable,
    /// which never happens for the constants used in this crate.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    /// Clamps into the closed unit interval.
    #[inline]
    fn clamp_unit(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }

    #[inline]
    fn in_unit(self) -> bool {
        self >= Self::zero() && self <= Self::one()
    }

    /// Widens to `f64` for reporting.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
