//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the synthesis and simulation code.
///
/// Implemented for `f32` and `f64`. Absolute tolerances throughout the crate
/// are written as `f64` literals and passed through [`Real::tol`], which
/// clamps them to a small multiple of machine epsilon so that the same
/// checks remain meaningful in single precision.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + std::iter::Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Converts a count or index into this scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }

    /// A tolerance of `x`, but never below 64 ulps at 1.0.
    fn tol(x: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        let t = Self::lit(x);
        if t > floor {
            t
        } else {
            floor
        }
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
