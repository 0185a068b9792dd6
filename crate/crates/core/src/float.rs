use ndarray::ScalarOperand;
use num_traits::{FromPrimitive, NumAssignOps, ToPrimitive};

/// Scalar type the solvers are generic over: `f32` or `f64`.
///
/// Everything numerical in this crate is written against this trait so that
/// the same code runs in single or double precision. The stated tolerances
/// of the test suites assume `f64`.
pub trait Float:
    num_traits::Float
    + NumAssignOps
    + FromPrimitive
    + ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from any primitive numeric type.
    fn cast<T: ToPrimitive>(t: T) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Float for f32 {
    #[inline]
    fn cast<T: ToPrimitive>(t: T) -> Self {
        t.to_f32().unwrap()
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    #[inline]
    fn cast<T: ToPrimitive>(t: T) -> Self {
        t.to_f64().unwrap()
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
