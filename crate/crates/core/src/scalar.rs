use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric kernels are generic over (f32 or f64).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from f64, used for tolerances and file data.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    /// Lossy conversion to f64, used for reports and error payloads.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Shorthand for `T::from_f64_lossy`.
pub(crate) fn sc<T: Scalar>(x: f64) -> T {
    T::from_f64_lossy(x)
}
