use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for utilities, probabilities and estimates.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant. Never fails for the floating point types.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
