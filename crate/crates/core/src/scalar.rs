use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar the token math is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`.
    fn of(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 is representable in every Scalar")
    }

    /// Conversion from a count or index.
    fn of_usize(value: usize) -> Self {
        <Self as NumCast>::from(value).expect("usize is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Name used in the on-disk `dtype` field.
    fn dtype() -> &'static str;
}

impl Scalar for f32 {
    fn dtype() -> &'static str {
        "f32"
    }
}

impl Scalar for f64 {
    fn dtype() -> &'static str {
        "f64"
    }
}
