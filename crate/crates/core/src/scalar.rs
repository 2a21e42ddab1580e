//! Floating-point abstraction so the numeric core works for both `f32` and
//! `f64`. Concrete aliases live at the crate root; `f64` is the default for
//! every file format and CLI path.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type for labels, similarities, and edge weights.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + FromStr
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    fn cast(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 conversion")
    }

    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("f64 conversion")
    }

    /// Half of a value; used by the mutual-label mean.
    fn half(self) -> Self {
        self / (Self::one() + Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
