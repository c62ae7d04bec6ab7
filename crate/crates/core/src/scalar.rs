//! Floating-point abstraction shared by the simulator, the approximators and the agent.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the numeric core.
///
/// Configuration values are carried as `f64` and lifted with [`Scalar::lit`];
/// the persisted file formats always store `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Logistic sigmoid, evaluated in the numerically stable branch.
    #[inline]
    fn logistic(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_is_symmetric_and_bounded() {
        for &x in &[-800.0_f64, -3.0, 0.0, 2.5, 800.0] {
            let s = x.logistic();
            assert!((0.0..=1.0).contains(&s));
            assert!((s + (-x).logistic() - 1.0).abs() < 1e-15);
        }
        assert_eq!(0.0_f32.logistic(), 0.5);
    }
}
