//! Numeric abstraction shared by densities, certificates and clique weightings.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, NumAssign, Signed, ToPrimitive};

/// Ordered field used for densities and weights.
///
/// Floating types give fast approximate arithmetic, the rational types make
/// equalities such as "every vertex sum is identical" literal assertions.
pub trait Scalar:
    'static + Clone + Debug + Display + PartialOrd + Num + NumAssign + Signed + ToPrimitive + Send + Sync
{
    /// The exact value `num / den`, rounded for floating types.
    fn from_ratio(num: i128, den: i128) -> Self;

    fn from_i128(v: i128) -> Self {
        Self::from_ratio(v, 1)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn from_ratio(num: i128, den: i128) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i128, den: i128) -> Self {
        num as f64 / den as f64
    }
}

impl Scalar for Ratio<i128> {
    fn from_ratio(num: i128, den: i128) -> Self {
        Ratio::new(num, den)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i128, den: i128) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}
