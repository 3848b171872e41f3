//! Numeric abstraction shared by similarity scores, thresholds and metrics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type used for embeddings, cosine scores and thresholds.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumCast
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Tolerance used when checking that a vector has unit norm.
    fn unit_norm_tolerance() -> Self {
        let eps = Self::epsilon() * Self::from_f64(16.0).unwrap();
        let floor = Self::from_f64(1e-6).unwrap();
        if eps > floor {
            eps
        } else {
            floor
        }
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numeric type for precision/recall/F1. Implemented for floats and for exact
/// rationals so metric oracles can be compared without tolerance.
pub trait MetricScalar: Clone + PartialEq + PartialOrd + Debug + Send + Sync + 'static {
    fn from_count(n: usize) -> Self;
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn to_f64(&self) -> f64;
}

macro_rules! float_metric {
    ($t:ty) => {
        impl MetricScalar for $t {
            fn from_count(n: usize) -> Self {
                n as $t
            }
            fn zero() -> Self {
                0.0
            }
            fn one() -> Self {
                1.0
            }
            fn add(&self, other: &Self) -> Self {
                self + other
            }
            fn mul(&self, other: &Self) -> Self {
                self * other
            }
            fn div(&self, other: &Self) -> Self {
                self / other
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_metric!(f32);
float_metric!(f64);

impl MetricScalar for num_rational::Rational64 {
    fn from_count(n: usize) -> Self {
        num_rational::Rational64::from_integer(n as i64)
    }
    fn zero() -> Self {
        num_rational::Rational64::from_integer(0)
    }
    fn one() -> Self {
        num_rational::Rational64::from_integer(1)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
