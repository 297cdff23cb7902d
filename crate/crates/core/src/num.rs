//! Scalar abstraction shared by the statistics, scoring and labeling code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for ratios, thresholds, scores and label
/// probabilities. Implemented for `f32` and `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// `value` converted with a single rounding step.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to any Real")
    }

    /// `numerator / denominator` as one correctly rounded division.
    fn ratio(numerator: u64, denominator: u64) -> Self {
        let n = Self::from_u64(numerator).expect("u64 converts to any Real");
        let d = Self::from_u64(denominator).expect("u64 converts to any Real");
        n / d
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact count of marked pixels over a pixel area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelFraction {
    pub hits: u64,
    pub total: u64,
}

impl PixelFraction {
    pub fn new(hits: u64, total: u64) -> Self {
        debug_assert!(total > 0 && hits <= total);
        Self { hits, total }
    }

    /// The fraction as an exact rational, reduced.
    pub fn exact(&self) -> Ratio<u64> {
        Ratio::new(self.hits, self.total)
    }

    /// The fraction evaluated in `F`: integer counts, then one division.
    pub fn value<F: Real>(&self) -> F {
        F::ratio(self.hits, self.total)
    }
}

/// Sum in a fixed balanced-tree order, so the result depends only on the
/// slice contents and their order.
pub fn pairwise_sum<F: Real>(values: &[F]) -> F {
    match values.len() {
        0 => F::zero(),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (left, right) = values.split_at(n / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}
