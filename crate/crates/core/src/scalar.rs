//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type Complex<T> = num_complex::Complex<T>;

/// Numerically stable running `log(sum(exp(t_i)))`.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp<T> {
    max: T,
    scaled: T,
}

impl<T: Real> Default for LogSumExp<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> LogSumExp<T> {
    pub fn new() -> Self {
        Self {
            max: T::neg_infinity(),
            scaled: T::zero(),
        }
    }

    pub fn push(&mut self, log_term: T) {
        if log_term == T::neg_infinity() {
            return;
        }
        if log_term > self.max {
            self.scaled = self.scaled * (self.max - log_term).exp() + T::one();
            self.max = log_term;
        } else {
            self.scaled += (log_term - self.max).exp();
        }
    }

    /// Current value of the logarithm of the accumulated sum.
    pub fn value(&self) -> T {
        if self.scaled == T::zero() {
            T::neg_infinity()
        } else {
            self.max + self.scaled.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct_sum() {
        let terms = [0.5f64, -3.0, 2.0, 700.0, 699.0];
        let mut acc = LogSumExp::new();
        for t in terms {
            acc.push(t);
        }
        let expected = 700.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((acc.value() - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_logsumexp_is_neg_infinity() {
        let acc = LogSumExp::<f32>::new();
        assert_eq!(acc.value(), f32::NEG_INFINITY);
    }
}
