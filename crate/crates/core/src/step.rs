use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Right-continuous step function on `[0, ∞)` with value 0 at time 0.
///
/// `values[k]` holds on `[breakpoints[k], breakpoints[k+1])`; past the last
/// breakpoint the last value holds.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::input("step function needs one value per breakpoint"));
        }
        if breakpoints[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::input("step function must start at (0, 0)"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::input(
                "step function breakpoints must be strictly increasing",
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn zero() -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![0.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    /// Linear interpolation between breakpoints, constant after the last one.
    pub fn eval_interpolated(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        if k == 0 {
            return 0.0;
        }
        if k == self.breakpoints.len() {
            return self.last_value();
        }
        let (a, b) = (self.breakpoints[k - 1], self.breakpoints[k]);
        let (fa, fb) = (self.values[k - 1], self.values[k]);
        fa + (fb - fa) * (t - a) / (b - a)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Two-column `breakpoint value` text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (b, v) in self.breakpoints.iter().zip(&self.values) {
            writeln!(s, "{b} {v}").expect("writing to a String");
        }
        s
    }
}

/// Accumulates increments at nondecreasing times into a [`StepFunction`].
#[derive(Debug)]
pub struct StepBuilder {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    acc: NeumaierSum,
}

impl Default for StepBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl StepBuilder {
    pub fn new() -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![0.0],
            acc: NeumaierSum::new(),
        }
    }

    /// Add `increment` at time `t`; `t` must not decrease between calls.
    #[inline]
    pub fn push(&mut self, t: f64, increment: f64) {
        self.acc += increment;
        let last = self.breakpoints.len() - 1;
        debug_assert!(t >= self.breakpoints[last]);
        if t == self.breakpoints[last] {
            self.values[last] = self.acc.value();
        } else {
            self.breakpoints.push(t);
            self.values.push(self.acc.value());
        }
    }

    pub fn finish(self) -> StepFunction {
        StepFunction {
            breakpoints: self.breakpoints,
            values: self.values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_continuous_evaluation() {
        let f = StepFunction::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(1.999), 1.0);
        assert_eq!(f.eval(7.0), 3.0);
        assert_eq!(f.eval_interpolated(1.5), 2.0);
        assert_eq!(f.eval_interpolated(9.0), 3.0);
        assert!(f.is_nondecreasing());
    }

    #[test]
    fn builder_merges_equal_times() {
        let mut b = StepBuilder::new();
        b.push(0.0, 0.0);
        b.push(0.5, 1.0);
        b.push(0.5, 2.0);
        b.push(1.0, 0.25);
        let f = b.finish();
        assert_eq!(f.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(f.values(), &[0.0, 3.0, 3.25]);
        assert_eq!(f.to_text(), "0 0\n0.5 3\n1 3.25\n");
    }

    #[test]
    fn rejects_malformed() {
        assert!(StepFunction::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(StepFunction::new(vec![0.1], vec![0.0]).is_err());
        assert!(StepFunction::new(vec![0.0], vec![1.0]).is_err());
    }
}
