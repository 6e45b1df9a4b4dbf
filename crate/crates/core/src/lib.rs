//! Hayashi–Yoshida type functionals of asynchronously observed bivariate
//! Itô semimartingales: exact simulation, observation schemes, functional
//! evaluation, scheme statistics, limit targets and a Monte Carlo driver.

// comparisons are written negated so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functionals;
pub mod harness;
pub mod limits;
pub mod model;
pub mod rng;
pub mod scheme_stats;
pub mod schemes;
pub mod step;
pub mod sum;

pub use error::{Error, Result};
