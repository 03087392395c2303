// `!(x > 0.0)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod cli;
pub mod empirical;
pub mod error;
pub mod heatsim;
pub mod matdb;
pub mod perfmodel;
pub mod specfun;

pub use error::{Error, Result};
