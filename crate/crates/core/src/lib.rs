// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ahba;
pub mod bench;
pub mod cones;
pub mod cubic;
pub mod error;
pub mod io;
pub mod kkt;
pub mod metric;
pub mod packed;
pub mod problem;
pub mod report;
pub mod sahba;
pub mod selftest;
mod serde_vec;

pub use error::{Error, Result, ValidationCode};
