#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod harness;
pub mod pdecheck;
pub mod planar;
pub mod rates;
pub mod specfun;
pub mod telegraph;

pub use error::{Error, Result};
