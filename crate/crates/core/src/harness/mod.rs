//! Monte Carlo and analytic validation battery.

mod battery;
pub mod binning;
pub mod stats;
pub mod streams;

pub use battery::*;
