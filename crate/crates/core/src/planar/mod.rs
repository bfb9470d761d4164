//! Planar motions with four orthogonal directions.

mod laws;
mod motion;
pub mod reflecting_series;
mod sampler;

pub use laws::*;
pub use motion::*;
pub use sampler::*;
