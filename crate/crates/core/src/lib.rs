//! In-region location verification: decide from channel attenuations
//! whether a transmitter lies inside a region of interest.

pub mod channel;
pub mod eda;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod io;
pub mod lssvm;
pub mod mlp;
pub mod nptest;
pub mod presets;
mod textfmt;

pub use error::{Error, Result};
