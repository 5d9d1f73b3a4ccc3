pub mod bench;
pub mod deviation;
pub mod error;
pub mod fusion;
pub mod geodata;
pub mod kb;
pub mod pipeline;
pub mod prefopt;
pub mod spectral;
pub mod structural;

pub use error::{Error, Result};
