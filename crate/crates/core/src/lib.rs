pub mod cli;
pub mod complexity;
pub mod data;
pub mod dvm;
pub mod error;
pub mod fft;
pub mod net;
pub mod ops;
pub mod phase;
pub mod recursive;
pub mod train;
pub mod verify;

pub use error::{Error, Result};

/// Crate name and version, embedded in every report.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
