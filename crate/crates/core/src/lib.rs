//! Simulation and verification tools for sequential empirical processes
//! indexed by time and by a function class, over nonstationary triangular
//! arrays.

pub mod arrays;
pub mod bracketing;
pub mod diagnostics;
pub mod error;
pub mod fclasses;
pub mod growth;
pub mod process;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
