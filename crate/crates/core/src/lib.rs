//! Bukhgeim-type Faddeev functions and stationary-phase reconstruction for the
//! multi-channel Schroedinger inverse boundary problem on the unit disk.

pub mod banded;
pub mod cauchy;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod lab;
pub mod mu;
pub mod recon;

pub use error::{Error, Result};

/// Largest real exponent evaluated before reporting overflow.
pub const OVERFLOW_GUARD: f64 = 700.0;
