//! Krylov complexity of operators evolving under closed and open (Lindblad) dynamics.

pub mod bilanczos;
pub mod bound;
pub mod chain;
pub mod continuum;
pub mod error;
pub mod filter;
pub mod lindblad;
pub mod matrix;
pub mod spin;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
