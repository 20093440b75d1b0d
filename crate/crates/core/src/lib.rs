//! Numerical laboratory for the singularly perturbed problem
//! `-ε²Δu + u = u^{p-1}` on flat good orbifolds `T^n / G`.

pub mod concentration;
pub mod error;
pub mod experiment;
pub mod field;
pub mod geometry;
pub mod ground_state;
mod par;
pub mod report;
pub mod variational;

pub use error::{Error, Result};
