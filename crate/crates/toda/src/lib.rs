//! Variational solver and diagnostics for the mean-field Toda system on the unit flat torus.

pub mod blowup;
pub mod bounds;
pub mod error;
pub mod fields;
pub mod functional;
pub mod geometry;
pub mod solver;

pub use error::{Result, TodaError};
