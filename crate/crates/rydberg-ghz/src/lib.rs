//! Off-resonant Rydberg passages for Bell and GHZ state preparation.
//!
//! The crate builds the driven three-level chain Hamiltonians, derives the
//! large-detuning effective model, synthesizes passage controls with the
//! λ-correction, and integrates the Lindblad master equation under noise
//! and systematic errors.

pub mod drive;
pub mod effective;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod lindblad;
pub mod noise;
pub mod passage;
pub mod protocol;
pub mod tensor;
pub mod units;

pub use error::{Error, Result};
