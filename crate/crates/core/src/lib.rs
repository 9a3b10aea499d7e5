//! Simulation and numerical-optimization toolkit for studying how bounded
//! misalignment of qubit measurement bases degrades state tomography and
//! entanglement-witness certification.
//!
//! The crate is organized around five building blocks:
//!
//! - [`quantum`]: dense complex linear algebra on few-qubit operators
//!   (Bloch vectors, density matrices, fidelity, partial trace, ...).
//! - [`misalignment`]: intended vs. actual measurement frames with an
//!   angular deviation budget, plus the named deviation families.
//! - [`tomography`]: Born-rule statistics, linear inversion, iterative
//!   maximum-likelihood reconstruction, and the worst-case fidelity
//!   closed forms.
//! - [`witness`]: entanglement witnesses, their deformed effective
//!   observables and correction factors.
//! - [`optimizer`]: multi-start box-constrained quasi-Newton searches for
//!   worst-case fidelity and witness values.

pub mod misalignment;
pub mod optimizer;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod tomography;
pub mod witness;

pub use quantum::{BlochVector, DensityMatrix, PauliDecomposition, PureState};
