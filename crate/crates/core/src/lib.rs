//! Simulation and verification of a generalized two-party quantum scheduling
//! algorithm on a two-spin NMR register.
//!
//! * [`linalg`]: dense operators, states, density matrices, phase-aware equality.
//! * [`gates`]: rotations, coupled evolution, Walsh-Hadamard, selective phases.
//! * [`scheduling`]: amplifier composites and end-to-end runs on schedules.
//! * [`nmr`]: pulse sequences, their simulation, compilation and optimization.
//! * [`tomography`]: deviation matrices, readout simulation, reconstruction, error metrics.
//! * [`protocol`]: Alice/Bob event-level simulation with exchange accounting.
//! * [`scenario`]: scenario descriptors and the built-in experiment scenarios.

pub mod error;
pub mod gates;
pub mod linalg;
pub mod nmr;
pub mod protocol;
pub mod scenario;
pub mod scheduling;
pub mod tomography;

pub use error::{Error, Result};
