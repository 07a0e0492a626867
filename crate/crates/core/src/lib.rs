//! Exact state-vector and density-matrix simulation of a period-doubling
//! discrete time crystal built from two coupled spin-1/2 chains, used as a
//! probe for the amplitude of a gradient AC field.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: probe/field/initialisation parameters, basis encoding,
//!   diagonal observables and initial product states.
//! * [`floquet`]: per-cycle Floquet propagator (diagonal half plus disjoint
//!   pair gates) with exact propagation of the `h_a` derivative.
//! * [`metrology`]: quantum and classical Fisher information, averaging,
//!   power-law fits, transition finder and the analytic QFI bound.
//! * [`open_system`]: Lindblad evolution with local dephasing and the
//!   mixed-state Fisher quantities built on it.
//! * [`experiments`]: run configuration, figure recipes, parallel sweeps,
//!   table output and the experimental-units calculator.
//!
//! Energies are measured in units of the intra-chain coupling `J_z = 1`.

pub mod error;
pub mod experiments;
pub mod floquet;
pub mod linalg;
pub mod metrology;
pub mod model;
pub mod open_system;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
