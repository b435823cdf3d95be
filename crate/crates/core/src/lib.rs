//! Boundary-cancellation quantum annealing simulator.
//!
//! The crate builds transverse-field Ising Hamiltonians driven by control
//! schedules, evolves the adiabatic (Davies) master equation, locates
//! freezing points from thermal transition rates and fits adiabatic-error
//! scaling exponents.
//!
//! Energies and rates are angular frequencies in rad/ns with `ħ = 1`; times
//! are in ns.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod evolve;
pub mod io;
pub mod lindblad;
pub mod model;
pub mod ops;
pub mod schedule;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
