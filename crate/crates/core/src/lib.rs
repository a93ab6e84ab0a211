//! Simulator and analysis toolkit for a two-qubit open quantum battery.
//!
//! The working medium is a pair of coupled qubits attached through a harmonic
//! oscillator to an Ohmic bath (open Rabi model). The crate provides two state
//! engines — an exact Krylov state-vector engine and an MPS/DMRG/TDVP engine —
//! together with the battery protocol (charge, store, extract), ergotropic
//! quantities, unitary-search strategies, and quasiprobability work statistics.

pub mod circuit;
pub mod ergotropy;
pub mod error;
pub mod exact;
pub mod io;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod optimize;
pub mod parallel;
pub mod protocol;
pub mod stats;

pub use error::{Error, Result};

/// Shorthand used throughout the crate.
pub type C64 = num_complex::Complex<f64>;
