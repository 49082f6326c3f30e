//! Phase-space simulation of k-local transverse-field Ising dynamics.
//!
//! An ensemble of mean-field trajectories, each started from a biased
//! Rademacher sample of a product state, approximates the quantum evolution
//! of one- and few-qubit observables. An exact statevector propagator for
//! small registers provides the reference.

pub mod analysis;
pub mod config;
pub mod density;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod runner;
pub mod sampling;

pub use error::{Error, Result};
