//! Simulator for nonreciprocal photon blockade in a quadratically coupled
//! whispering-gallery optomechanical system.
//!
//! The crate builds sparse operators on truncated Fock spaces, assembles the
//! effective pair-exchange Hamiltonian and its Lindblad generator, solves for
//! the steady state by direct sparse factorization, and evaluates directional
//! transmission, isolation and second-order photon correlations. A
//! closed-form dressed-state ladder predicts every resonance detuning, and a
//! sweep engine reproduces the transmission/correlation curves as CSV data.
//!
//! All rates are expressed in units of the optical damping rate `gamma_c`,
//! with `gamma_c = 1` internally.

pub mod dressed;
pub mod error;
pub mod fock;
pub mod liouvillian;
pub mod observables;
pub mod model;
pub mod sweep;

pub use error::{Error, Result};
