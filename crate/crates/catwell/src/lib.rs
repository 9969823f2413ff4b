//! Double-well optomechanics toolkit: a suspended mirror in a symmetric
//! dual-cavity setup develops a radiation-pressure double-well potential
//! once the intracavity photon number crosses a critical value. This crate
//! computes that potential, the mirror's low-lying quantum spectrum and
//! derivative couplings, the maximal adiabatic ramp rate, the time-dependent
//! ramp dynamics by two independent methods, and the experimental
//! feasibility chain (coherence budgets, damping bounds, laser-power
//! requirements) for preparing a spatial cat state.
//!
//! Internally everything runs in the dimensionless frame where energies are
//! in units of ħΩ, lengths in zero-point units, and the system is pinned by
//! the triple (r = g/κ, δ = Δ/κ, λ = n/n_c).

pub mod cli;
pub mod emit;
pub mod error;
pub mod evolve;
pub mod params;
pub mod potential;
pub mod ramp;
pub mod spectrum;
pub mod tridiag;

pub use error::{CatwellError, Result};
