//! Spectral statistics of single-excitation dipolar Hamiltonians in frozen
//! Rydberg gases.
//!
//! Units throughout: density ρ = 1 and dipolar coupling β = 1, so a cloud of
//! `N` atoms is a ball of radius `(3N/4π)^{1/3}`.
//!
//! * [`cloud`]: random configurations with hard-sphere blockade.
//! * [`ensembles`]: the dipolar Hamiltonian and its surrogate ensembles.
//! * [`analytic`]: closed-form densities and reference laws.
//! * [`spectra`]: diagonalization, DOS, level spacings, transition energies.
//! * [`locator`]: self-consistent locator-expansion resolvents.
//! * [`campaign`]: parallel, seed-deterministic ensemble runs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod analytic;
pub mod campaign;
pub mod cloud;
pub mod ensembles;
pub mod error;
pub mod locator;
pub mod quad;
pub mod rng;
pub mod spectra;

pub use analytic::GeometryParams;
pub use cloud::{AtomCloud, CloudConfig};
pub use ensembles::{EnsembleKind, EnsembleSpec, SymmetricMatrix};
pub use error::{Error, Result};
pub use locator::{ResolventSolution, SolverSettings};
pub use num_complex::Complex64;
pub use spectra::{
    DosBinning, SpacingAccumulator, SpectrumAccumulator, TransitionResult, WindowSet,
};

/// Dipolar anisotropy prefactor `a = 27√3/(8π)`.
pub const A_COEF: f64 = 27.0 * 1.732_050_807_568_877_2 / (8.0 * std::f64::consts::PI);
