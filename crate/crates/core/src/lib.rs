//! Numerical laboratory for quantum dynamics at desk scale.
//!
//! The crate implements four dynamical schemes over shared state types:
//!
//! - unitary Schrodinger propagation on configuration-space grids
//!   (split-operator Fourier method) and for finite-dimensional models
//!   ([`evolver`]);
//! - Bohmian trajectory ensembles co-evolved with the wavefunction, with
//!   statistical equivariance checks ([`bohmian`]);
//! - spontaneous-localization (GRW-type) stochastic collapse dynamics,
//!   including the semigroup master equation as an independent cross-check
//!   ([`grw`]);
//! - environment-induced decoherence and the ensemble-ambiguity
//!   construction ([`decoherence`]), plus an imperfect-apparatus
//!   measurement model with pointer-sector geometry ([`measurement`]).
//!
//! All numerics are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the aliases below fix `f64` for the common case.
//! Internal units set hbar = 1; [`units`] converts to and from SI.

pub mod bohmian;
pub mod decoherence;
pub mod error;
pub mod evolver;
pub mod grw;
pub mod hilbert;
pub mod linalg;
pub mod measurement;
pub mod rng;
pub mod stats;
pub mod units;

mod real;

pub use error::{Error, Result};
pub use real::Real;

/// Complex number over a generic scalar.
pub type C<R> = num_complex::Complex<R>;

/// Double-precision aliases for the main state types.
pub type C64 = num_complex::Complex<f64>;
pub type GridSpec64 = hilbert::GridSpec<f64>;
pub type Wavefunction64 = hilbert::GridWavefunction<f64>;
pub type Ket64 = hilbert::FiniteKet<f64>;
pub type Density64 = hilbert::DensityOperator<f64>;
pub type Ensemble64 = hilbert::WeightedEnsemble<f64>;
pub type Trajectories64 = bohmian::TrajectoryEnsemble<f64>;
