// Copyright 2026 spinorder Contributors
// SPDX-License-Identifier: Apache-2.0

//! Relaxation-optimized spin-order transfer in a scalar-coupled three-spin chain.
//!
//! In high-field NMR of weakly coupled spin systems, two-spin longitudinal
//! order such as 2I₁zI₂z can be passed down a chain (spin 1 → spin 2 → spin 3)
//! through the scalar couplings, but every intermediate step exposes
//! transverse operators of the middle spin to relaxation. When the transverse
//! decay rate is comparable to the coupling, the choice of radio-frequency
//! control determines how much order survives the trip.
//!
//! For the 2I₁zI₂z → 2I₂zI₃z transfer with equal neighbor couplings J and a
//! transverse rate k on the middle spin, the dynamics of the five operator
//! expectation values that participate in the transfer close on themselves.
//! In time units of 1/(πJ√2) the system is linear with a single dimensionless
//! relaxation parameter ξ = k/(J√2) and one control amplitude Ω(t), the
//! y-phase field on spin 2. Everything in this crate is expressed in those
//! normalized units.
//!
//! The crate provides:
//!
//! * [`dynamics`] — exact piecewise-constant propagation of the reduced
//!   five-variable system, plus the auxiliary radial (r) and quadratic (p)
//!   systems used in the optimality analysis.
//! * [`bounds`] — closed forms for the hard-pulse (concatenated INEPT)
//!   baseline efficiency and for the attainable upper bound
//!   κ = (√(ξ²+2) − ξ)²/2, with numerical certification that κ is attained
//!   in the relaxed problem and never exceeded.
//! * [`pulses`] — control-waveform representations: piecewise-constant
//!   samples, the two-parameter Gaussian ansatz, and instantaneous
//!   (delta-rotation) pulse programs.
//! * [`optimizer`] — steepest-descent pulse-shape optimization with adjoint
//!   gradients, the Gaussian-ansatz parameter search, the ξ-sweep table, and
//!   the (A, σ) robustness grid.
//! * [`lindblad`] — an independent full density-matrix simulator of the
//!   three-spin master equation, used as ground truth for the reduced model.
//! * [`cli`] — the `spinorder` command-line front end.
//!
//! # Example
//!
//! Compute the bound and the Gaussian-pulse efficiency at ξ = 1:
//!
//! ```
//! use spinorder::bounds;
//! use spinorder::dynamics::{ChainParams, ReducedState, propagate_reduced};
//! use spinorder::pulses::PulseProgram;
//!
//! let kappa = bounds::kappa(1.0).unwrap();
//! assert!((kappa - (2.0 - 3.0f64.sqrt())).abs() < 1e-15);
//!
//! let params = ChainParams::new(1.0, 10.0, 1000).unwrap();
//! let pulse = PulseProgram::gaussian(1.11, 1.30, 10.0).unwrap();
//! let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &params).unwrap();
//! let efficiency = traj.final_state().z3;
//! assert!(efficiency < kappa);
//! assert!((efficiency - 0.2510).abs() < 1e-3);
//! ```

pub mod bounds;
pub mod cli;
pub mod dynamics;
pub mod lindblad;
pub mod optimizer;
pub mod pulses;

/// Errors produced by the library.
///
/// The two variants mirror the process exit codes of the CLI: invalid input
/// (bad parameters, malformed files) exits with status 1, while an internal
/// numerical failure (non-finite state, lost matrix structure) exits with
/// status 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument or file was invalid.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A computation produced results outside its guaranteed domain.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// An underlying I/O operation failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}
