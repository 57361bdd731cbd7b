//! SIR dynamics on homogeneous trees and their continuous limit.
//!
//! The crate is organised bottom-up:
//!
//! * [`ratekit`]: infection rates, recovery laws and the derived survival
//!   functions (`f`, `φ`, `φ'`, `γ`, effective rate).
//! * [`discrete`]: the nonlinear Volterra equation for the neighbour
//!   survival `s_t`, the time-to-infection law, and the closed-form / ODE /
//!   delay-equation special cases used as oracles.
//! * [`simulator`]: event-driven Monte Carlo on implicitly indexed, truncated
//!   trees with bracketing boundary conditions.
//! * [`continuum`]: the master equation for the susceptible proportion, the
//!   infected/recovered compartments it implies, and the classic SIR family.
//! * [`kernelform`]: Laplace-ratio kernels and the kernel form of the
//!   compartment equations for analytically invertible recovery laws.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod discrete;
mod error;
pub mod grid;
pub mod kernelform;
mod ode;
pub mod ratekit;
pub mod simulator;
mod volterra;

pub use error::{Error, Result};
pub use grid::{TimeGrid, Trajectory};
pub use ratekit::{RateFunction, RecoveryDistribution};
