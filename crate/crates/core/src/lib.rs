//! Numerical laboratory for the interior radial Stefan problem.
//!
//! A water disk of radius `lambda(t)` surrounded by ice evolves by the heat
//! equation with the interface speed set by the temperature slope. In the
//! renormalized variables `y = r / lambda`, `ds/dt = 1/lambda^2` the flow lives
//! on the fixed unit disk as `v_s + H_a v = 0` with `H_a = -Delta + a y d/dy`
//! and `a = v_y(s, 1) = -lambda_s / lambda`.
//!
//! The crate is organised bottom-up:
//!
//! * [`bessel`]: `J0`, its zeros and the Dirichlet eigenfunctions `eta_j`,
//! * [`weighted_space`]: the Gaussian weight `rho_b`, `<.,.>_b` and `Lambda`,
//! * [`spectrum`]: the drifted Laplacian `H_b` and its eigenpairs,
//! * [`solver`]: time stepping of the renormalized free-boundary flow,
//! * [`modulation`]: modal decomposition `v = Q + eps` and its diagnostics,
//! * [`reduced`]: closed-form Riccati laws, the reduced modal ODE, and
//!   shooting for trapped lower modes,
//! * [`asymptotics`]: terminal radius, decay-rate fits, regime classification,
//! * [`config`], [`commands`], [`verify`]: scenario files, command drivers and
//!   the acceptance checks.

pub mod asymptotics;
pub mod bessel;
pub mod commands;
pub mod config;
pub mod error;
pub mod grid;
pub mod modulation;
pub mod reduced;
pub mod solver;
pub mod spectrum;
pub mod tridiag;
pub mod verify;
pub mod weighted_space;

pub use error::{Error, Result};
pub use grid::{GridFunction, RadialGrid};
