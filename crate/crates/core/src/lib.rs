//! Numerical laboratory for finite-time blow-up of semilinear wave equations
//! on de Sitter spacetime.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: equation parameters and critical/lifespan exponents.
//! * [`special`]: the exponential test functions `φ₁`, `ψ₁`, `ψ₂`.
//! * [`solver`]: radial method-of-lines integrator with blow-up detection.
//! * [`diagnostics`]: spatial functionals and differential-inequality residuals.
//! * [`odelab`]: Kato-type ODE blow-up criteria.
//! * [`harness`]: amplitude sweeps, power-law fits and file output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod odelab;
pub mod quad;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use model::{DerivedConstants, ModelParams, Nonlinearity};
pub use solver::{BlowupReport, BlowupStatus, InitialDataSpec, RadialGrid, RunControls, WaveState};
pub use special::TestFunctionContext;
