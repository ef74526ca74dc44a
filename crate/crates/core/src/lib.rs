//! Predictive cost adaptive control of a quadrotor.
//!
//! The crate couples a nonlinear 12-state rigid-body plant with a sampled
//! linear hover model whose input matrix is identified online by recursive
//! least squares. Identification respects the fixed sparsity of that matrix,
//! so only twelve parameters are estimated. A receding-horizon controller
//! solves a condensed QP at every sample.
//!
//! Modules, bottom up:
//!
//! - [`dynamics`]: plant model and its adaptive-step integrator ([`ode`]).
//! - [`linear_model`]: hover linearization, exact discretization, sparsity template.
//! - [`rls`]: sparse RLS with variable-rate forgetting.
//! - [`qp`]: dense active-set QP solver.
//! - [`pcac`]: prediction stack, QP encoding and the controller.
//! - [`sim`]: closed-loop scenarios, traces and plots.
//! - [`verify`]: independent oracles used by the test suites and `quadpcac verify`.

use nalgebra::SMatrix;

pub mod dynamics;
pub mod error;
pub mod linear_model;
pub mod ode;
pub mod pcac;
pub mod qp;
pub mod rls;
pub mod sim;
pub mod verify;

pub type Vector12 = nalgebra::SVector<f64, 12>;
pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Matrix12x4 = SMatrix<f64, 12, 4>;

/// Gravitational acceleration [m/s²].
pub const GRAVITY: f64 = 9.81;

pub use dynamics::{Input4, State12, VehicleParams};
pub use error::{ControlError, DynamicsError, ModelError, QpError, RlsError};
pub use linear_model::{LinearHoverModel, ThetaVec};
pub use pcac::{PcacConfig, PcacController};
pub use qp::{QpProblem, QpSolution, QpStatus};
pub use rls::{RlsState, VrfConfig};
