//! Learn the delay and parameters of a delay differential equation from
//! sampled trajectory data.
//!
//! The crate integrates DDEs of the form `ẋ(t) = f(x(t), x(t−τ), θ)` with a
//! constant pre-history by explicit Euler, differentiates trajectory
//! functionals with a backward adjoint pass (including the delay τ and the
//! initial state x₀), and drives an Adam loop that recovers `(θ, τ)` from
//! time-stamped samples.

// Validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`,
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod grid;
pub mod loss;
pub mod model;
pub mod optimize;
pub mod solver;

pub use adjoint::{
    loss_gradient_discrete, loss_gradient_discrete_shifted, loss_gradient_general, sensitivity_tau,
    sensitivity_theta, sensitivity_x0, sensitivity_x0_constant_history, solve_adjoint, AdjointPath,
    GradientBundle, RunningCostGrad, TerminalCostGrad,
};
pub use error::{Error, Result};
pub use gradcheck::{fd_loss_gradient, gradcheck, GradCheckReport, DEFAULT_FD_STEP};
pub use grid::TimeGrid;
pub use loss::{
    loss_discrete, loss_general, sample_dataset, DataSet, LossValue, RunningCost, TerminalCost,
};
pub use model::{linear_model, logistic_model, model_by_name, model_from_rhs_fd, ModelSpec};
pub use optimize::{
    adam_step, fit, scan_landscape, AdamHyper, AdamState, AxisSpec, FitConfig, FitResult,
    FrozenAssignment, LandscapeScan, TauInit, ThetaInit,
};
pub use solver::{
    history_lookup, solve_forward, solve_forward_reference, DelayedState, Trajectory,
};
