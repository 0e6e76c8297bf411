//! Independent gradient verification by central finite differences.
//!
//! The oracle here perturbs inputs to the *same* forward solver and discrete
//! loss used everywhere else, so a disagreement with the adjoint gradients
//! isolates an implementation bug rather than discretization error. The
//! initial state is taken from the dataset's t = 0 row, matching how the
//! fitting pipeline anchors x₀.

use crate::adjoint::{loss_gradient_discrete, GradientBundle};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::loss::{loss_discrete, DataSet};
use crate::model::ModelSpec;
use crate::solver::solve_forward;

/// Default central-difference step: the loss is quadratic in residuals, and
/// this balances truncation against cancellation at double precision.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Absolute floor in the per-component relative error, so comparisons at
/// zero-gradient points do not divide by zero.
pub const REL_ERROR_FLOOR: f64 = 1e-12;

/// Side-by-side comparison of the adjoint gradient against the
/// finite-difference oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub analytic: GradientBundle,
    pub numeric: GradientBundle,
    /// Componentwise `|a − b| / max(|a|, |b|, 1e-12)` over the flattened
    /// `[θ…, τ, x₀…]` layout.
    pub rel_errors: Vec<f64>,
    pub fd_step: f64,
    pub dt: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.rel_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn check_fd_inputs(tau: f64, grid: &TimeGrid, fd_step: f64) -> Result<()> {
    if !fd_step.is_finite() || fd_step == 0.0 {
        return Err(Error::Config(format!(
            "finite-difference step must be finite and nonzero, got {fd_step}"
        )));
    }
    if tau - fd_step.abs() < grid.dt {
        return Err(Error::Config(format!(
            "tau = {tau} perturbed by fd_step = {} must stay at least dt = {}",
            fd_step.abs(),
            grid.dt
        )));
    }
    Ok(())
}

/// Central finite differences of `loss_discrete ∘ solve_forward` in each θ
/// component, τ, and each x₀ component, with x₀ anchored at the dataset's
/// t = 0 row. A perturbed solve that blows up is reported as an oracle
/// error naming the failing perturbation.
pub fn fd_loss_gradient(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    data: &DataSet,
    grid: &TimeGrid,
    fd_step: f64,
) -> Result<GradientBundle> {
    check_fd_inputs(tau, grid, fd_step)?;
    let h = fd_step;
    let x0 = data.initial_history().to_vec();

    let eval = |theta: &[f64], tau: f64, x0: &[f64], label: &str| -> Result<f64> {
        let traj = solve_forward(model, theta, tau, x0, grid).map_err(|e| match e {
            Error::BlowUp { step, t } => Error::Oracle(format!(
                "finite-difference probe blew up at step {step} (t = {t}) while perturbing {label}"
            )),
            other => other,
        })?;
        Ok(loss_discrete(&traj, data)?.total)
    };

    let mut d_theta = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let lp = eval(&plus, tau, &x0, &format!("theta[{i}] by +{h}"))?;
        let lm = eval(&minus, tau, &x0, &format!("theta[{i}] by -{h}"))?;
        d_theta.push((lp - lm) / (2.0 * h));
    }

    let lp = eval(theta, tau + h, &x0, &format!("tau by +{h}"))?;
    let lm = eval(theta, tau - h, &x0, &format!("tau by -{h}"))?;
    let d_tau = (lp - lm) / (2.0 * h);

    let mut d_x0 = Vec::with_capacity(x0.len());
    for i in 0..x0.len() {
        let mut plus = x0.clone();
        let mut minus = x0.clone();
        plus[i] += h;
        minus[i] -= h;
        let lp = eval(theta, tau, &plus, &format!("x0[{i}] by +{h}"))?;
        let lm = eval(theta, tau, &minus, &format!("x0[{i}] by -{h}"))?;
        d_x0.push((lp - lm) / (2.0 * h));
    }

    Ok(GradientBundle {
        d_theta,
        d_tau,
        d_x0,
    })
}

/// Run the adjoint gradient and the finite-difference oracle side by side
/// and compare them componentwise; `passed` holds iff the worst relative
/// error is below `tol`.
pub fn gradcheck(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    data: &DataSet,
    grid: &TimeGrid,
    fd_step: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!(
            "gradcheck tolerance must be positive, got {tol}"
        )));
    }
    let x0 = data.initial_history().to_vec();
    let forward = solve_forward(model, theta, tau, &x0, grid)?;
    let analytic = loss_gradient_discrete(model, theta, tau, &forward, data)?;
    let numeric = fd_loss_gradient(model, theta, tau, data, grid, fd_step)?;

    let a = analytic.flatten();
    let n = numeric.flatten();
    let rel_errors: Vec<f64> = a
        .iter()
        .zip(n.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(REL_ERROR_FLOOR))
        .collect();
    let passed = rel_errors.iter().copied().fold(0.0, f64::max) < tol;

    Ok(GradCheckReport {
        analytic,
        numeric,
        rel_errors,
        fd_step,
        dt: grid.dt,
        passed,
    })
}
