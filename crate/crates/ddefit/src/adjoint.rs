//! Backward adjoint integration and gradient assembly.
//!
//! For a trajectory functional (a terminal component, or a data-matching
//! loss) the adjoint covector p(t) solves the linear delay equation
//!
//! ```text
//! ṗ(t) = −p(t)·(∂f/∂x)(x(t), y(t))
//!        − p(t+τ)·(∂f/∂y)(x(t+τ), x(t))·1[t + τ < horizon]
//!        − ℓ_x(t, x(t))                       (optional running cost)
//! ```
//!
//! backward from its terminal condition, with p defined as zero past the
//! horizon. Gradients then come from quadratures along the pair
//! (trajectory, covector path):
//!
//! * `∂/∂θ  =  ∫ p·(∂f/∂θ) dt`
//! * `∂/∂τ  = −∫ p(t+τ)·(∂f/∂y)·ẋ(t) dt` over the window where the lagged
//!   argument is past the constant history,
//! * `∂/∂x₀ =  p(0) + ∫ p·(∂f/∂y) dt` over the complementary window where
//!   the lagged argument still reads the constant history (the second term
//!   is how a constant-history perturbation keeps feeding the dynamics on
//!   `[0, τ]`).
//!
//! Discretization follows the forward solver: explicit Euler steps on the
//! same grid, coefficients evaluated at each backward step's departure node,
//! and p(t+τ) read by linear interpolation. Quadratures are step sums that
//! pair step k's integrand with the covector at the step's arrival node
//! k+1 — the pairing the discrete chain rule produces — which keeps the
//! gradient error an honest O(dt) without a systematic covector/Jacobian
//! offset. (The same sums with the covector taken at node k fail the
//! finite-difference acceptance tolerance on stiff probes; see the tests.)

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::loss::DataSet;
use crate::model::ModelSpec;
use crate::solver::{history_lookup, lerp_rows, Trajectory};

/// Gradient of a running cost: `(t, x(t)) → ∂ℓ/∂x` as a row covector.
pub type RunningCostGrad = dyn Fn(f64, &[f64]) -> Vec<f64> + Sync;
/// Gradient of a terminal cost: `x(T) → ∂g/∂x` as a row covector.
pub type TerminalCostGrad = dyn Fn(&[f64]) -> Vec<f64> + Sync;

/// Tolerance factor (times dt) for the strict horizon indicator and the
/// delay/history window split: keeps fp jitter from flipping a boundary
/// step between channels.
const WINDOW_EPS_REL: f64 = 1e-9;

/// The backward-solved covector path on the forward grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointPath {
    pub grid: TimeGrid,
    /// One row covector per grid node, `n_steps + 1` entries.
    pub covectors: Vec<Vec<f64>>,
    /// Terminal condition p(T); equals `covectors[n_steps]` exactly.
    pub terminal: Vec<f64>,
}

impl AdjointPath {
    /// p(t) with linear interpolation between nodes and zero-extension past
    /// the horizon (queries at t > T return the zero covector).
    pub fn at(&self, t: f64) -> Vec<f64> {
        let dim = self.terminal.len();
        if t > self.grid.t_end + WINDOW_EPS_REL * self.grid.dt {
            return vec![0.0; dim];
        }
        if t <= self.grid.t_start {
            return self.covectors[0].clone();
        }
        lerp_rows(&self.covectors, self.grid.dt, t - self.grid.t_start)
    }
}

/// Gradients of one functional with respect to parameters, delay, and the
/// constant initial history.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_theta: Vec<f64>,
    pub d_tau: f64,
    pub d_x0: Vec<f64>,
}

impl GradientBundle {
    fn zeros(d: usize, n: usize) -> Self {
        GradientBundle {
            d_theta: vec![0.0; d],
            d_tau: 0.0,
            d_x0: vec![0.0; n],
        }
    }

    fn add_scaled(&mut self, other: &GradientBundle, scale: f64) {
        for (a, b) in self.d_theta.iter_mut().zip(other.d_theta.iter()) {
            *a += scale * b;
        }
        self.d_tau += scale * other.d_tau;
        for (a, b) in self.d_x0.iter_mut().zip(other.d_x0.iter()) {
            *a += scale * b;
        }
    }

    fn ensure_finite(self) -> Result<Self> {
        let ok = self.d_theta.iter().all(|v| v.is_finite())
            && self.d_tau.is_finite()
            && self.d_x0.iter().all(|v| v.is_finite());
        if ok {
            Ok(self)
        } else {
            Err(Error::Fit("gradient contains non-finite components".into()))
        }
    }

    /// Flatten as `[θ…, τ, x₀…]` (the order used by reports and probes).
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.d_theta.clone();
        v.push(self.d_tau);
        v.extend_from_slice(&self.d_x0);
        v
    }
}

/// `p · M` for a row covector and a row-major matrix: `out_j = Σ_i p_i M_ij`.
fn row_times_mat(p: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (pi, row) in p.iter().zip(m.iter()) {
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o += pi * v;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Per-node model evaluations shared by every backward sweep over one
/// trajectory. All sweep and quadrature coefficients depend only on the
/// node (never on the sweep's terminal condition), so tabulating them once
/// lets a many-data-point gradient reuse them across all its sweeps.
struct NodeTables {
    /// ∂f/∂x at (x_k, y(t_k)).
    a: Vec<Vec<Vec<f64>>>,
    /// ∂f/∂y at (x_k, y(t_k)).
    b: Vec<Vec<Vec<f64>>>,
    /// ∂f/∂θ at (x_k, y(t_k)).
    j_theta: Vec<Vec<Vec<f64>>>,
    /// ∂f/∂y at (x(t_k + τ), x_k) — the delayed-coupling matrix for a
    /// departure from node k; present while t_k + τ stays on the grid.
    b_delay: Vec<Option<Vec<Vec<f64>>>>,
    /// f(x(s), y(s)) at s = t_k − τ, for nodes whose lagged argument has
    /// moved past the constant history.
    xdot_lag: Vec<Option<Vec<f64>>>,
}

fn build_tables(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
) -> Result<NodeTables> {
    let grid = &forward.grid;
    let dt = grid.dt;
    let n_nodes = grid.n_nodes();
    // Same expression every sweep uses for its horizon time, so the
    // presence test below matches the sweep's branch bit for bit.
    let t_last = grid.node_time(grid.n_steps);
    let mut a = Vec::with_capacity(n_nodes);
    let mut b = Vec::with_capacity(n_nodes);
    let mut j_theta = Vec::with_capacity(n_nodes);
    let mut b_delay = Vec::with_capacity(n_nodes);
    let mut xdot_lag = Vec::with_capacity(n_nodes);

    for k in 0..n_nodes {
        let t = grid.node_time(k);
        let xk = &forward.states[k];
        let yk = history_lookup(forward, t, tau)?;
        a.push((model.d_rhs_dx)(xk, &yk, theta));
        b.push((model.d_rhs_dy)(xk, &yk, theta));
        j_theta.push((model.d_rhs_dtheta)(xk, &yk, theta));

        b_delay.push(if t + tau < t_last - WINDOW_EPS_REL * dt {
            let x_outer = forward.value_at(t + tau)?;
            Some((model.d_rhs_dy)(&x_outer, xk, theta))
        } else {
            None
        });

        let s = t - tau;
        xdot_lag.push(if s > WINDOW_EPS_REL * dt {
            let x_lag = forward.value_at(s)?;
            let y_lag = history_lookup(forward, s, tau)?;
            Some((model.rhs)(&x_lag, &y_lag, theta))
        } else {
            None
        });
    }
    Ok(NodeTables {
        a,
        b,
        j_theta,
        b_delay,
        xdot_lag,
    })
}

/// Backward Euler-mirror sweep from node `horizon` down to node 0.
///
/// Covector index k holds p(t_k); the step from k+1 to k evaluates all
/// coefficients at the departure node t_{k+1}. The delayed read
/// p(t_{k+1} + τ) interpolates already-computed covectors and is switched
/// off (zero-extension) once t_{k+1} + τ reaches the sweep horizon.
fn backward_sweep(
    tables: &NodeTables,
    tau: f64,
    forward: &Trajectory,
    horizon: usize,
    terminal: &[f64],
    running_cost_grad: Option<&RunningCostGrad>,
) -> Result<Vec<Vec<f64>>> {
    let dt = forward.grid.dt;
    let t_horizon = forward.grid.node_time(horizon);
    let n = forward.dim();
    let mut covectors = vec![vec![0.0; n]; horizon + 1];
    covectors[horizon] = terminal.to_vec();

    for k in (0..horizon).rev() {
        let t1 = forward.grid.node_time(k + 1);
        let mut rate = row_times_mat(&covectors[k + 1], &tables.a[k + 1]);

        if t1 + tau < t_horizon - WINDOW_EPS_REL * dt {
            // delayed coupling: p(t1+τ) · ∂f/∂y evaluated at the outer time
            // t1+τ, whose lagged argument is x(t1) itself
            let pq = lerp_rows(&covectors, dt, t1 + tau);
            let b = tables.b_delay[k + 1]
                .as_ref()
                .expect("delayed-coupling matrix tabulated inside the horizon");
            for (r, v) in rate.iter_mut().zip(row_times_mat(&pq, b)) {
                *r += v;
            }
        }
        if let Some(ell_x) = running_cost_grad {
            for (r, v) in rate.iter_mut().zip(ell_x(t1, &forward.states[k + 1])) {
                *r += v;
            }
        }

        let prev: Vec<f64> = covectors[k + 1]
            .iter()
            .zip(rate.iter())
            .map(|(p, r)| p + dt * r)
            .collect();
        if prev.iter().any(|v| !v.is_finite()) {
            return Err(Error::AdjointBlowUp {
                step: k,
                t: forward.grid.node_time(k),
            });
        }
        covectors[k] = prev;
    }
    Ok(covectors)
}

/// The three quadratures over one sweep's horizon, plus p(0).
struct HorizonGradients {
    d_theta: Vec<f64>,
    d_tau: f64,
    d_x0_history: Vec<f64>,
    p0: Vec<f64>,
}

/// Step-sum quadratures pairing step k's integrand with the covector at the
/// arrival node k+1. Each step contributes to exactly one of the delay (τ)
/// or history (x₀) channels, depending on whether its lagged argument
/// `t_k − τ` is past the constant history.
fn horizon_quadratures(
    tables: &NodeTables,
    dim_theta: usize,
    forward: &Trajectory,
    covectors: &[Vec<f64>],
    horizon: usize,
) -> HorizonGradients {
    let dt = forward.grid.dt;
    let n = forward.dim();
    let mut d_theta = vec![0.0; dim_theta];
    let mut d_tau = 0.0;
    let mut d_x0_history = vec![0.0; n];

    for k in 0..horizon {
        let p_arrival = &covectors[k + 1];

        let p_jt = row_times_mat(p_arrival, &tables.j_theta[k]);
        for (acc, v) in d_theta.iter_mut().zip(p_jt) {
            *acc += dt * v;
        }

        let p_b = row_times_mat(p_arrival, &tables.b[k]);
        if let Some(xdot) = &tables.xdot_lag[k] {
            // lagged argument reads the interpolated trajectory: its τ-rate
            // is −ẋ(s), with ẋ(s) = f(x(s), y(s)) from the stored states
            d_tau -= dt * dot(&p_b, xdot);
        } else {
            // lagged argument still reads the constant history x₀
            for (acc, v) in d_x0_history.iter_mut().zip(p_b) {
                *acc += dt * v;
            }
        }
    }

    HorizonGradients {
        d_theta,
        d_tau,
        d_x0_history,
        p0: covectors[0].clone(),
    }
}

fn check_adjoint_inputs(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
) -> Result<()> {
    if theta.len() != model.dim_theta {
        return Err(Error::Config(format!(
            "model '{}' expects {} parameters, got {}",
            model.name,
            model.dim_theta,
            theta.len()
        )));
    }
    if forward.dim() != model.dim_state {
        return Err(Error::Config(format!(
            "trajectory dimension {} does not match model dimension {}",
            forward.dim(),
            model.dim_state
        )));
    }
    if !tau.is_finite() || tau < forward.grid.dt {
        return Err(Error::Config(format!(
            "delay tau = {tau} must be finite and at least one grid step dt = {}",
            forward.grid.dt
        )));
    }
    Ok(())
}

fn check_terminal(forward: &Trajectory, terminal: &[f64]) -> Result<()> {
    if terminal.len() != forward.dim() {
        return Err(Error::Config(format!(
            "terminal covector has dimension {}, trajectory has {}",
            terminal.len(),
            forward.dim()
        )));
    }
    Ok(())
}

/// Solve the adjoint equation backward over the whole grid from p(T) =
/// `terminal`, optionally accumulating a running-cost gradient along the way.
pub fn solve_adjoint(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
    terminal: &[f64],
    running_cost_grad: Option<&RunningCostGrad>,
) -> Result<AdjointPath> {
    check_adjoint_inputs(model, theta, tau, forward)?;
    check_terminal(forward, terminal)?;
    let tables = build_tables(model, theta, tau, forward)?;
    let covectors = backward_sweep(
        &tables,
        tau,
        forward,
        forward.grid.n_steps,
        terminal,
        running_cost_grad,
    )?;
    Ok(AdjointPath {
        grid: forward.grid.clone(),
        covectors,
        terminal: terminal.to_vec(),
    })
}

/// Sensitivity of the adjoint's functional to the initial point value:
/// exactly `p(0)` (the history is held fixed).
pub fn sensitivity_x0(adjoint: &AdjointPath) -> Vec<f64> {
    adjoint.covectors[0].clone()
}

/// Sensitivity to the constant history value x₀ as a whole: the point term
/// p(0) plus the history-window integral `∫ p·(∂f/∂y) dt` over the steps
/// whose lagged argument reads x₀.
pub fn sensitivity_x0_constant_history(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
    adjoint: &AdjointPath,
) -> Result<Vec<f64>> {
    check_adjoint_inputs(model, theta, tau, forward)?;
    let tables = build_tables(model, theta, tau, forward)?;
    let q = horizon_quadratures(
        &tables,
        model.dim_theta,
        forward,
        &adjoint.covectors,
        forward.grid.n_steps,
    );
    Ok(q.p0
        .iter()
        .zip(q.d_x0_history.iter())
        .map(|(a, b)| a + b)
        .collect())
}

/// `∫ p·(∂f/∂θ) dt` over the adjoint's horizon.
pub fn sensitivity_theta(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
    adjoint: &AdjointPath,
) -> Result<Vec<f64>> {
    check_adjoint_inputs(model, theta, tau, forward)?;
    let tables = build_tables(model, theta, tau, forward)?;
    let q = horizon_quadratures(
        &tables,
        model.dim_theta,
        forward,
        &adjoint.covectors,
        forward.grid.n_steps,
    );
    Ok(q.d_theta)
}

/// `−∫ p(t+τ)·(∂f/∂y)·ẋ(t) dt` over the window where the lagged argument is
/// past the constant history.
pub fn sensitivity_tau(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
    adjoint: &AdjointPath,
) -> Result<f64> {
    check_adjoint_inputs(model, theta, tau, forward)?;
    let tables = build_tables(model, theta, tau, forward)?;
    let q = horizon_quadratures(
        &tables,
        model.dim_theta,
        forward,
        &adjoint.covectors,
        forward.grid.n_steps,
    );
    Ok(q.d_tau)
}

/// Gradient of the discrete loss `Σ_j ‖X_j − x(t_j)‖²` by one backward
/// sweep per data time.
///
/// Each data point's residual seeds a sweep over `[0, t_j]` with terminal
/// covector `−2·(X_j − x(t_j))` (all state components folded into one
/// terminal by linearity), and horizon-limited quadratures accumulate its
/// contribution. The t = 0 point needs no sweep: it feeds `d_x0` directly.
pub fn loss_gradient_discrete(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
    data: &DataSet,
) -> Result<GradientBundle> {
    check_adjoint_inputs(model, theta, tau, forward)?;
    if data.dim() != forward.dim() {
        return Err(Error::Config(format!(
            "dataset dimension {} does not match trajectory dimension {}",
            data.dim(),
            forward.dim()
        )));
    }
    let idx = data.node_indices(&forward.grid)?;
    let n = forward.dim();
    let tables = build_tables(model, theta, tau, forward)?;
    let mut bundle = GradientBundle::zeros(model.dim_theta, n);

    for (&k_j, x_meas) in idx.iter().zip(data.values().iter()) {
        let w: Vec<f64> = x_meas
            .iter()
            .zip(forward.states[k_j].iter())
            .map(|(m, x)| -2.0 * (m - x))
            .collect();
        if w.iter().all(|&v| v == 0.0) {
            continue;
        }
        if k_j == 0 {
            // x(0) is x₀ itself: identity sensitivity, no dynamics involved
            for (acc, v) in bundle.d_x0.iter_mut().zip(w.iter()) {
                *acc += v;
            }
            continue;
        }
        let covectors = backward_sweep(&tables, tau, forward, k_j, &w, None)?;
        let q = horizon_quadratures(&tables, model.dim_theta, forward, &covectors, k_j);
        for (acc, v) in bundle.d_theta.iter_mut().zip(q.d_theta.iter()) {
            *acc += v;
        }
        bundle.d_tau += q.d_tau;
        for ((acc, p), h) in bundle
            .d_x0
            .iter_mut()
            .zip(q.p0.iter())
            .zip(q.d_x0_history.iter())
        {
            *acc += p + h;
        }
    }
    bundle.ensure_finite()
}

/// Gradient of the discrete loss by the single-backward-solve reuse: one
/// sweep per state component over the full grid, shifted in time to serve
/// every data point.
///
/// The shift identifies the horizon-`t_j` adjoint with a slice of the
/// horizon-`T` adjoint via `p_i^j(t) = p_i(T − t_j + t)`, so exactly n
/// backward solves are performed regardless of the number of data points.
/// The identification is exact when the linearized dynamics along the
/// trajectory is time-invariant (the linear benchmark); for genuinely
/// time-varying linearizations the shifted covectors follow the wrong
/// coefficients and the result is *not* a gradient of the loss — see the
/// divergence test below and prefer [`loss_gradient_discrete`].
pub fn loss_gradient_discrete_shifted(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
    data: &DataSet,
) -> Result<GradientBundle> {
    check_adjoint_inputs(model, theta, tau, forward)?;
    if data.dim() != forward.dim() {
        return Err(Error::Config(format!(
            "dataset dimension {} does not match trajectory dimension {}",
            data.dim(),
            forward.dim()
        )));
    }
    let idx = data.node_indices(&forward.grid)?;
    let n = forward.dim();
    let m_full = forward.grid.n_steps;
    let tables = build_tables(model, theta, tau, forward)?;
    let mut bundle = GradientBundle::zeros(model.dim_theta, n);

    // one full-horizon sweep per state component
    let mut component_sweeps = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        component_sweeps.push(backward_sweep(&tables, tau, forward, m_full, &e, None)?);
    }

    for (&k_j, x_meas) in idx.iter().zip(data.values().iter()) {
        for (i, sweep) in component_sweeps.iter().enumerate() {
            let w = -2.0 * (x_meas[i] - forward.states[k_j][i]);
            if w == 0.0 {
                continue;
            }
            if k_j == 0 {
                bundle.d_x0[i] += w;
                continue;
            }
            // shifted view: node k of the horizon-t_j adjoint is node
            // k + (M − m_j) of the full sweep
            let shifted = &sweep[m_full - k_j..];
            let q = horizon_quadratures(&tables, model.dim_theta, forward, shifted, k_j);
            let partial = GradientBundle {
                d_theta: q.d_theta,
                d_tau: q.d_tau,
                d_x0: q
                    .p0
                    .iter()
                    .zip(q.d_x0_history.iter())
                    .map(|(a, b)| a + b)
                    .collect(),
            };
            bundle.add_scaled(&partial, w);
        }
    }
    bundle.ensure_finite()
}

/// Gradient of the general cost `L = ∫ ℓ(t, x(t)) dt + g(x(T))`: one
/// extended-adjoint sweep with terminal `∂g/∂x(x(T))` and the running-cost
/// gradient folded into the backward rate, then the standard quadratures.
pub fn loss_gradient_general(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    forward: &Trajectory,
    running_cost_grad: Option<&RunningCostGrad>,
    terminal_cost_grad: Option<&TerminalCostGrad>,
) -> Result<GradientBundle> {
    check_adjoint_inputs(model, theta, tau, forward)?;
    let n = forward.dim();
    let terminal = match terminal_cost_grad {
        Some(g) => g(forward.states.last().unwrap()),
        None => vec![0.0; n],
    };
    check_terminal(forward, &terminal)?;
    let tables = build_tables(model, theta, tau, forward)?;
    let covectors = backward_sweep(
        &tables,
        tau,
        forward,
        forward.grid.n_steps,
        &terminal,
        running_cost_grad,
    )?;
    let q = horizon_quadratures(
        &tables,
        model.dim_theta,
        forward,
        &covectors,
        forward.grid.n_steps,
    );
    GradientBundle {
        d_theta: q.d_theta,
        d_tau: q.d_tau,
        d_x0: q
            .p0
            .iter()
            .zip(q.d_x0_history.iter())
            .map(|(a, b)| a + b)
            .collect(),
    }
    .ensure_finite()
}
