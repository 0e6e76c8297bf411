//! Adam optimizer and the training loop that alternates forward solve,
//! loss evaluation, adjoint gradient, and joint (θ, τ) update.

use crate::adjoint::loss_gradient_discrete;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::loss::{loss_discrete, DataSet};
use crate::model::ModelSpec;
use crate::solver::solve_forward;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Adam hyperparameters. The defaults are tuned so the bundled benchmark
/// configurations converge in a few hundred epochs at most.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Running state of one Adam instance over the concatenated `[θ…, τ]`
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    /// Fresh state for `dim` parameters (zero moments, step count zero).
    pub fn new(hyper: AdamHyper, dim: usize) -> Result<Self> {
        if !hyper.lr.is_finite() || hyper.lr < 0.0 {
            return Err(Error::Config(format!(
                "Adam lr must be ≥ 0, got {}",
                hyper.lr
            )));
        }
        for (name, b) in [("beta1", hyper.beta1), ("beta2", hyper.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!(
                    "Adam {name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(hyper.epsilon > 0.0) || !hyper.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "Adam epsilon must be a small positive real, got {}",
                hyper.epsilon
            )));
        }
        Ok(AdamState {
            lr: hyper.lr,
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            epsilon: hyper.epsilon,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step_count: 0,
        })
    }
}

/// One bias-corrected Adam update. Functional: returns the advanced state
/// and the new parameter vector.
pub fn adam_step(state: AdamState, params: &[f64], grad: &[f64]) -> Result<(AdamState, Vec<f64>)> {
    if params.len() != state.m.len() || grad.len() != state.m.len() {
        return Err(Error::Config(format!(
            "Adam state has dimension {}, got params of {} and gradient of {}",
            state.m.len(),
            params.len(),
            grad.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Fit(
            "non-finite gradient passed to the optimizer".into(),
        ));
    }
    let mut next = state;
    next.step_count += 1;
    let t = next.step_count as i32;
    let bc1 = 1.0 - next.beta1.powi(t);
    let bc2 = 1.0 - next.beta2.powi(t);
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        next.m[i] = next.beta1 * next.m[i] + (1.0 - next.beta1) * grad[i];
        next.v[i] = next.beta2 * next.v[i] + (1.0 - next.beta2) * grad[i] * grad[i];
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        out.push(params[i] - next.lr * m_hat / (v_hat.sqrt() + next.epsilon));
    }
    Ok((next, out))
}

/// How to seed the θ iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaInit {
    Fixed(Vec<f64>),
    /// Each component drawn independently from U(−2, 2).
    Uniform,
}

/// How to seed the τ iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauInit {
    Fixed(f64),
    /// Drawn from U(−2, 2), resampled until positive, then clamped to the
    /// configured bounds.
    Uniform,
}

/// Everything the training loop needs besides the model and the data.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub theta_init: ThetaInit,
    pub tau_init: TauInit,
    pub max_epochs: usize,
    pub loss_threshold: f64,
    /// `(tau_min, tau_max)`; every iterate's τ is clamped into this range.
    pub tau_bounds: (f64, f64),
    pub grid: TimeGrid,
    pub adam: AdamHyper,
}

impl FitConfig {
    /// Random initialization, 500-epoch budget, the benchmark convergence
    /// threshold 0.01, and τ confined to `[2·dt, T/2]`.
    pub fn new(grid: TimeGrid) -> Self {
        let span = grid.t_end - grid.t_start;
        FitConfig {
            theta_init: ThetaInit::Uniform,
            tau_init: TauInit::Uniform,
            max_epochs: 500,
            loss_threshold: 0.01,
            tau_bounds: (2.0 * grid.dt, span / 2.0),
            grid,
            adam: AdamHyper::default(),
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(self.loss_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "loss_threshold must be nonnegative, got {}",
                self.loss_threshold
            )));
        }
        let (lo, hi) = self.tau_bounds;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::Config(format!("invalid tau bounds [{lo}, {hi}]")));
        }
        if lo < self.grid.dt {
            return Err(Error::Config(format!(
                "tau_min = {lo} must be at least the grid step dt = {}",
                self.grid.dt
            )));
        }
        if let ThetaInit::Fixed(th) = &self.theta_init {
            if th.len() != model.dim_theta {
                return Err(Error::Config(format!(
                    "theta_init has {} components, model '{}' expects {}",
                    th.len(),
                    model.name,
                    model.dim_theta
                )));
            }
            if th.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("theta_init must be finite".into()));
            }
        }
        if let TauInit::Fixed(t) = self.tau_init {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!(
                    "tau_init must be a positive real, got {t}"
                )));
            }
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive for fitting, got {}",
                self.adam.lr
            )));
        }
        Ok(())
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub tau: f64,
    pub final_loss: f64,
    /// Number of epochs that evaluated a loss; equals `loss_history.len()`.
    pub epochs_used: usize,
    pub loss_history: Vec<f64>,
    pub converged: bool,
    /// The initial iterate followed by one entry per parameter update.
    pub iterate_history: Vec<(Vec<f64>, f64)>,
}

fn draw_initial(model: &ModelSpec, config: &FitConfig, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let theta = match &config.theta_init {
        ThetaInit::Fixed(v) => v.clone(),
        ThetaInit::Uniform => (0..model.dim_theta)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect(),
    };
    let tau_raw = match config.tau_init {
        TauInit::Fixed(t) => t,
        TauInit::Uniform => loop {
            let t: f64 = rng.gen_range(-2.0..2.0);
            if t > 0.0 {
                break t;
            }
        },
    };
    let (lo, hi) = config.tau_bounds;
    (theta, tau_raw.clamp(lo, hi))
}

/// Recover `(θ, τ)` from sampled data by Adam on the discrete loss, with
/// the adjoint supplying gradients.
///
/// Each epoch solves forward, evaluates the loss, stops if it is at or
/// below the threshold, and otherwise takes one joint Adam step and clamps
/// τ back into its bounds. A forward blow-up consumes an epoch: the iterate
/// is pulled halfway back toward the last good one, and five consecutive
/// failures (or one at the very first epoch) abort the fit. Deterministic
/// for a fixed seed.
pub fn fit(model: &ModelSpec, data: &DataSet, config: &FitConfig, seed: u64) -> Result<FitResult> {
    config.validate(model)?;
    if data.dim() != model.dim_state {
        return Err(Error::Config(format!(
            "dataset dimension {} does not match model dimension {}",
            data.dim(),
            model.dim_state
        )));
    }
    // fail on misaligned data up front, before any numerics
    data.node_indices(&config.grid)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut theta, mut tau) = draw_initial(model, config, &mut rng);
    let x0 = data.initial_history().to_vec();
    let (tau_lo, tau_hi) = config.tau_bounds;

    let mut adam = AdamState::new(config.adam, model.dim_theta + 1)?;
    let mut loss_history: Vec<f64> = Vec::new();
    let mut iterate_history: Vec<(Vec<f64>, f64)> = vec![(theta.clone(), tau)];
    let mut converged = false;
    let mut consecutive_failures = 0u32;

    for epoch in 1..=config.max_epochs {
        let traj = match solve_forward(model, &theta, tau, &x0, &config.grid) {
            Ok(t) => t,
            Err(Error::BlowUp { step, t }) => {
                consecutive_failures += 1;
                if iterate_history.len() < 2 {
                    return Err(Error::Fit(format!(
                        "the initial iterate blows up at step {step} (t = {t}); \
                         choose a different initialization"
                    )));
                }
                if consecutive_failures >= 5 {
                    return Err(Error::Fit(format!(
                        "five consecutive blow-ups near epoch {epoch} (last at step {step}, \
                         t = {t}); the iterate cannot escape the divergent region"
                    )));
                }
                // pull the current iterate halfway back toward the last good one
                let prev = iterate_history[iterate_history.len() - 2].clone();
                for (c, p) in theta.iter_mut().zip(prev.0.iter()) {
                    *c = 0.5 * (*c + p);
                }
                tau = (0.5 * (tau + prev.1)).clamp(tau_lo, tau_hi);
                let last = iterate_history.len() - 1;
                iterate_history[last] = (theta.clone(), tau);
                continue;
            }
            Err(other) => return Err(other),
        };
        consecutive_failures = 0;

        let loss = loss_discrete(&traj, data)?.total;
        loss_history.push(loss);
        if loss <= config.loss_threshold {
            converged = true;
            break;
        }
        if epoch == config.max_epochs {
            break;
        }

        let g = loss_gradient_discrete(model, &theta, tau, &traj, data)?;
        let mut params = theta.clone();
        params.push(tau);
        let mut grad = g.d_theta.clone();
        grad.push(g.d_tau);
        let (next_state, next_params) = adam_step(adam, &params, &grad)?;
        adam = next_state;
        theta = next_params[..model.dim_theta].to_vec();
        tau = next_params[model.dim_theta].clamp(tau_lo, tau_hi);
        iterate_history.push((theta.clone(), tau));
    }

    let final_loss = *loss_history
        .last()
        .ok_or_else(|| Error::Fit("no epoch completed a loss evaluation".into()))?;
    Ok(FitResult {
        theta,
        tau,
        final_loss,
        epochs_used: loss_history.len(),
        loss_history,
        converged,
        iterate_history,
    })
}

/// An inclusive, linearly spaced scan axis. `count = 1` pins the axis to
/// `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::Config("scan axis needs at least one point".into()));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Config(format!(
                "scan axis endpoints must be finite, got [{}, {}]",
                self.start, self.stop
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        if self.stop <= self.start {
            return Err(Error::Config(format!(
                "scan axis needs stop > start, got [{}, {}]",
                self.start, self.stop
            )));
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.stop
                } else {
                    self.start + i as f64 * step
                }
            })
            .collect())
    }
}

/// The coordinates held fixed while scanning: a full θ vector (scanned
/// components are overwritten) and a base τ.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenAssignment {
    pub theta: Vec<f64>,
    pub tau: f64,
}

/// Loss values over a rectangular (θ component × τ) scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeScan {
    /// Which θ component the row axis varies.
    pub theta_index: usize,
    pub theta_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    /// `losses[i][j]` is the loss at `θ[theta_index] = theta_values[i]`,
    /// `τ = tau_values[j]`; `+∞` marks a forward blow-up.
    pub losses: Vec<Vec<f64>>,
}

impl LandscapeScan {
    /// Grid coordinates of the smallest finite loss, if any cell is finite.
    pub fn argmin(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.losses.iter().enumerate() {
            for (j, &l) in row.iter().enumerate() {
                if l.is_finite() && best.is_none_or(|(_, _, b)| l < b) {
                    best = Some((i, j, l));
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }
}

/// Evaluate the discrete loss over a rectangular grid in one θ component
/// and τ, all other coordinates frozen. Forward blow-ups are recorded as
/// `+∞` cells, not errors; cells are evaluated independently and
/// deterministically.
pub fn scan_landscape(
    model: &ModelSpec,
    data: &DataSet,
    theta_axis: (usize, AxisSpec),
    tau_axis: AxisSpec,
    frozen: &FrozenAssignment,
    grid: &TimeGrid,
) -> Result<LandscapeScan> {
    let (theta_index, theta_spec) = theta_axis;
    if theta_index >= model.dim_theta {
        return Err(Error::Config(format!(
            "scan axis refers to theta[{theta_index}], model '{}' has {} parameters",
            model.name, model.dim_theta
        )));
    }
    if frozen.theta.len() != model.dim_theta {
        return Err(Error::Config(format!(
            "frozen theta has {} components, model '{}' expects {}",
            frozen.theta.len(),
            model.name,
            model.dim_theta
        )));
    }
    let theta_values = theta_spec.values()?;
    let tau_values = tau_axis.values()?;
    if let Some(bad) = tau_values.iter().find(|&&t| t < grid.dt) {
        return Err(Error::Config(format!(
            "scan value tau = {bad} is below the grid step dt = {}",
            grid.dt
        )));
    }
    data.node_indices(grid)?;
    let x0 = data.initial_history().to_vec();

    let mut losses = Vec::with_capacity(theta_values.len());
    for &tv in &theta_values {
        let mut theta = frozen.theta.clone();
        theta[theta_index] = tv;
        let mut row = Vec::with_capacity(tau_values.len());
        for &tau in &tau_values {
            let cell = match solve_forward(model, &theta, tau, &x0, grid) {
                Ok(traj) => loss_discrete(&traj, data)?.total,
                Err(Error::BlowUp { .. }) => f64::INFINITY,
                Err(other) => return Err(other),
            };
            row.push(cell);
        }
        losses.push(row);
    }
    Ok(LandscapeScan {
        theta_index,
        theta_values,
        tau_values,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::sample_dataset;
    use crate::model::{linear_model, logistic_model, ModelSpec};
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_a_fresh_state_untouched() {
        let state = AdamState::new(AdamHyper::default(), 2).unwrap();
        let (next, params) = adam_step(state, &[1.5, -0.5], &[0.0, 0.0]).unwrap();
        assert_eq!(params, vec![1.5, -0.5]);
        assert_eq!(next.m, vec![0.0, 0.0]);
        assert_eq!(next.v, vec![0.0, 0.0]);
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_roughly_lr_times_sign() {
        let state = AdamState::new(AdamHyper::default(), 1).unwrap();
        let (_, params) = adam_step(state, &[1.0], &[3.7]).unwrap();
        assert!((params[0] - (1.0 - 0.05)).abs() < 1e-6, "got {}", params[0]);
        let state = AdamState::new(AdamHyper::default(), 1).unwrap();
        let (_, params) = adam_step(state, &[1.0], &[-0.002]).unwrap();
        assert!((params[0] - (1.0 + 0.05)).abs() < 1e-4, "got {}", params[0]);
    }

    #[test]
    fn two_constant_gradient_steps_match_the_hand_unrolled_recurrence() {
        let hyper = AdamHyper::default();
        let g = 0.3;
        let state = AdamState::new(hyper, 1).unwrap();
        let (state, p1) = adam_step(state, &[2.0], &[g]).unwrap();
        let (_, p2) = adam_step(state, &p1, &[g]).unwrap();

        // hand unroll
        let m1 = (1.0 - hyper.beta1) * g;
        let v1 = (1.0 - hyper.beta2) * g * g;
        let q1 = 2.0
            - hyper.lr * (m1 / (1.0 - hyper.beta1))
                / ((v1 / (1.0 - hyper.beta2)).sqrt() + hyper.epsilon);
        let m2 = hyper.beta1 * m1 + (1.0 - hyper.beta1) * g;
        let v2 = hyper.beta2 * v1 + (1.0 - hyper.beta2) * g * g;
        let q2 = q1
            - hyper.lr * (m2 / (1.0 - hyper.beta1.powi(2)))
                / ((v2 / (1.0 - hyper.beta2.powi(2))).sqrt() + hyper.epsilon);
        assert!((p1[0] - q1).abs() < 1e-12);
        assert!((p2[0] - q2).abs() < 1e-12);
    }

    #[test]
    fn bad_gradients_and_dimensions_are_rejected() {
        let state = AdamState::new(AdamHyper::default(), 1).unwrap();
        assert!(matches!(
            adam_step(state.clone(), &[1.0], &[f64::NAN]),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            adam_step(state, &[1.0, 2.0], &[0.1]),
            Err(Error::Config(_))
        ));
        assert!(AdamState::new(
            AdamHyper {
                lr: f64::NAN,
                ..Default::default()
            },
            1
        )
        .is_err());
        assert!(AdamState::new(
            AdamHyper {
                beta1: 1.0,
                ..Default::default()
            },
            1
        )
        .is_err());
        assert!(AdamState::new(
            AdamHyper {
                epsilon: 0.0,
                ..Default::default()
            },
            1
        )
        .is_err());
    }

    #[test]
    fn starting_at_the_data_generating_parameters_converges_immediately() {
        let m = logistic_model();
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 10).unwrap();
        let config = FitConfig {
            theta_init: ThetaInit::Fixed(vec![1.0, 1.0]),
            tau_init: TauInit::Fixed(1.0),
            ..FitConfig::new(grid)
        };
        let out = fit(&m, &data, &config, 0).unwrap();
        assert!(out.converged);
        assert_eq!(out.epochs_used, 1);
        assert_eq!(out.loss_history, vec![0.0]);
        assert_eq!(out.final_loss, 0.0);
        assert_eq!(out.theta, vec![1.0, 1.0]);
        assert_eq!(out.tau, 1.0);
        assert_eq!(out.iterate_history.len(), 1);
    }

    #[test]
    fn a_few_epochs_near_the_truth_reduce_the_loss() {
        let m = linear_model();
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[-2.0, -2.0], 1.0, &[-1.0], &grid, 10).unwrap();
        let config = FitConfig {
            theta_init: ThetaInit::Fixed(vec![-2.3, -1.7]),
            tau_init: TauInit::Fixed(1.2),
            max_epochs: 40,
            loss_threshold: 0.0,
            ..FitConfig::new(grid)
        };
        let out = fit(&m, &data, &config, 0).unwrap();
        assert_eq!(out.epochs_used, 40);
        assert!(out.loss_history.iter().all(|l| l.is_finite()));
        assert!(
            out.final_loss < 0.25 * out.loss_history[0],
            "loss {} → {}",
            out.loss_history[0],
            out.final_loss
        );
        assert_eq!(out.iterate_history.len(), out.epochs_used);
        assert_eq!(out.loss_history.len(), out.epochs_used);
    }

    #[test]
    fn fits_are_bit_reproducible_for_a_fixed_seed() {
        let m = logistic_model();
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 20).unwrap();
        let config = FitConfig {
            theta_init: ThetaInit::Fixed(vec![1.3, 0.9]),
            tau_init: TauInit::Uniform,
            max_epochs: 15,
            loss_threshold: 0.0,
            ..FitConfig::new(grid)
        };
        let a = fit(&m, &data, &config, 42).unwrap();
        let b = fit(&m, &data, &config, 42).unwrap();
        assert_eq!(a, b);
        // and a different seed draws a different start
        let c = fit(&m, &data, &config, 43).unwrap();
        assert_ne!(a.iterate_history[0], c.iterate_history[0]);
    }

    #[test]
    fn tau_iterates_respect_their_bounds() {
        let m = logistic_model();
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 20).unwrap();
        let config = FitConfig {
            theta_init: ThetaInit::Fixed(vec![1.3, 0.9]),
            tau_init: TauInit::Fixed(1.4),
            max_epochs: 25,
            loss_threshold: 0.0,
            tau_bounds: (1.2, 1.45),
            ..FitConfig::new(grid)
        };
        let out = fit(&m, &data, &config, 0).unwrap();
        for (_, tau) in &out.iterate_history {
            assert!((1.2..=1.45).contains(tau), "tau = {tau}");
        }
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let m = logistic_model();
        let grid = TimeGrid::new(2.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 20).unwrap();
        let base = FitConfig::new(grid);

        let bad = FitConfig {
            max_epochs: 0,
            ..base.clone()
        };
        assert!(matches!(fit(&m, &data, &bad, 0), Err(Error::Config(_))));
        let bad = FitConfig {
            loss_threshold: -1.0,
            ..base.clone()
        };
        assert!(matches!(fit(&m, &data, &bad, 0), Err(Error::Config(_))));
        let bad = FitConfig {
            theta_init: ThetaInit::Fixed(vec![1.0]),
            ..base.clone()
        };
        assert!(matches!(fit(&m, &data, &bad, 0), Err(Error::Config(_))));
        let bad = FitConfig {
            tau_init: TauInit::Fixed(-0.5),
            ..base.clone()
        };
        assert!(matches!(fit(&m, &data, &bad, 0), Err(Error::Config(_))));
        let bad = FitConfig {
            tau_bounds: (0.001, 5.0),
            ..base.clone()
        };
        assert!(matches!(fit(&m, &data, &bad, 0), Err(Error::Config(_))));
        let bad = FitConfig {
            adam: AdamHyper {
                lr: 0.0,
                ..Default::default()
            },
            ..base
        };
        assert!(matches!(fit(&m, &data, &bad, 0), Err(Error::Config(_))));
    }

    /// rhs that diverges as soon as θ₁ leaves the pinned value 1.0 — for
    /// exercising the blow-up recovery paths deterministically.
    fn knife_edge() -> ModelSpec {
        ModelSpec {
            name: "knife-edge".into(),
            dim_state: 1,
            dim_theta: 1,
            rhs: Box::new(|x, _y, th| {
                if th[0] == 1.0 {
                    vec![-x[0]]
                } else {
                    vec![f64::INFINITY]
                }
            }),
            d_rhs_dx: Box::new(|_x, _y, _th| vec![vec![-1.0]]),
            d_rhs_dy: Box::new(|_x, _y, _th| vec![vec![0.0]]),
            d_rhs_dtheta: Box::new(|x, _y, _th| vec![vec![x[0]]]),
        }
    }

    #[test]
    fn persistent_blowups_abort_with_a_fit_error() {
        let m = knife_edge();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        // data that the θ = 1 trajectory does not match, so epoch 1 takes a
        // gradient step off the knife edge and every later epoch blows up
        let data =
            DataSet::new(vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![5.0], vec![5.0]]).unwrap();
        let config = FitConfig {
            theta_init: ThetaInit::Fixed(vec![1.0]),
            tau_init: TauInit::Fixed(0.5),
            max_epochs: 50,
            loss_threshold: 0.0,
            ..FitConfig::new(grid)
        };
        match fit(&m, &data, &config, 0) {
            Err(Error::Fit(msg)) => assert!(msg.contains("consecutive"), "{msg}"),
            other => panic!("expected a fit error, got {other:?}"),
        }
    }

    #[test]
    fn a_blowup_at_the_first_epoch_is_an_immediate_error() {
        let m = knife_edge();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let data =
            DataSet::new(vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![5.0], vec![5.0]]).unwrap();
        let config = FitConfig {
            theta_init: ThetaInit::Fixed(vec![2.0]),
            tau_init: TauInit::Fixed(0.5),
            ..FitConfig::new(grid)
        };
        match fit(&m, &data, &config, 0) {
            Err(Error::Fit(msg)) => assert!(msg.contains("initial iterate"), "{msg}"),
            other => panic!("expected a fit error, got {other:?}"),
        }
    }

    #[test]
    fn axis_values_hit_both_endpoints_exactly() {
        let v = AxisSpec {
            start: 0.5,
            stop: 2.0,
            count: 151,
        }
        .values()
        .unwrap();
        assert_eq!(v.len(), 151);
        assert_eq!(v[0], 0.5);
        assert_eq!(v[150], 2.0);
        assert_eq!(
            AxisSpec {
                start: 1.0,
                stop: 9.0,
                count: 1
            }
            .values()
            .unwrap(),
            vec![1.0]
        );
        assert!(AxisSpec {
            start: 1.0,
            stop: 2.0,
            count: 0
        }
        .values()
        .is_err());
        assert!(AxisSpec {
            start: 2.0,
            stop: 1.0,
            count: 3
        }
        .values()
        .is_err());
    }

    #[test]
    fn one_by_one_scan_at_the_truth_is_exactly_zero() {
        let m = logistic_model();
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 10).unwrap();
        let scan = scan_landscape(
            &m,
            &data,
            (
                0,
                AxisSpec {
                    start: 1.0,
                    stop: 1.0,
                    count: 1,
                },
            ),
            AxisSpec {
                start: 1.0,
                stop: 1.0,
                count: 1,
            },
            &FrozenAssignment {
                theta: vec![1.0, 1.0],
                tau: 1.0,
            },
            &grid,
        )
        .unwrap();
        assert_eq!(scan.losses, vec![vec![0.0]]);
        assert_eq!(scan.argmin(), Some((0, 0)));
    }

    #[test]
    fn tau_scan_has_its_minimum_at_the_true_delay() {
        let m = logistic_model();
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 10).unwrap();
        let scan = scan_landscape(
            &m,
            &data,
            (
                0,
                AxisSpec {
                    start: 1.0,
                    stop: 1.0,
                    count: 1,
                },
            ),
            AxisSpec {
                start: 0.5,
                stop: 2.0,
                count: 16,
            },
            &FrozenAssignment {
                theta: vec![1.0, 1.0],
                tau: 1.0,
            },
            &grid,
        )
        .unwrap();
        let (_, j) = scan.argmin().unwrap();
        assert!(
            (scan.tau_values[j] - 1.0).abs() <= 0.1 + 1e-12,
            "argmin at {}",
            scan.tau_values[j]
        );
    }

    #[test]
    fn blown_up_cells_are_infinity_markers_not_errors() {
        let m = knife_edge();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let data = DataSet::new(vec![0.0, 1.0], vec![vec![1.0], vec![0.4]]).unwrap();
        let scan = scan_landscape(
            &m,
            &data,
            (
                0,
                AxisSpec {
                    start: 1.0,
                    stop: 1.5,
                    count: 2,
                },
            ),
            AxisSpec {
                start: 0.5,
                stop: 0.5,
                count: 1,
            },
            &FrozenAssignment {
                theta: vec![1.0],
                tau: 0.5,
            },
            &grid,
        )
        .unwrap();
        assert!(scan.losses[0][0].is_finite());
        assert_eq!(scan.losses[1][0], f64::INFINITY);
        assert_eq!(scan.argmin(), Some((0, 0)));
    }

    #[test]
    fn scans_are_bit_reproducible() {
        let m = logistic_model();
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 30).unwrap();
        let run = || {
            scan_landscape(
                &m,
                &data,
                (
                    1,
                    AxisSpec {
                        start: 0.5,
                        stop: 1.5,
                        count: 7,
                    },
                ),
                AxisSpec {
                    start: 0.6,
                    stop: 1.8,
                    count: 5,
                },
                &FrozenAssignment {
                    theta: vec![1.0, 1.0],
                    tau: 1.0,
                },
                &grid,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scan_rejects_bad_axes() {
        let m = logistic_model();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let data = sample_dataset(&m, &[1.0, 1.0], 0.5, &[2.0], &grid, 10).unwrap();
        let frozen = FrozenAssignment {
            theta: vec![1.0, 1.0],
            tau: 0.5,
        };
        // θ index out of range
        let err = scan_landscape(
            &m,
            &data,
            (
                2,
                AxisSpec {
                    start: 0.0,
                    stop: 1.0,
                    count: 2,
                },
            ),
            AxisSpec {
                start: 0.5,
                stop: 0.5,
                count: 1,
            },
            &frozen,
            &grid,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // τ below dt
        let err = scan_landscape(
            &m,
            &data,
            (
                0,
                AxisSpec {
                    start: 1.0,
                    stop: 1.0,
                    count: 1,
                },
            ),
            AxisSpec {
                start: 0.001,
                stop: 0.5,
                count: 3,
            },
            &frozen,
            &grid,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        // lr = 0 makes adam_step the identity on params
        #[test]
        fn zero_learning_rate_is_the_identity(
            p in proptest::collection::vec(-5.0f64..5.0, 1..4),
            g in proptest::collection::vec(-5.0f64..5.0, 1..4),
        ) {
            let dim = p.len().min(g.len());
            let p = &p[..dim];
            let g = &g[..dim];
            let state = AdamState::new(
                AdamHyper { lr: 0.0, ..Default::default() },
                dim,
            ).unwrap();
            let (_, out) = adam_step(state, p, g).unwrap();
            prop_assert_eq!(out, p.to_vec());
        }
    }
}
