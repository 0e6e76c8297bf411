//! Trajectory-matching loss and dataset handling.
//!
//! The loss is the unnormalized sum of squared residuals
//! `L = Σ_j ‖X_j − x(t_j)‖²` over a set of timestamped measurements. Data
//! times must land on solver grid nodes (within a small snap tolerance):
//! the gradient machinery indexes trajectory nodes directly, and node
//! alignment is what keeps per-data-time adjoint solves exact. Choose `dt`
//! to divide the data intervals, or construction fails with the offending
//! timestamp.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::solver::{solve_forward, Trajectory};

/// Relative (to dt) snap tolerance for aligning data times to grid nodes.
pub const DATA_SNAP_REL: f64 = 1e-9;

/// Timestamped measurements `{(t_j, X_j)}`.
///
/// Times are strictly increasing with `t_0 = 0`; the first measurement
/// `X_0` doubles as the constant initial history of the fitted DDE.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl DataSet {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Config(format!(
                "dataset has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Config("dataset needs at least 2 points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Config(format!(
                "dataset must start at t = 0, got t_0 = {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "dataset times must be strictly increasing".into(),
            ));
        }
        let n = values[0].len();
        if n == 0 || values.iter().any(|v| v.len() != n) {
            return Err(Error::Config(
                "dataset values must share one nonzero dimension".into(),
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("dataset values must be finite".into()));
        }
        Ok(DataSet { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires ≥ 2 points
    }

    /// State dimension of the measurements.
    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// The constant initial history: the first measurement.
    pub fn initial_history(&self) -> &[f64] {
        &self.values[0]
    }

    /// Map every data time onto its grid node, failing with the first
    /// timestamp that is off-grid or beyond the horizon.
    pub fn node_indices(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        self.times
            .iter()
            .map(|&t| {
                if t > grid.t_end + DATA_SNAP_REL * grid.dt {
                    return Err(Error::OutOfRange {
                        t,
                        lo: grid.t_start,
                        hi: grid.t_end,
                    });
                }
                grid.node_index(t, DATA_SNAP_REL).ok_or_else(|| {
                    Error::Config(format!(
                        "data time t = {t} does not lie on a grid node (dt = {})",
                        grid.dt
                    ))
                })
            })
            .collect()
    }
}

/// The evaluated loss: the total and its per-measurement terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub per_point: Vec<f64>,
}

/// Sum of squared residuals between the trajectory and the dataset:
/// `total = Σ_j Σ_i (X_j^i − x^i(t_j))²`, no normalization.
pub fn loss_discrete(forward: &Trajectory, data: &DataSet) -> Result<LossValue> {
    if data.dim() != forward.dim() {
        return Err(Error::Config(format!(
            "dataset dimension {} does not match trajectory dimension {}",
            data.dim(),
            forward.dim()
        )));
    }
    let idx = data.node_indices(&forward.grid)?;
    let per_point: Vec<f64> = idx
        .iter()
        .zip(data.values.iter())
        .map(|(&k, x_meas)| {
            x_meas
                .iter()
                .zip(forward.states[k].iter())
                .map(|(m, x)| (m - x) * (m - x))
                .sum()
        })
        .collect();
    let total = per_point.iter().sum();
    Ok(LossValue { total, per_point })
}

/// Running-cost integrand `ℓ(t, x)` of a general cost functional.
pub type RunningCost = dyn Fn(f64, &[f64]) -> f64 + Sync;

/// Terminal cost `g(x(T))` of a general cost functional.
pub type TerminalCost = dyn Fn(&[f64]) -> f64 + Sync;

/// General cost functional `L = ∫₀ᵀ ℓ(t, x(t)) dt + g(x(T))`, with the
/// integral taken by the right-endpoint rule `dt·Σ_{k≥1} ℓ(t_k, x_k)`. This
/// matches how the backward pass accumulates the running-cost term, so
/// finite differences of this evaluator are the right oracle for the
/// general-cost gradients.
pub fn loss_general(
    forward: &Trajectory,
    running_cost: Option<&RunningCost>,
    terminal_cost: Option<&TerminalCost>,
) -> f64 {
    let mut total = 0.0;
    if let Some(ell) = running_cost {
        for k in 1..forward.states.len() {
            total += forward.grid.dt * ell(forward.grid.node_time(k), &forward.states[k]);
        }
    }
    if let Some(g) = terminal_cost {
        total += g(forward.states.last().unwrap());
    }
    total
}

/// Solve the model forward and keep every `sample_every`-th node (starting
/// at t = 0) as a synthetic dataset.
pub fn sample_dataset(
    model: &ModelSpec,
    theta: &[f64],
    tau: f64,
    x0: &[f64],
    grid: &TimeGrid,
    sample_every: usize,
) -> Result<DataSet> {
    if sample_every < 1 {
        return Err(Error::Config("sample_every must be at least 1".into()));
    }
    let traj = solve_forward(model, theta, tau, x0, grid)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut k = 0;
    while k <= grid.n_steps {
        times.push(grid.node_time(k));
        values.push(traj.states[k].clone());
        k += sample_every;
    }
    DataSet::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linear_model, logistic_model};
    use crate::solver::solve_forward_reference;
    use proptest::prelude::*;

    #[test]
    fn loss_vanishes_on_data_sampled_from_the_trajectory() {
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let m = logistic_model();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 50).unwrap();
        let traj = solve_forward(&m, &[1.0, 1.0], 1.0, &[2.0], &grid).unwrap();
        let loss = loss_discrete(&traj, &data).unwrap();
        assert_eq!(loss.total, 0.0);
        assert!(loss.per_point.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn squared_residual_by_hand() {
        // measurement 3 against trajectory value 1 → (3−1)² = 4
        let grid = TimeGrid::new(1.0, 0.5).unwrap();
        let traj = Trajectory {
            grid: grid.clone(),
            states: vec![vec![1.0], vec![1.0], vec![1.0]],
            x0: vec![1.0],
        };
        let data = DataSet::new(vec![0.0, 1.0], vec![vec![1.0], vec![3.0]]).unwrap();
        let loss = loss_discrete(&traj, &data).unwrap();
        assert_eq!(loss.per_point, vec![0.0, 4.0]);
        assert_eq!(loss.total, 4.0);
    }

    #[test]
    fn off_grid_and_out_of_range_times_are_rejected() {
        let grid = TimeGrid::new(1.0, 0.25).unwrap();
        let traj = Trajectory {
            grid,
            states: vec![vec![0.0]; 5],
            x0: vec![0.0],
        };
        let off = DataSet::new(vec![0.0, 0.3], vec![vec![0.0], vec![0.0]]).unwrap();
        match loss_discrete(&traj, &off) {
            Err(Error::Config(msg)) => assert!(msg.contains("0.3"), "message: {msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
        let late = DataSet::new(vec![0.0, 1.25], vec![vec![0.0], vec![0.0]]).unwrap();
        assert!(matches!(
            loss_discrete(&traj, &late),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn dataset_validation() {
        assert!(DataSet::new(vec![0.0], vec![vec![1.0]]).is_err()); // too short
        assert!(DataSet::new(vec![0.5, 1.0], vec![vec![1.0], vec![1.0]]).is_err()); // t0 ≠ 0
        assert!(DataSet::new(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err()); // not increasing
        assert!(DataSet::new(vec![0.0, 1.0], vec![vec![1.0]]).is_err()); // length mismatch
        assert!(DataSet::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0, 2.0]]).is_err()); // ragged
        assert!(DataSet::new(vec![0.0, 1.0], vec![vec![1.0], vec![f64::NAN]]).is_err());
        let ok = DataSet::new(vec![0.0, 1.0], vec![vec![1.5], vec![2.0]]).unwrap();
        assert_eq!(ok.initial_history(), &[1.5]);
    }

    #[test]
    fn sampling_density_and_constant_fields() {
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let m = crate::model::model_from_rhs_fd("null", |_x, _y, _th| vec![0.0], 1, 0, 1e-6);
        let all = sample_dataset(&m, &[], 0.5, &[7.0], &grid, 1).unwrap();
        assert_eq!(all.len(), grid.n_steps + 1);
        assert!(all.values().iter().all(|v| v == &vec![7.0]));
        assert!(sample_dataset(&m, &[], 0.5, &[7.0], &grid, 0).is_err());
    }

    #[test]
    fn benchmark_sampling_matches_the_fine_reference() {
        // 101 points from the logistic benchmark; cross-check values against
        // a 16× refined solve.
        let grid = TimeGrid::new(10.0, 0.01).unwrap();
        let m = logistic_model();
        let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 10).unwrap();
        assert_eq!(data.len(), 101);
        let reference = solve_forward_reference(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 16).unwrap();
        for (&t, v) in data.times().iter().zip(data.values().iter()) {
            let k = grid.node_index(t, 1e-9).unwrap();
            assert!(
                (v[0] - reference.states[k][0]).abs() < 2e-2,
                "sample at t = {t} drifts from reference"
            );
        }
    }

    #[test]
    fn general_cost_right_endpoint_rule() {
        // constant trajectory: ∫ x dt = T·x0, terminal x² adds x0²
        let grid = TimeGrid::new(2.0, 0.1).unwrap();
        let traj = Trajectory {
            grid,
            states: vec![vec![3.0]; 21],
            x0: vec![3.0],
        };
        let l = loss_general(&traj, Some(&|_t, x| x[0]), Some(&|x| x[0] * x[0]));
        assert!((l - (2.0 * 3.0 + 9.0)).abs() < 1e-12);
        assert_eq!(loss_general(&traj, None, None), 0.0);
    }

    #[test]
    fn linear_benchmark_loss_is_positive_off_truth() {
        let grid = TimeGrid::new(10.0, 0.01).unwrap();
        let m = linear_model();
        let data = sample_dataset(&m, &[-2.0, -2.0], 1.0, &[-1.0], &grid, 10).unwrap();
        let off = solve_forward(&m, &[-2.5, -2.0], 1.0, &[-1.0], &grid).unwrap();
        assert!(loss_discrete(&off, &data).unwrap().total > 0.0);
    }

    proptest! {
        // total is the sum of per-point terms and never negative
        #[test]
        fn loss_total_sums_per_point(
            t1 in 0.6f64..1.4,
            t2 in 0.6f64..1.4,
        ) {
            let grid = TimeGrid::new(3.0, 0.01).unwrap();
            let m = logistic_model();
            let data = sample_dataset(&m, &[1.0, 1.0], 1.0, &[2.0], &grid, 30).unwrap();
            let traj = solve_forward(&m, &[t1, t2], 1.0, &[2.0], &grid).unwrap();
            let loss = loss_discrete(&traj, &data).unwrap();
            prop_assert!(loss.total >= 0.0);
            let sum: f64 = loss.per_point.iter().sum();
            prop_assert!((loss.total - sum).abs() <= 1e-12 * sum.max(1.0));
        }
    }
}
