//! Configuration files, data files, and the command implementations behind
//! the `ddefit` binary.
//!
//! Commands are thin: they gather settings (TOML file first, command-line
//! flags override, environment never consulted), validate paths up front,
//! call into the library, and write machine-readable outputs. All numeric
//! output is rendered with 17 significant digits so files round-trip
//! bit-exactly, and every file write is atomic (write-then-rename).

use crate::error::{Error, Result};
use crate::gradcheck::{gradcheck, DEFAULT_FD_STEP};
use crate::grid::TimeGrid;
use crate::loss::{sample_dataset, DataSet};
use crate::model::{model_by_name, ModelSpec};
use crate::optimize::{
    fit, scan_landscape, AdamHyper, AxisSpec, FitConfig, FitResult, FrozenAssignment, TauInit,
    ThetaInit,
};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Flat key-value settings document. Every command reads the subset it
/// needs; unknown keys are rejected so typos cannot silently change an
/// experiment.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub theta: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub sample_every: Option<usize>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    // fitting
    pub theta_init: Option<Vec<f64>>,
    pub tau_init: Option<f64>,
    pub max_epochs: Option<usize>,
    pub loss_threshold: Option<f64>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    // gradient checking
    pub fd_step: Option<f64>,
    pub tol: Option<f64>,
    // landscape scanning
    pub theta_index: Option<usize>,
    pub theta_start: Option<f64>,
    pub theta_stop: Option<f64>,
    pub theta_count: Option<usize>,
    pub tau_start: Option<f64>,
    pub tau_stop: Option<f64>,
    pub tau_count: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)?;
        Ok(cfg)
    }
}

fn require<T: Clone>(opt: &Option<T>, key: &str) -> Result<T> {
    opt.clone().ok_or_else(|| {
        Error::Config(format!(
            "missing required setting '{key}' (config key or --{} flag)",
            key.replace('_', "-")
        ))
    })
}

fn resolve_model(cfg: &RunConfig) -> Result<ModelSpec> {
    let name = require(&cfg.model, "model")?;
    model_by_name(&name).ok_or_else(|| {
        Error::Config(format!(
            "unknown model '{name}' (available: logistic, linear)"
        ))
    })
}

/// `t_end` falls back to the last data timestamp when the config omits it.
fn resolve_grid(cfg: &RunConfig, data: Option<&DataSet>) -> Result<TimeGrid> {
    let dt = require(&cfg.dt, "dt")?;
    let t_end = match cfg.t_end {
        Some(t) => t,
        None => match data {
            Some(d) => *d.times().last().unwrap(),
            None => return Err(Error::Config("missing required setting 't_end'".into())),
        },
    };
    TimeGrid::new(t_end, dt)
}

/// Reject unusable output locations before any numerics run.
fn validate_out_path(path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::Config("output path is empty".into()));
    }
    let parent = path.parent().unwrap_or_else(|| Path::new(""));
    if !parent.as_os_str().is_empty() && !parent.is_dir() {
        return Err(Error::Config(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(Error::Config(format!(
            "output path {} is a directory",
            path.display()
        )));
    }
    Ok(())
}

/// Write `contents` to `path` atomically: the bytes land under a temporary
/// name in the same directory and are renamed into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Full-precision decimal rendering: 17 significant digits, so parsing the
/// text recovers the original bits; infinities appear as the literal "inf".
fn render_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize a dataset in the trajectory CSV schema: header
/// `t,x0,...,x{n-1}`, one row per sample, full-precision values.
pub fn dataset_to_csv(data: &DataSet) -> String {
    let n = data.dim();
    let mut out = String::from("t");
    for i in 0..n {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (t, row) in data.times().iter().zip(data.values().iter()) {
        let _ = write!(out, "{}", render_f64(*t));
        for v in row {
            let _ = write!(out, ",{}", render_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Parse the trajectory CSV schema back into a dataset.
pub fn dataset_from_csv_path(path: &Path) -> Result<DataSet> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open data file {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || &headers[0] != "t" {
        return Err(Error::Config(format!(
            "data file {} must start with the header column 't'",
            path.display()
        )));
    }
    let n = headers.len() - 1;
    if n == 0 {
        return Err(Error::Config(format!(
            "data file {} has no state columns",
            path.display()
        )));
    }
    for i in 0..n {
        let expect = format!("x{i}");
        if &headers[i + 1] != expect.as_str() {
            return Err(Error::Config(format!(
                "data file {} column {} is named '{}', expected '{expect}'",
                path.display(),
                i + 1,
                &headers[i + 1]
            )));
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != n + 1 {
            return Err(Error::Config(format!(
                "data file {} row {} has {} fields, expected {}",
                path.display(),
                line + 2,
                record.len(),
                n + 1
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "data file {} row {}: cannot parse {what} value '{s}'",
                    path.display(),
                    line + 2
                ))
            })
        };
        times.push(parse(&record[0], "time")?);
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            row.push(parse(&record[i + 1], "state")?);
        }
        values.push(row);
    }
    DataSet::new(times, values)
}

/// What a finished command asks the process to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandOutcome {
    /// Everything succeeded (exit 0).
    Success,
    /// The command ran, but its check did not pass: a fit that did not
    /// converge or a gradient check that failed (exit 1).
    CheckFailed,
}

/// Integrate a model forward and write the sampled trajectory as CSV.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutcome> {
    let out = require(&cfg.out, "out")?;
    validate_out_path(&out)?;
    let model = resolve_model(cfg)?;
    let theta = require(&cfg.theta, "theta")?;
    let tau = require(&cfg.tau, "tau")?;
    let x0 = require(&cfg.x0, "x0")?;
    let grid = resolve_grid(cfg, None)?;
    let sample_every = cfg.sample_every.unwrap_or(1);

    let data = sample_dataset(&model, &theta, tau, &x0, &grid, sample_every)?;
    write_atomic(&out, &dataset_to_csv(&data))?;
    Ok(CommandOutcome::Success)
}

fn fit_config_from(cfg: &RunConfig, grid: TimeGrid) -> FitConfig {
    let defaults = FitConfig::new(grid);
    let adam = AdamHyper {
        lr: cfg.lr.unwrap_or(defaults.adam.lr),
        beta1: cfg.beta1.unwrap_or(defaults.adam.beta1),
        beta2: cfg.beta2.unwrap_or(defaults.adam.beta2),
        epsilon: cfg.epsilon.unwrap_or(defaults.adam.epsilon),
    };
    FitConfig {
        theta_init: match &cfg.theta_init {
            Some(v) => ThetaInit::Fixed(v.clone()),
            None => ThetaInit::Uniform,
        },
        tau_init: match cfg.tau_init {
            Some(t) => TauInit::Fixed(t),
            None => TauInit::Uniform,
        },
        max_epochs: cfg.max_epochs.unwrap_or(defaults.max_epochs),
        loss_threshold: cfg.loss_threshold.unwrap_or(defaults.loss_threshold),
        tau_bounds: (
            cfg.tau_min.unwrap_or(defaults.tau_bounds.0),
            cfg.tau_max.unwrap_or(defaults.tau_bounds.1),
        ),
        grid: defaults.grid,
        adam,
    }
}

fn fit_result_to_json(result: &FitResult) -> String {
    let iterates: Vec<Vec<f64>> = result
        .iterate_history
        .iter()
        .map(|(theta, tau)| {
            let mut row = theta.clone();
            row.push(*tau);
            row
        })
        .collect();
    let doc = serde_json::json!({
        "theta": result.theta,
        "tau": result.tau,
        "final_loss": result.final_loss,
        "epochs_used": result.epochs_used,
        "converged": result.converged,
        "loss_history": result.loss_history,
        "iterate_history": iterates,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("fit result serializes");
    text.push('\n');
    text
}

/// Fit a model to a data file and write the result document as JSON.
/// Reports [`CommandOutcome::CheckFailed`] when the fit did not converge.
pub fn cmd_fit(cfg: &RunConfig) -> Result<CommandOutcome> {
    let out = require(&cfg.out, "out")?;
    validate_out_path(&out)?;
    let model = resolve_model(cfg)?;
    let data_path = require(&cfg.data, "data")?;
    let data = dataset_from_csv_path(&data_path)?;
    let grid = resolve_grid(cfg, Some(&data))?;
    let fit_config = fit_config_from(cfg, grid);
    let seed = cfg.seed.unwrap_or(0);

    let result = fit(&model, &data, &fit_config, seed)?;
    write_atomic(&out, &fit_result_to_json(&result))?;
    if result.converged {
        Ok(CommandOutcome::Success)
    } else {
        Ok(CommandOutcome::CheckFailed)
    }
}

/// Compare adjoint and finite-difference gradients at one probe point and
/// write the report as JSON. Reports [`CommandOutcome::CheckFailed`] when
/// the comparison exceeds the tolerance.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<CommandOutcome> {
    let out = require(&cfg.out, "out")?;
    validate_out_path(&out)?;
    let model = resolve_model(cfg)?;
    let theta = require(&cfg.theta, "theta")?;
    let tau = require(&cfg.tau, "tau")?;
    let data_path = require(&cfg.data, "data")?;
    let data = dataset_from_csv_path(&data_path)?;
    let grid = resolve_grid(cfg, Some(&data))?;
    let fd_step = cfg.fd_step.unwrap_or(DEFAULT_FD_STEP);
    let tol = cfg.tol.unwrap_or(1e-2);

    let report = gradcheck(&model, &theta, tau, &data, &grid, fd_step, tol)?;
    let doc = serde_json::json!({
        "analytic": {
            "d_theta": report.analytic.d_theta,
            "d_tau": report.analytic.d_tau,
            "d_x0": report.analytic.d_x0,
        },
        "numeric": {
            "d_theta": report.numeric.d_theta,
            "d_tau": report.numeric.d_tau,
            "d_x0": report.numeric.d_x0,
        },
        "rel_errors": report.rel_errors,
        "fd_step": report.fd_step,
        "dt": report.dt,
        "passed": report.passed,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("gradcheck report serializes");
    text.push('\n');
    write_atomic(&out, &text)?;
    if report.passed {
        Ok(CommandOutcome::Success)
    } else {
        Ok(CommandOutcome::CheckFailed)
    }
}

/// Evaluate the loss over a (θ component × τ) grid and write
/// `theta{i},tau,loss` rows; blown-up cells carry the literal loss "inf".
pub fn cmd_landscape(cfg: &RunConfig) -> Result<CommandOutcome> {
    let out = require(&cfg.out, "out")?;
    validate_out_path(&out)?;
    let model = resolve_model(cfg)?;
    let frozen_theta = require(&cfg.theta, "theta")?;
    let frozen_tau = require(&cfg.tau, "tau")?;
    let data_path = require(&cfg.data, "data")?;
    let data = dataset_from_csv_path(&data_path)?;
    let grid = resolve_grid(cfg, Some(&data))?;

    let theta_index = cfg.theta_index.unwrap_or(0);
    let theta_axis = match (cfg.theta_start, cfg.theta_stop, cfg.theta_count) {
        (None, None, None) => {
            let pin = *frozen_theta.get(theta_index).ok_or_else(|| {
                Error::Config(format!(
                    "theta_index = {theta_index} is out of range for theta of length {}",
                    frozen_theta.len()
                ))
            })?;
            AxisSpec {
                start: pin,
                stop: pin,
                count: 1,
            }
        }
        (Some(start), Some(stop), Some(count)) => AxisSpec { start, stop, count },
        _ => {
            return Err(Error::Config(
                "a theta scan needs all of theta_start, theta_stop, theta_count".into(),
            ))
        }
    };
    let tau_axis = match (cfg.tau_start, cfg.tau_stop, cfg.tau_count) {
        (None, None, None) => AxisSpec {
            start: frozen_tau,
            stop: frozen_tau,
            count: 1,
        },
        (Some(start), Some(stop), Some(count)) => AxisSpec { start, stop, count },
        _ => {
            return Err(Error::Config(
                "a tau scan needs all of tau_start, tau_stop, tau_count".into(),
            ))
        }
    };

    let frozen = FrozenAssignment {
        theta: frozen_theta,
        tau: frozen_tau,
    };
    let scan = scan_landscape(
        &model,
        &data,
        (theta_index, theta_axis),
        tau_axis,
        &frozen,
        &grid,
    )?;

    let mut text = format!("theta{theta_index},tau,loss\n");
    for (i, &tv) in scan.theta_values.iter().enumerate() {
        for (j, &tau) in scan.tau_values.iter().enumerate() {
            let _ = writeln!(
                text,
                "{},{},{}",
                render_f64(tv),
                render_f64(tau),
                render_f64(scan.losses[i][j])
            );
        }
    }
    write_atomic(&out, &text)?;
    Ok(CommandOutcome::Success)
}
