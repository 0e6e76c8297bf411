//! Command-line front end: `simulate | fit | gradcheck | landscape`.
//!
//! Settings come from an optional TOML config file (`--config`), with any
//! command-line flag overriding the file. Exit codes: 0 success (fit
//! converged / check passed), 1 completed-but-failed check, 2 usage or
//! configuration error, 3 numerical blow-up.

use clap::{Args, Parser, Subcommand};
use ddefit::cli::{cmd_fit, cmd_gradcheck, cmd_landscape, cmd_simulate, CommandOutcome, RunConfig};
use ddefit::error::Result;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "ddefit",
    version,
    about = "Simulate delay differential equations and learn their delay and parameters from data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a model forward and write the (optionally subsampled) trajectory as CSV
    Simulate(SimulateArgs),
    /// Fit parameters and delay to a trajectory CSV; write a JSON result (exit 0 iff converged)
    Fit(FitArgs),
    /// Compare adjoint gradients against finite differences (exit 0 iff the check passes)
    Gradcheck(GradcheckArgs),
    /// Tabulate the loss over a (theta, tau) grid as CSV rows
    Landscape(LandscapeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML settings file; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name: "logistic" or "linear"
    #[arg(long)]
    model: Option<String>,
    /// Model parameters, comma separated (e.g. --theta 1,1)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Delay
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Constant initial history, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Integration horizon
    #[arg(long = "t-end", allow_hyphen_values = true)]
    t_end: Option<f64>,
    /// Grid step
    #[arg(long)]
    dt: Option<f64>,
    /// Keep every k-th node (1 = full trajectory)
    #[arg(long = "sample-every")]
    sample_every: Option<usize>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// TOML settings file; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name: "logistic" or "linear"
    #[arg(long)]
    model: Option<String>,
    /// Input data CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output JSON path
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed for random initialization (default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Initial theta, comma separated; omit to draw from U(-2, 2)
    #[arg(long = "theta-init", value_delimiter = ',', allow_hyphen_values = true)]
    theta_init: Option<Vec<f64>>,
    /// Initial tau; omit to draw from U(-2, 2) truncated positive
    #[arg(long = "tau-init", allow_hyphen_values = true)]
    tau_init: Option<f64>,
    /// Epoch budget (default 500)
    #[arg(long = "max-epochs")]
    max_epochs: Option<usize>,
    /// Stop once the loss reaches this value (default 0.01)
    #[arg(long = "loss-threshold")]
    loss_threshold: Option<f64>,
    /// Adam learning rate (default 0.05)
    #[arg(long)]
    lr: Option<f64>,
    /// Adam first-moment decay (default 0.9)
    #[arg(long)]
    beta1: Option<f64>,
    /// Adam second-moment decay (default 0.999)
    #[arg(long)]
    beta2: Option<f64>,
    /// Adam stabilizer (default 1e-8)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Lower clamp for tau iterates (default 2*dt)
    #[arg(long = "tau-min")]
    tau_min: Option<f64>,
    /// Upper clamp for tau iterates (default t_end/2)
    #[arg(long = "tau-max")]
    tau_max: Option<f64>,
    /// Integration horizon (default: last data time)
    #[arg(long = "t-end", allow_hyphen_values = true)]
    t_end: Option<f64>,
    /// Grid step
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// TOML settings file; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name: "logistic" or "linear"
    #[arg(long)]
    model: Option<String>,
    /// Probe theta, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Probe tau
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Input data CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output JSON path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration horizon (default: last data time)
    #[arg(long = "t-end", allow_hyphen_values = true)]
    t_end: Option<f64>,
    /// Grid step
    #[arg(long)]
    dt: Option<f64>,
    /// Central-difference step (default 1e-5)
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
    /// Pass/fail tolerance on the worst relative error (default 1e-2)
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct LandscapeArgs {
    /// TOML settings file; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name: "logistic" or "linear"
    #[arg(long)]
    model: Option<String>,
    /// Frozen theta (full vector), comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Frozen tau (base value when tau is not scanned)
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Input data CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration horizon (default: last data time)
    #[arg(long = "t-end", allow_hyphen_values = true)]
    t_end: Option<f64>,
    /// Grid step
    #[arg(long)]
    dt: Option<f64>,
    /// Which theta component the scan varies (default 0)
    #[arg(long = "theta-index")]
    theta_index: Option<usize>,
    /// Theta axis start
    #[arg(long = "theta-start", allow_hyphen_values = true)]
    theta_start: Option<f64>,
    /// Theta axis stop
    #[arg(long = "theta-stop", allow_hyphen_values = true)]
    theta_stop: Option<f64>,
    /// Theta axis point count
    #[arg(long = "theta-count")]
    theta_count: Option<usize>,
    /// Tau axis start
    #[arg(long = "tau-start", allow_hyphen_values = true)]
    tau_start: Option<f64>,
    /// Tau axis stop
    #[arg(long = "tau-stop", allow_hyphen_values = true)]
    tau_stop: Option<f64>,
    /// Tau axis point count
    #[arg(long = "tau-count")]
    tau_count: Option<usize>,
}

fn base_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_toml_path(p),
        None => Ok(RunConfig::default()),
    }
}

macro_rules! override_fields {
    ($cfg:expr, $args:expr, [$($field:ident),+ $(,)?]) => {
        $(if $args.$field.is_some() {
            $cfg.$field = $args.$field.clone();
        })+
    };
}

fn run(cli: Cli) -> Result<CommandOutcome> {
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg = base_config(&args.config)?;
            override_fields!(
                cfg,
                args,
                [model, theta, tau, x0, t_end, dt, sample_every, out]
            );
            cmd_simulate(&cfg)
        }
        Command::Fit(args) => {
            let mut cfg = base_config(&args.config)?;
            override_fields!(
                cfg,
                args,
                [
                    model,
                    data,
                    out,
                    seed,
                    theta_init,
                    tau_init,
                    max_epochs,
                    loss_threshold,
                    lr,
                    beta1,
                    beta2,
                    epsilon,
                    tau_min,
                    tau_max,
                    t_end,
                    dt,
                ]
            );
            cmd_fit(&cfg)
        }
        Command::Gradcheck(args) => {
            let mut cfg = base_config(&args.config)?;
            override_fields!(
                cfg,
                args,
                [model, theta, tau, data, out, t_end, dt, fd_step, tol]
            );
            cmd_gradcheck(&cfg)
        }
        Command::Landscape(args) => {
            let mut cfg = base_config(&args.config)?;
            override_fields!(
                cfg,
                args,
                [
                    model,
                    theta,
                    tau,
                    data,
                    out,
                    t_end,
                    dt,
                    theta_index,
                    theta_start,
                    theta_stop,
                    theta_count,
                    tau_start,
                    tau_stop,
                    tau_count,
                ]
            );
            cmd_landscape(&cfg)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(CommandOutcome::Success) => 0,
        Ok(CommandOutcome::CheckFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
