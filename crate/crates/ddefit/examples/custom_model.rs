//! Bring your own dynamics: define a model from just its right-hand side,
//! with Jacobians filled in by finite differences, and recover its delay
//! and parameter from data.
//!
//! The model here is a delayed Gompertz-style growth law
//! `x' = th1 * x * ln(K / x(t - tau))` with K fixed at 3.
//!
//! Run with: `cargo run --release --example custom_model`

use ddefit::{
    fit, model_from_rhs_fd, sample_dataset, FitConfig, Result, TauInit, ThetaInit, TimeGrid,
};

fn main() -> Result<()> {
    let model = model_from_rhs_fd(
        "delayed-gompertz",
        |x, y, th| vec![th[0] * x[0] * (3.0 / y[0].max(1e-12)).ln()],
        1, // state dimension
        1, // parameter dimension
        1e-6,
    );

    let grid = TimeGrid::new(10.0, 0.01)?;
    let data = sample_dataset(&model, &[0.8], 0.7, &[0.5], &grid, 10)?;
    println!(
        "data: {} samples from (theta, tau) = (0.8, 0.7)",
        data.len()
    );

    let mut config = FitConfig {
        theta_init: ThetaInit::Fixed(vec![1.6]),
        tau_init: TauInit::Fixed(1.5),
        max_epochs: 500,
        loss_threshold: 1e-3,
        ..FitConfig::new(grid)
    };
    // The loss surface has a long shallow valley toward the truth; the
    // default step of 0.05 crawls along it, while 0.2 crosses it outright.
    config.adam.lr = 0.2;
    let result = fit(&model, &data, &config, 0)?;

    println!(
        "converged: {} after {} epochs (final loss {:.2e})",
        result.converged, result.epochs_used, result.final_loss
    );
    println!("theta: {:.4}  (truth 0.8)", result.theta[0]);
    println!("tau:   {:.4}  (truth 0.7)", result.tau);
    Ok(())
}
