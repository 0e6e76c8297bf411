//! Recover the delay logistic equation's parameters and delay from sampled
//! data, starting every unknown at twice its true value.
//!
//! Run with: `cargo run --release --example fit_logistic`

use ddefit::{
    fit, logistic_model, sample_dataset, FitConfig, Result, TauInit, ThetaInit, TimeGrid,
};

fn main() -> Result<()> {
    let model = logistic_model();
    let grid = TimeGrid::new(10.0, 0.01)?;

    // ground truth (theta1, theta2, tau) = (1, 1, 1), sampled every 10th node
    let data = sample_dataset(&model, &[1.0, 1.0], 1.0, &[2.0], &grid, 10)?;
    println!("data: {} samples on [0, {}]", data.len(), grid.t_end);

    let config = FitConfig {
        theta_init: ThetaInit::Fixed(vec![2.0, 2.0]),
        tau_init: TauInit::Fixed(2.0),
        max_epochs: 500,
        loss_threshold: 0.01,
        ..FitConfig::new(grid)
    };
    let result = fit(&model, &data, &config, 0)?;

    println!(
        "converged: {} after {} epochs",
        result.converged, result.epochs_used
    );
    println!("final loss: {:.6}", result.final_loss);
    println!(
        "theta: [{:.4}, {:.4}]  (truth [1, 1])",
        result.theta[0], result.theta[1]
    );
    println!("tau:   {:.4}            (truth 1)", result.tau);

    println!("\nloss trace (every 50 epochs):");
    for (e, loss) in result.loss_history.iter().enumerate().step_by(50) {
        println!("  epoch {:3}: {:.5}", e + 1, loss);
    }
    Ok(())
}
