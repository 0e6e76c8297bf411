//! Scan the loss along the delay axis with the model parameters frozen at
//! their true values: the loss has a clean sink at the true delay, which is
//! what makes the delay learnable by gradient descent.
//!
//! Run with: `cargo run --release --example landscape_tau`

use ddefit::{
    logistic_model, sample_dataset, scan_landscape, AxisSpec, FrozenAssignment, Result, TimeGrid,
};

fn main() -> Result<()> {
    let model = logistic_model();
    let grid = TimeGrid::new(10.0, 0.01)?;
    let data = sample_dataset(&model, &[1.0, 1.0], 1.0, &[2.0], &grid, 10)?;

    let scan = scan_landscape(
        &model,
        &data,
        (
            0,
            AxisSpec {
                start: 1.0,
                stop: 1.0,
                count: 1,
            },
        ), // theta frozen
        AxisSpec {
            start: 0.5,
            stop: 2.0,
            count: 31,
        },
        &FrozenAssignment {
            theta: vec![1.0, 1.0],
            tau: 1.0,
        },
        &grid,
    )?;

    println!("loss along tau in [0.5, 2.0], theta frozen at (1, 1):\n");
    let max = scan.losses[0]
        .iter()
        .copied()
        .filter(|l| l.is_finite())
        .fold(0.0, f64::max);
    for (j, &tau) in scan.tau_values.iter().enumerate() {
        let loss = scan.losses[0][j];
        let bar = "#".repeat((loss / max * 56.0).round() as usize);
        println!("  tau = {tau:5.2}  {loss:9.4}  {bar}");
    }
    let (_, j) = scan.argmin().expect("finite cells");
    println!(
        "\nminimum at tau = {:.3} (true delay 1.0)",
        scan.tau_values[j]
    );
    Ok(())
}
