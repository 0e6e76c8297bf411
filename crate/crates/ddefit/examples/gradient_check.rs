//! Verify the adjoint gradients against central finite differences at a
//! probe point far from the data-generating parameters.
//!
//! Run with: `cargo run --release --example gradient_check`

use ddefit::{gradcheck, logistic_model, sample_dataset, Result, TimeGrid, DEFAULT_FD_STEP};

fn main() -> Result<()> {
    let model = logistic_model();
    let grid = TimeGrid::new(5.0, 1e-3)?;
    // data from (1, 1, 1); probe the gradient at (2, 2, 2)
    let data = sample_dataset(&model, &[1.0, 1.0], 1.0, &[2.0], &grid, 500)?;
    let report = gradcheck(
        &model,
        &[2.0, 2.0],
        2.0,
        &data,
        &grid,
        DEFAULT_FD_STEP,
        1e-2,
    )?;

    println!(
        "gradient check at theta = (2, 2), tau = 2, dt = {}",
        report.dt
    );
    println!("\n  component   adjoint         finite diff     rel error");
    let labels = ["d/d theta1", "d/d theta2", "d/d tau   ", "d/d x0    "];
    let analytic = report.analytic.flatten();
    let numeric = report.numeric.flatten();
    for i in 0..analytic.len() {
        println!(
            "  {}  {:>14.8}  {:>14.8}  {:.2e}",
            labels[i], analytic[i], numeric[i], report.rel_errors[i]
        );
    }
    println!(
        "\nworst relative error {:.2e} -> {}",
        report.max_rel_error(),
        if report.passed { "PASS" } else { "FAIL" }
    );
    Ok(())
}
