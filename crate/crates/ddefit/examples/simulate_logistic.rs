//! Integrate the delay logistic equation forward and look at the
//! trajectory: the delayed feedback overshoots the carrying capacity and
//! rings down onto it.
//!
//! Run with: `cargo run --example simulate_logistic`

use ddefit::{logistic_model, sample_dataset, solve_forward, Result, TimeGrid};

fn main() -> Result<()> {
    let model = logistic_model();
    let theta = [1.0, 1.0];
    let tau = 1.0;
    let x0 = [2.0];
    let grid = TimeGrid::new(10.0, 0.01)?;

    let trajectory = solve_forward(&model, &theta, tau, &x0, &grid)?;
    println!(
        "integrated {} nodes on [0, {}] at dt = {}",
        grid.n_nodes(),
        grid.t_end,
        grid.dt
    );

    // print every 50th node as a quick profile
    println!("\n    t      x(t)");
    for k in (0..grid.n_nodes()).step_by(50) {
        println!(
            "  {:4.1}   {:8.5}",
            grid.node_time(k),
            trajectory.states[k][0]
        );
    }

    // the same sampling the data files use: every 10th node
    let data = sample_dataset(&model, &theta, tau, &x0, &grid, 10)?;
    println!("\nsampled {} data points (every 10th node)", data.len());
    println!("the tail settles onto the carrying capacity x = 1:");
    for (t, x) in data.times().iter().zip(data.values()).rev().take(3).rev() {
        println!("  x({t:4.1}) = {:.6}", x[0]);
    }
    Ok(())
}
