//! Scan the loss over a (theta1, tau) grid with theta2 frozen: the global
//! sink sits at the data-generating point, surrounded by gentle valleys and
//! a divergent region where the forward solve blows up (rendered as '!').
//!
//! Run with: `cargo run --release --example landscape_2d`

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
                start: 0.25,
                stop: 2.5,
                count: 19,
            },
        ),
        AxisSpec {
            start: 0.25,
            stop: 2.5,
            count: 19,
        },
        &FrozenAssignment {
            theta: vec![1.0, 1.0],
            tau: 1.0,
        },
        &grid,
    )?;

    // log-scaled shade map: darker = lower loss
    let shades = ['@', '%', '+', '-', '.', ' '];
    println!("loss over (theta1, tau), theta2 frozen at 1; ' '=low '@'=high '!'=blow-up\n");
    print!("            tau ");
    for &tau in scan.tau_values.iter().step_by(3) {
        print!("{tau:4.2}        ");
    }
    println!();
    for (i, &tv) in scan.theta_values.iter().enumerate() {
        print!("  theta1 = {tv:5.2}  ");
        for &loss in &scan.losses[i] {
            let c = if !loss.is_finite() {
                '!'
            } else {
                let z = ((loss + 1e-9).log10() + 3.0) / 6.0; // map ~[1e-3, 1e3] to [0, 1]
                let idx = ((1.0 - z.clamp(0.0, 1.0)) * (shades.len() - 1) as f64).round();
                shades[idx as usize]
            };
            print!("{c}  ");
        }
        println!();
    }

    let (i, j) = scan.argmin().expect("finite cells");
    println!(
        "\nminimum cell: theta1 = {:.3}, tau = {:.3} (truth: 1, 1)",
        scan.theta_values[i], scan.tau_values[j]
    );
    Ok(())
}
