//! Differentiate a general trajectory functional — an integral running cost
//! plus a terminal cost — rather than the data-matching loss, and confirm
//! the adjoint gradient against finite differences.
//!
//! The functional here is `L = ∫ x(t)² dt + 10 · (x(T) − 1)²`, a smoothed
//! "stay small but end at 1" objective for the delay logistic flow.
//!
//! Run with: `cargo run --release --example general_cost`

use ddefit::{
    logistic_model, loss_general, loss_gradient_general, solve_forward, Result, TimeGrid,
};

fn main() -> Result<()> {
    let model = logistic_model();
    let grid = TimeGrid::new(4.0, 1e-3)?;
    let theta = [1.0, 1.0];
    let tau = 1.0;
    let x0 = [2.0];

    let running = |_t: f64, x: &[f64]| x[0] * x[0];
    let running_grad = |_t: f64, x: &[f64]| vec![2.0 * x[0]];
    let terminal = |x: &[f64]| 10.0 * (x[0] - 1.0) * (x[0] - 1.0);
    let terminal_grad = |x: &[f64]| vec![20.0 * (x[0] - 1.0)];

    let forward = solve_forward(&model, &theta, tau, &x0, &grid)?;
    let value = loss_general(&forward, Some(&running), Some(&terminal));
    println!("L(theta, tau, x0) = {value:.6}");

    let grad = loss_gradient_general(
        &model,
        &theta,
        tau,
        &forward,
        Some(&running_grad),
        Some(&terminal_grad),
    )?;

    // finite-difference cross-check through the same evaluator
    let eval = |theta: &[f64], tau: f64, x0: &[f64]| -> Result<f64> {
        let traj = solve_forward(&model, theta, tau, x0, &grid)?;
        Ok(loss_general(&traj, Some(&running), Some(&terminal)))
    };
    let h = 1e-5;
    let fd_th1 = (eval(&[1.0 + h, 1.0], tau, &x0)? - eval(&[1.0 - h, 1.0], tau, &x0)?) / (2.0 * h);
    let fd_tau = (eval(&theta, tau + h, &x0)? - eval(&theta, tau - h, &x0)?) / (2.0 * h);
    let fd_x0 = (eval(&theta, tau, &[2.0 + h])? - eval(&theta, tau, &[2.0 - h])?) / (2.0 * h);

    println!("\n  component   adjoint         finite diff");
    println!("  d/d theta1  {:>14.8}  {:>14.8}", grad.d_theta[0], fd_th1);
    println!("  d/d theta2  {:>14.8}  (not probed)", grad.d_theta[1]);
    println!("  d/d tau     {:>14.8}  {:>14.8}", grad.d_tau, fd_tau);
    println!("  d/d x0      {:>14.8}  {:>14.8}", grad.d_x0[0], fd_x0);
    Ok(())
}
