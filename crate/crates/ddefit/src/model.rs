//! Parameterized delayed vector fields `f_θ(x, y)` with analytic Jacobians.
//!
//! A model is the right-hand side of `ẋ(t) = f_θ(x(t), x(t−τ))` together
//! with its three partial derivatives. The backward (adjoint) pass consumes
//! the Jacobians pointwise, so they are part of the model contract rather
//! than something recovered by global automatic differentiation: the
//! math-to-code correspondence stays auditable, and a finite-difference
//! wrapper covers models for which no hand-written derivatives exist.
//!
//! Built-ins: [`logistic_model`] (`f = θ₁·x·(1 − θ₂·y)`) and
//! [`linear_model`] (`f = θ₁·x + θ₂·y`), both scalar with two parameters.

use std::sync::Arc;

type RhsFn = dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync;
type JacFn = dyn Fn(&[f64], &[f64], &[f64]) -> Vec<Vec<f64>> + Send + Sync;

/// A delayed vector field with its partial derivatives.
///
/// All callables take `(x, y, theta)` where `x` is the current state,
/// `y` the lagged state `x(t−τ)`, and `theta` the parameter vector.
/// Jacobians are row-major: `d_rhs_dx[i][j] = ∂f_i/∂x_j` (n×n),
/// `d_rhs_dy[i][j] = ∂f_i/∂y_j` (n×n), `d_rhs_dtheta[i][k] = ∂f_i/∂θ_k` (n×d).
pub struct ModelSpec {
    pub name: String,
    pub dim_state: usize,
    pub dim_theta: usize,
    pub rhs: Box<RhsFn>,
    pub d_rhs_dx: Box<JacFn>,
    pub d_rhs_dy: Box<JacFn>,
    pub d_rhs_dtheta: Box<JacFn>,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim_state", &self.dim_state)
            .field("dim_theta", &self.dim_theta)
            .finish()
    }
}

/// Delayed logistic growth: `f(x, y, θ) = θ₁·x·(1 − θ₂·y)`, n = 1, d = 2.
///
/// At `θ = (1, 1)` this is the classical delayed logistic equation, whose
/// trajectories oscillate toward the carrying capacity 1.
pub fn logistic_model() -> ModelSpec {
    ModelSpec {
        name: "logistic".into(),
        dim_state: 1,
        dim_theta: 2,
        rhs: Box::new(|x, y, th| vec![th[0] * x[0] * (1.0 - th[1] * y[0])]),
        d_rhs_dx: Box::new(|_x, y, th| vec![vec![th[0] * (1.0 - th[1] * y[0])]]),
        d_rhs_dy: Box::new(|x, _y, th| vec![vec![-th[0] * th[1] * x[0]]]),
        d_rhs_dtheta: Box::new(|x, y, th| {
            vec![vec![x[0] * (1.0 - th[1] * y[0]), -th[0] * x[0] * y[0]]]
        }),
    }
}

/// Delayed linear decay: `f(x, y, θ) = θ₁·x + θ₂·y`, n = 1, d = 2.
///
/// At `θ = (−2, −2)` this is the delayed exponential-decay equation
/// `ẋ = −2x(t) − 2x(t−τ)`.
pub fn linear_model() -> ModelSpec {
    ModelSpec {
        name: "linear".into(),
        dim_state: 1,
        dim_theta: 2,
        rhs: Box::new(|x, y, th| vec![th[0] * x[0] + th[1] * y[0]]),
        d_rhs_dx: Box::new(|_x, _y, th| vec![vec![th[0]]]),
        d_rhs_dy: Box::new(|_x, _y, th| vec![vec![th[1]]]),
        d_rhs_dtheta: Box::new(|x, y, _th| vec![vec![x[0], y[0]]]),
    }
}

/// Look a built-in model up by name (`"logistic"` or `"linear"`).
pub fn model_by_name(name: &str) -> Option<ModelSpec> {
    match name {
        "logistic" => Some(logistic_model()),
        "linear" => Some(linear_model()),
        _ => None,
    }
}

/// Default step for finite-difference Jacobians: balances truncation and
/// roundoff for central differences in double precision.
pub const DEFAULT_JACOBIAN_FD_STEP: f64 = 1e-6;

/// Wrap a bare right-hand side into a [`ModelSpec`] whose Jacobians are
/// central finite differences with the given step.
///
/// Useful for user-supplied dynamics without hand-written derivatives; the
/// gradients it produces inherit the O(fd_step²) truncation error of central
/// differences on top of the solver's own discretization error.
pub fn model_from_rhs_fd<F>(name: &str, rhs: F, n: usize, d: usize, fd_step: f64) -> ModelSpec
where
    F: Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    let rhs = Arc::new(rhs);
    let h = fd_step;

    let fd = |wrt: Wrt| {
        let rhs = Arc::clone(&rhs);
        move |x: &[f64], y: &[f64], th: &[f64]| -> Vec<Vec<f64>> {
            let width = match wrt {
                Wrt::X => x.len(),
                Wrt::Y => y.len(),
                Wrt::Theta => th.len(),
            };
            let mut cols = Vec::with_capacity(width);
            for j in 0..width {
                let mut plus = (x.to_vec(), y.to_vec(), th.to_vec());
                let mut minus = (x.to_vec(), y.to_vec(), th.to_vec());
                match wrt {
                    Wrt::X => {
                        plus.0[j] += h;
                        minus.0[j] -= h;
                    }
                    Wrt::Y => {
                        plus.1[j] += h;
                        minus.1[j] -= h;
                    }
                    Wrt::Theta => {
                        plus.2[j] += h;
                        minus.2[j] -= h;
                    }
                }
                let fp = rhs(&plus.0, &plus.1, &plus.2);
                let fm = rhs(&minus.0, &minus.1, &minus.2);
                cols.push(
                    fp.iter()
                        .zip(fm.iter())
                        .map(|(a, b)| (a - b) / (2.0 * h))
                        .collect::<Vec<f64>>(),
                );
            }
            // transpose columns into row-major Jacobian rows
            let rows = cols.first().map_or(0, |c| c.len());
            (0..rows)
                .map(|i| cols.iter().map(|c| c[i]).collect())
                .collect()
        }
    };

    ModelSpec {
        name: name.into(),
        dim_state: n,
        dim_theta: d,
        d_rhs_dx: Box::new(fd(Wrt::X)),
        d_rhs_dy: Box::new(fd(Wrt::Y)),
        d_rhs_dtheta: Box::new(fd(Wrt::Theta)),
        rhs: Box::new(move |x, y, th| rhs(x, y, th)),
    }
}

#[derive(Clone, Copy)]
enum Wrt {
    X,
    Y,
    Theta,
}
