#![allow(dead_code)]

use std::f64::consts::PI;

pub fn branin(x: &[f64]) -> f64 {
    let (a, b, c) = (1.0, 5.1 / (4.0 * PI * PI), 5.0 / PI);
    let (r, s, t) = (6.0, 10.0, 1.0 / (8.0 * PI));
    a * (x[1] - b * x[0] * x[0] + c * x[0] - r).powi(2) + s * (1.0 - t) * x[0].cos() + s
}

/// Minimum of Branin over a 2000 x 2000 grid on [-5, 10] x [0, 15].
pub fn branin_grid_minimum() -> f64 {
    let n = 2000;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let x0 = -5.0 + 15.0 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let x1 = 15.0 * j as f64 / (n - 1) as f64;
            best = best.min(branin(&[x0, x1]));
        }
    }
    best
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Composite Simpson rule on [a, b] with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

use mbmf::dynamics::DynamicsPredictor;
use mbmf::env::{EnvSpec, PolicyParams};
use nalgebra::{DMatrix, DVector};

/// Linear-Gaussian stand-in for a learned model: `x' = A x + B u + w` with
/// `w ~ N(0, noise_var I)`.
pub struct LinearGaussian {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub noise_var: f64,
}

impl DynamicsPredictor for LinearGaussian {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn action_dim(&self) -> usize {
        self.b.ncols()
    }

    fn predict_deltas(&self, inputs: &[Vec<f64>]) -> mbmf::Result<Vec<Vec<(f64, f64)>>> {
        let n = self.state_dim();
        let mut out = vec![Vec::with_capacity(inputs.len()); n];
        for input in inputs {
            let x = DVector::from_column_slice(&input[..n]);
            let u = DVector::from_column_slice(&input[n..]);
            let next = &self.a * &x + &self.b * u;
            for d in 0..n {
                out[d].push((next[d] - x[d], self.noise_var));
            }
        }
        Ok(out)
    }
}

/// Point-mass-shaped task (cost on the first two coordinates) with bounds
/// and sanity box wide enough that nothing is ever clipped or penalized.
pub fn unbounded_point_mass() -> EnvSpec {
    let mut env = EnvSpec::point_mass_reference();
    env.obstacles.clear();
    env.action_bounds = vec![[-1e9, 1e9]; 2];
    env.sanity_box = vec![[-1e9, 1e9]; 4];
    env.horizon = 20;
    env
}

/// A mildly damped double integrator and a stabilizing policy.
pub fn linear_fixture() -> (LinearGaussian, PolicyParams) {
    let dt = 0.1;
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, dt, 0.0, 0.0, 1.0, 0.0, dt, 0.0, 0.0, 0.95, 0.0, 0.0, 0.0, 0.0, 0.95,
        ],
    );
    let b = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, dt, 0.0, 0.0, dt]);
    let theta = vec![-1.0, 0.0, -0.8, 0.0, 0.0, -1.0, 0.0, -0.8, 0.9, 0.7];
    let model = LinearGaussian { a, b, noise_var: 4e-3 };
    (model, PolicyParams::new(theta, 4, 2).unwrap())
}

/// Exact expected cost of the linear-Gaussian closed loop: propagate mean
/// and covariance, then `E|p - g|^2 = |mu_p - g|^2 + tr(Sigma_pp)`.
pub fn linear_expected_cost(model: &LinearGaussian, policy: &PolicyParams, env: &EnvSpec) -> f64 {
    let n = 4;
    let k = DMatrix::from_row_slice(2, n, &policy.theta[..2 * n]);
    let bias = DVector::from_column_slice(&policy.theta[2 * n..]);
    let phi = &model.a + &model.b * &k;
    let c = &model.b * bias;
    let mut mu = DVector::from_column_slice(&env.start_state);
    let mut sigma = DMatrix::<f64>::zeros(n, n);
    let goal = DVector::from_column_slice(&env.goal);
    let pos_cost = |mu: &DVector<f64>, sigma: &DMatrix<f64>| {
        (mu.rows(0, 2) - &goal).norm_squared() + sigma[(0, 0)] + sigma[(1, 1)]
    };
    let mut total = 0.0;
    for _ in 0..env.horizon {
        total += env.cost_weights.running * pos_cost(&mu, &sigma);
        mu = &phi * mu + &c;
        sigma = &phi * sigma * phi.transpose() + DMatrix::identity(n, n) * model.noise_var;
    }
    total + env.cost_weights.terminal * pos_cost(&mu, &sigma)
}

/// Dense-inverse GP posterior around a prior: explicit `(K + s I)^-1` with
/// `s` the noise plus jitter actually used by the model under test.
pub fn dense_posterior(
    inputs: &[Vec<f64>],
    residuals: &[f64],
    hyper: &mbmf::gp::KernelHyper,
    extra_diag: f64,
    query: &[f64],
) -> (f64, f64) {
    let n = inputs.len();
    let k = |a: &[f64], b: &[f64]| -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&hyper.lengthscales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum();
        hyper.signal_variance * (-0.5 * r2).exp()
    };
    let mut km = DMatrix::from_fn(n, n, |i, j| k(&inputs[i], &inputs[j]));
    for i in 0..n {
        km[(i, i)] += hyper.noise_variance + extra_diag;
    }
    let inv = km.try_inverse().expect("invertible kernel matrix");
    let ks = DVector::from_fn(n, |i, _| k(&inputs[i], query));
    let y = DVector::from_column_slice(residuals);
    let mean = (ks.transpose() * &inv * y)[0];
    let var = hyper.signal_variance - (ks.transpose() * &inv * &ks)[0];
    (mean, var)
}
