//! Ground-truth simulated systems, linear policies, and the finite-horizon
//! cost of a closed-loop rollout.

mod pointmass;
mod pusher;
mod spec;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::seed;

pub use pointmass::step_pointmass;
pub use pusher::{forward_kinematics, step_pusher};
pub use spec::{CostWeights, EnvKind, EnvSpec, Obstacle, PusherGeometry};

/// Parameters of the linear policy `u = clip(A x + b)`.
///
/// `theta` holds `A` row-major (`action_dim x state_dim`) followed by `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl PolicyParams {
    pub fn new(theta: Vec<f64>, state_dim: usize, action_dim: usize) -> Result<Self> {
        check_dims("policy parameters", action_dim * (state_dim + 1), theta.len())?;
        Ok(Self {
            theta,
            state_dim,
            action_dim,
        })
    }

    pub fn for_spec(theta: &[f64], spec: &EnvSpec) -> Result<Self> {
        Self::new(theta.to_vec(), spec.state_dim, spec.action_dim)
    }

    pub fn zeros(state_dim: usize, action_dim: usize) -> Self {
        Self {
            theta: vec![0.0; action_dim * (state_dim + 1)],
            state_dim,
            action_dim,
        }
    }

    pub fn gain(&self, row: usize, col: usize) -> f64 {
        self.theta[row * self.state_dim + col]
    }

    pub fn bias(&self, row: usize) -> f64 {
        self.theta[self.action_dim * self.state_dim + row]
    }

    /// Unclipped `A x + b`, written into `out`.
    pub(crate) fn apply_into(&self, state: &[f64], out: &mut [f64]) {
        let n = self.state_dim;
        for (i, u) in out.iter_mut().enumerate() {
            let row = &self.theta[i * n..(i + 1) * n];
            *u = row.iter().zip(state).map(|(a, x)| a * x).sum::<f64>() + self.bias(i);
        }
    }
}

/// `u = clip(A x + b, bounds)`.
pub fn linear_policy(params: &PolicyParams, state: &[f64], bounds: &[[f64; 2]]) -> Result<Vec<f64>> {
    check_dims("policy state", params.state_dim, state.len())?;
    check_dims("action bounds", params.action_dim, bounds.len())?;
    let mut u = vec![0.0; params.action_dim];
    params.apply_into(state, &mut u);
    for (ui, [lo, hi]) in u.iter_mut().zip(bounds) {
        *ui = ui.clamp(*lo, *hi);
    }
    Ok(u)
}

/// A closed-loop rollout on the true system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Finite-horizon cost of the stored states and actions.
    pub realized_cost: f64,
    /// What the learner sees: the realized cost plus optional noise.
    pub observed_cost: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("at least the start state")
    }

    /// Writes `step, x_0.., u_0.., running_cost`; the last row carries the
    /// terminal state, empty actions, and the terminal cost.
    pub fn write_csv<W: Write>(&self, spec: &EnvSpec, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        header.extend((0..spec.state_dim).map(|i| format!("x_{i}")));
        header.extend((0..spec.action_dim).map(|i| format!("u_{i}")));
        header.push("running_cost".into());
        w.write_record(&header)?;
        for (k, x) in self.states.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            match self.actions.get(k) {
                Some(u) => {
                    row.extend(u.iter().map(|v| v.to_string()));
                    row.push(spec.running_cost(x, u).to_string());
                }
                None => {
                    row.extend(std::iter::repeat_n(String::new(), spec.action_dim));
                    row.push(spec.terminal_cost(x).to_string());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sum of running costs over the actions plus the terminal cost of the last
/// state.
pub fn trajectory_cost(spec: &EnvSpec, states: &[Vec<f64>], actions: &[Vec<f64>]) -> f64 {
    let running: f64 = states.iter().zip(actions).map(|(x, u)| spec.running_cost(x, u)).sum();
    running + spec.terminal_cost(states.last().expect("non-empty trajectory"))
}

/// Runs the policy on the true system for `spec.horizon` steps from the start
/// state. Deterministic; `seed` only drives optional cost-observation noise.
pub fn rollout_real(spec: &EnvSpec, theta: &[f64], seed: u64) -> Result<Trajectory> {
    let policy = PolicyParams::for_spec(theta, spec)?;
    let mut states = Vec::with_capacity(spec.horizon + 1);
    let mut actions = Vec::with_capacity(spec.horizon);
    let mut x = spec.start_state.clone();
    for _ in 0..spec.horizon {
        let u = linear_policy(&policy, &x, &spec.action_bounds)?;
        let next = spec.step(&x, &u);
        states.push(std::mem::replace(&mut x, next));
        actions.push(u);
    }
    states.push(x);
    let realized_cost = trajectory_cost(spec, &states, &actions);
    if !realized_cost.is_finite() {
        return Err(Error::Numerical("real rollout produced a non-finite cost".into()));
    }
    let observed_cost = if spec.cost_noise_std > 0.0 {
        let mut rng = seed::rng(seed);
        realized_cost + spec.cost_noise_std * rng.sample::<f64, _>(StandardNormal)
    } else {
        realized_cost
    };
    Ok(Trajectory {
        states,
        actions,
        realized_cost,
        observed_cost,
    })
}
