//! Learned forward dynamics and Monte-Carlo evaluation of policies on them.
//!
//! One GP per state dimension maps `(state, action)` to the change in that
//! state dimension. Policies are evaluated by propagating independent
//! particles through the model, sampling each step's delta from the GP
//! predictive distribution, and averaging the finite-horizon cost.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{EnvSpec, PolicyParams, Trajectory};
use crate::error::{check_dims, Error, Result};
use crate::gp::{self, FitConfig, GpModel, KernelHyper, PriorMean};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

/// Observed single-step transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    state_dim: usize,
    action_dim: usize,
    records: Vec<Transition>,
}

impl TransitionDataset {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            records: Vec::new(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn records(&self) -> &[Transition] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, action: Vec<f64>, next_state: Vec<f64>) -> Result<()> {
        check_dims("transition state", self.state_dim, state.len())?;
        check_dims("transition action", self.action_dim, action.len())?;
        check_dims("transition next state", self.state_dim, next_state.len())?;
        self.records.push(Transition {
            state,
            action,
            next_state,
        });
        Ok(())
    }

    pub fn extend_from_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        for (k, u) in traj.actions.iter().enumerate() {
            self.push(traj.states[k].clone(), u.clone(), traj.states[k + 1].clone())?;
        }
        Ok(())
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (0..self.state_dim).map(|i| format!("x_{i}")).collect();
        h.extend((0..self.action_dim).map(|i| format!("u_{i}")));
        h.extend((0..self.state_dim).map(|i| format!("x'_{i}")));
        h
    }

    /// Columns `x_0.., u_0.., x'_0..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.records {
            let row = r
                .state
                .iter()
                .chain(&r.action)
                .chain(&r.next_state)
                .map(|v| v.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, state_dim: usize, action_dim: usize) -> Result<Self> {
        let mut data = Self::new(state_dim, action_dim);
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != data.header() {
            return Err(Error::InvalidArgument(format!(
                "unexpected transition header {header:?}"
            )));
        }
        for row in rdr.records() {
            let vals = row?
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidArgument(format!("bad number in transition CSV: {e}")))?;
            let (x, rest) = vals.split_at(state_dim);
            let (u, xn) = rest.split_at(action_dim);
            data.push(x.to_vec(), u.to_vec(), xn.to_vec())?;
        }
        Ok(data)
    }
}

/// Anything that predicts a Gaussian over the per-dimension state change.
pub trait DynamicsPredictor: Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;

    /// For each input `(state ++ action)`, the mean and variance of the
    /// change of every state dimension: `out[dim][input]`.
    fn predict_deltas(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<(f64, f64)>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    pub fit: FitConfig,
    /// Larger data sets are subsampled before fitting: the newest half of the
    /// budget is kept as is, the rest is filled by farthest-point selection
    /// over the older transitions.
    pub max_train_points: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            max_train_points: 400,
        }
    }
}

/// One GP per state dimension over `(state, action)` inputs, trained on
/// state deltas with a zero prior mean.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    per_dim_gps: Vec<GpModel>,
    state_dim: usize,
    action_dim: usize,
}

impl DynamicsModel {
    pub fn per_dim_gps(&self) -> &[GpModel] {
        &self.per_dim_gps
    }

    pub fn hypers(&self) -> Vec<KernelHyper> {
        self.per_dim_gps.iter().map(|g| g.hyper().clone()).collect()
    }

    pub fn train_len(&self) -> usize {
        self.per_dim_gps[0].len()
    }
}

impl DynamicsPredictor for DynamicsModel {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn predict_deltas(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<(f64, f64)>>> {
        self.per_dim_gps
            .iter()
            .map(|gp| {
                let noise = gp.hyper().noise_variance;
                Ok(gp
                    .predict_batch(inputs)?
                    .into_iter()
                    .map(|(m, v)| (m, v + noise))
                    .collect())
            })
            .collect()
    }
}

fn select_training_indices(inputs: &[Vec<f64>], cap: usize) -> Vec<usize> {
    let n = inputs.len();
    if n <= cap {
        return (0..n).collect();
    }
    let recent = cap / 2;
    let mut chosen: Vec<usize> = (n - recent..n).collect();
    let pool = n - recent;

    let d = inputs[0].len();
    let mut scale = vec![1.0; d];
    for (j, s) in scale.iter_mut().enumerate() {
        let mean = inputs.iter().map(|x| x[j]).sum::<f64>() / n as f64;
        let var = inputs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n as f64;
        if var > 1e-24 {
            *s = 1.0 / var.sqrt();
        }
    }
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&scale)
            .map(|((x, y), s)| ((x - y) * s).powi(2))
            .sum()
    };
    let mut nearest: Vec<f64> = (0..pool)
        .map(|i| {
            chosen
                .iter()
                .map(|&c| dist2(&inputs[i], &inputs[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; pool];
    while chosen.len() < cap {
        let mut best = None;
        for i in 0..pool {
            if !taken[i] && best.is_none_or(|b: usize| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        taken[b] = true;
        chosen.push(b);
        for i in 0..pool {
            if !taken[i] {
                nearest[i] = nearest[i].min(dist2(&inputs[i], &inputs[b]));
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Fits the per-dimension delta GPs. `warm_start` (e.g. the previous model's
/// hyperparameters) adds one starting point per dimension.
pub fn train_dynamics(
    data: &TransitionDataset,
    config: &DynamicsConfig,
    warm_start: Option<&DynamicsModel>,
) -> Result<DynamicsModel> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "dynamics training needs at least 2 transitions, got {}",
            data.len()
        )));
    }
    let n = data.state_dim();
    let all_inputs: Vec<Vec<f64>> = data
        .records()
        .iter()
        .map(|r| r.state.iter().chain(&r.action).copied().collect())
        .collect();
    let keep = select_training_indices(&all_inputs, config.max_train_points.max(2));
    let inputs: Vec<Vec<f64>> = keep.iter().map(|&i| all_inputs[i].clone()).collect();

    let mut gps = Vec::with_capacity(n);
    for dim in 0..n {
        let targets: Vec<f64> = keep
            .iter()
            .map(|&i| {
                let r = &data.records()[i];
                r.next_state[dim] - r.state[dim]
            })
            .collect();
        let fit_cfg = FitConfig {
            seed: seed::mix(config.fit.seed, dim as u64),
            warm_start: warm_start.map(|m| m.per_dim_gps[dim].hyper().clone()),
            ..config.fit.clone()
        };
        let gp = gp::fit(inputs.clone(), targets, PriorMean::zero(), &fit_cfg).map_err(|e| Error::Dynamics {
            dim,
            source: Box::new(e),
        })?;
        gps.push(gp);
    }
    Ok(DynamicsModel {
        per_dim_gps: gps,
        state_dim: n,
        action_dim: data.action_dim(),
    })
}

/// Monte-Carlo settings for model rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub n_particles: usize,
    /// Base seed; the per-policy seed mixes in a hash of the parameters.
    pub seed: u64,
    /// Cost assigned to particles that diverge or leave the sanity box.
    pub penalty_cap: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_particles: 200,
            seed: 0,
            penalty_cap: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
}

/// Sampled trajectories through a learned model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub particles: Vec<Particle>,
    pub per_particle_cost: Vec<f64>,
    /// Particles that left the sanity box or went non-finite. Their cost is
    /// the penalty cap and their states are frozen at the last valid one.
    pub diverged: Vec<bool>,
}

impl TrajectoryEnsemble {
    pub fn mean_cost(&self) -> f64 {
        self.per_particle_cost.iter().sum::<f64>() / self.per_particle_cost.len() as f64
    }

    pub fn n_diverged(&self) -> usize {
        self.diverged.iter().filter(|d| **d).count()
    }
}

/// Propagates `n_particles` independent particles for `horizon` steps.
///
/// Particle `p` draws its noise from its own stream seeded by
/// `mix(seed, p)`, so results do not depend on batching.
pub fn rollout_mc<M: DynamicsPredictor + ?Sized>(
    model: &M,
    policy: &PolicyParams,
    env: &EnvSpec,
    init_state: &[f64],
    horizon: usize,
    mc: &McConfig,
) -> Result<TrajectoryEnsemble> {
    let n = model.state_dim();
    let m = model.action_dim();
    check_dims("initial state", n, init_state.len())?;
    check_dims("policy state dimension", n, policy.state_dim)?;
    check_dims("policy action dimension", m, policy.action_dim)?;
    if mc.n_particles == 0 || horizon == 0 {
        return Err(Error::InvalidArgument(
            "rollouts need at least one particle and one step".into(),
        ));
    }
    let np = mc.n_particles;
    let mut rngs: Vec<_> = (0..np).map(|p| seed::rng(seed::mix(mc.seed, p as u64))).collect();
    let mut particles: Vec<Particle> = (0..np)
        .map(|_| Particle {
            states: {
                let mut v = Vec::with_capacity(horizon + 1);
                v.push(init_state.to_vec());
                v
            },
            actions: Vec::with_capacity(horizon),
        })
        .collect();
    let mut diverged = vec![false; np];

    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(np);
    let mut alive: Vec<usize> = Vec::with_capacity(np);
    for _ in 0..horizon {
        inputs.clear();
        alive.clear();
        for (p, part) in particles.iter_mut().enumerate() {
            let x = part.states.last().expect("start state");
            if diverged[p] {
                let frozen = x.clone();
                part.actions.push(vec![0.0; m]);
                part.states.push(frozen);
                continue;
            }
            let mut u = vec![0.0; m];
            policy.apply_into(x, &mut u);
            env.clip_action(&mut u);
            let mut input = x.clone();
            input.extend_from_slice(&u);
            part.actions.push(u);
            inputs.push(input);
            alive.push(p);
        }
        if alive.is_empty() {
            continue;
        }
        let deltas = model.predict_deltas(&inputs)?;
        for (j, &p) in alive.iter().enumerate() {
            let x = particles[p].states.last().expect("start state");
            let next: Vec<f64> = (0..n)
                .map(|d| {
                    let (mean, var) = deltas[d][j];
                    let z: f64 = rngs[p].sample(StandardNormal);
                    x[d] + mean + var.max(0.0).sqrt() * z
                })
                .collect();
            if env.in_sanity_box(&next) {
                particles[p].states.push(next);
            } else {
                diverged[p] = true;
                let frozen = x.clone();
                particles[p].states.push(frozen);
            }
        }
    }

    let per_particle_cost = particles
        .iter()
        .zip(&diverged)
        .map(|(part, &bad)| {
            if bad {
                mc.penalty_cap
            } else {
                crate::env::trajectory_cost(env, &part.states, &part.actions)
            }
        })
        .collect();
    Ok(TrajectoryEnsemble {
        particles,
        per_particle_cost,
        diverged,
    })
}

/// Seed used for the rollouts of one policy: the base seed mixed with the
/// exact bits of the parameters.
pub fn policy_seed(base: u64, theta: &[f64]) -> u64 {
    seed::mix(base, seed::hash_reals(theta))
}

/// Model-predicted expected cost of a policy: the mean particle cost from
/// the environment's start state over its horizon.
pub fn expected_cost<M: DynamicsPredictor + ?Sized>(
    model: &M,
    policy: &PolicyParams,
    env: &EnvSpec,
    mc: &McConfig,
) -> Result<f64> {
    let cfg = McConfig {
        seed: policy_seed(mc.seed, &policy.theta),
        ..*mc
    };
    let ens = rollout_mc(model, policy, env, &env.start_state, env.horizon, &cfg)?;
    Ok(ens.mean_cost())
}
