use std::ops::RangeInclusive;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, Method};
use crate::bayesopt::{build_response_surface, propose_next, CostDataset};
use crate::direct::{direct_minimize, DirectConfig, SearchBox};
use crate::dynamics::{expected_cost, train_dynamics, DynamicsModel, DynamicsPredictor, McConfig, TransitionDataset};
use crate::env::{rollout_real, EnvSpec, PolicyParams, Trajectory};
use crate::error::Result;
use crate::gp::{KernelHyper, PriorMean};
use crate::seed;

// Stream tags mixed into the trial seed so each consumer draws independently.
const INIT_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;
const DYNAMICS_STREAM: u64 = 3;
const MC_STREAM: u64 = 4;
const SURFACE_STREAM: u64 = 5;

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub method: String,
    pub trial: usize,
    /// 0 for the initial random policies, then 1..=n_iters.
    pub iteration: usize,
    pub proposed_theta: Vec<f64>,
    pub observed_cost: f64,
    pub incumbent_cost: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub iteration: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialStats {
    pub dynamics_trainings: usize,
    pub d1_len: usize,
    pub d2_len: usize,
    /// Size of D2 when the switch baseline hands over to model-free search.
    pub d2_len_at_switch: Option<usize>,
    /// Model-predicted cost of each model-based proposal, by iteration.
    pub predicted_costs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub records: Vec<IterationRecord>,
    pub failure: Option<TrialFailure>,
    /// Real trajectory of the final incumbent.
    pub best_trajectory: Option<Trajectory>,
    pub stats: TrialStats,
}

impl TrialOutcome {
    pub fn is_valid(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_incumbent(&self) -> Option<f64> {
        self.records.last().map(|r| r.incumbent_cost)
    }
}

/// The shared initial design of one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub d1: TransitionDataset,
    pub d2: CostDataset,
    pub trajectories: Vec<Trajectory>,
}

pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    seed::mix(cfg.base_seed, trial as u64)
}

fn stream(trial_seed: u64, tag: u64, index: u64) -> u64 {
    seed::mix(trial_seed, seed::mix(tag, index))
}

/// Draws `n_init` policies from N(0, I) (clamped to the search box), runs
/// them on the environment, and collects D1 and D2. Depends only on the
/// base seed, the trial index and the environment, never on the method.
pub fn init_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialData> {
    let ts = trial_seed(cfg, trial);
    let env = &cfg.env;
    let bounds = cfg.search_box();
    let mut rng = seed::rng(stream(ts, INIT_STREAM, 0));
    let mut d1 = TransitionDataset::new(env.state_dim, env.action_dim);
    let mut d2 = CostDataset::new(cfg.theta_dim());
    let mut trajectories = Vec::with_capacity(cfg.n_init);
    for j in 0..cfg.n_init {
        let mut theta: Vec<f64> = (0..cfg.theta_dim()).map(|_| rng.sample(StandardNormal)).collect();
        bounds.clamp(&mut theta);
        let traj = rollout_real(env, &theta, stream(ts, INIT_STREAM, 1 + j as u64))?;
        d1.extend_from_trajectory(&traj)?;
        d2.push(theta, traj.observed_cost)?;
        trajectories.push(traj);
    }
    Ok(TrialData { d1, d2, trajectories })
}

/// Model-based proposal: minimizes the model-predicted expected cost over the
/// box with DIRECT. Returns the parameters and their predicted cost.
pub fn mb_propose<M: DynamicsPredictor + ?Sized>(
    model: &M,
    env: &EnvSpec,
    bounds: &SearchBox,
    direct: DirectConfig,
    mc: &McConfig,
) -> Result<(Vec<f64>, f64)> {
    let objective = |theta: &[f64]| {
        PolicyParams::for_spec(theta, env)
            .and_then(|p| expected_cost(model, &p, env, mc))
            .unwrap_or(f64::NAN)
    };
    let res = direct_minimize(objective, bounds, direct)?;
    Ok((res.best_point, res.best_value))
}

/// `C_L` as a memoized prior mean over policy parameters.
pub fn learned_prior(model: Arc<DynamicsModel>, env: EnvSpec, mc: McConfig) -> PriorMean {
    PriorMean::cached(move |theta: &[f64]| {
        PolicyParams::for_spec(theta, &env)
            .and_then(|p| expected_cost(&*model, &p, &env, &mc))
            .unwrap_or(mc.penalty_cap)
    })
}

/// Where the response surface's prior mean comes from.
#[derive(Clone)]
pub enum PriorMode {
    /// Plain model-free BO.
    Zero,
    /// The learned-dynamics cost, retrained every `period` iterations.
    Learned { period: usize },
    /// A caller-supplied prior.
    Fixed(PriorMean),
}

struct Trial<'a> {
    cfg: &'a ExperimentConfig,
    index: usize,
    seed: u64,
    label: String,
    bounds: SearchBox,
    d1: TransitionDataset,
    d2: CostDataset,
    records: Vec<IterationRecord>,
    best: Option<(f64, Trajectory)>,
    model: Option<Arc<DynamicsModel>>,
    prior: Option<PriorMean>,
    surface_hyper: Option<KernelHyper>,
    stats: TrialStats,
    started: Instant,
}

impl<'a> Trial<'a> {
    fn new(cfg: &'a ExperimentConfig, index: usize, data: TrialData) -> Self {
        let mut t = Self {
            cfg,
            index,
            seed: trial_seed(cfg, index),
            label: cfg.label(),
            bounds: cfg.search_box(),
            d1: data.d1,
            d2: data.d2.clone(),
            records: Vec::new(),
            best: None,
            model: None,
            prior: None,
            surface_hyper: None,
            stats: TrialStats::default(),
            started: Instant::now(),
        };
        for (rec, traj) in data.d2.records().iter().zip(data.trajectories) {
            t.record(0, rec.theta.clone(), traj);
        }
        t
    }

    fn wall_time(&self) -> f64 {
        if self.cfg.record_wall_time {
            self.started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn record(&mut self, iteration: usize, theta: Vec<f64>, traj: Trajectory) {
        let cost = traj.observed_cost;
        if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
            self.best = Some((cost, traj));
        }
        let incumbent = self.best.as_ref().map(|(b, _)| *b).expect("just set");
        self.records.push(IterationRecord {
            method: self.label.clone(),
            trial: self.index,
            iteration,
            proposed_theta: theta,
            observed_cost: cost,
            incumbent_cost: incumbent,
            wall_time: self.wall_time(),
        });
    }

    /// Runs `theta` on the real system and appends to D1, D2 and the records.
    fn evaluate(&mut self, iteration: usize, theta: Vec<f64>) -> Result<()> {
        let traj = rollout_real(&self.cfg.env, &theta, stream(self.seed, EVAL_STREAM, iteration as u64))?;
        self.d1.extend_from_trajectory(&traj)?;
        self.d2.push(theta.clone(), traj.observed_cost)?;
        self.record(iteration, theta, traj);
        Ok(())
    }

    fn mc_config(&self) -> McConfig {
        let epoch = self.stats.dynamics_trainings as u64;
        let worst = self
            .d2
            .records()
            .iter()
            .map(|r| r.observed_cost.abs())
            .fold(0.0, f64::max);
        McConfig {
            n_particles: self.cfg.mc.n_particles,
            seed: stream(self.seed, MC_STREAM, epoch),
            penalty_cap: self.cfg.mc.penalty_factor * worst.max(1e-6),
        }
    }

    /// Fits the dynamics model on D1 (warm-started from the previous one)
    /// and rebuilds the learned prior with a fresh MC epoch.
    fn retrain(&mut self) -> Result<McConfig> {
        let mut dyn_cfg = self.cfg.gp.dynamics.clone();
        dyn_cfg.fit.seed = seed::mix(
            dyn_cfg.fit.seed,
            stream(self.seed, DYNAMICS_STREAM, self.stats.dynamics_trainings as u64),
        );
        let model = Arc::new(train_dynamics(&self.d1, &dyn_cfg, self.model.as_deref())?);
        let mc = self.mc_config();
        self.stats.dynamics_trainings += 1;
        self.prior = Some(learned_prior(model.clone(), self.cfg.env.clone(), mc));
        self.model = Some(model);
        Ok(mc)
    }

    fn mb_iteration(&mut self, i: usize) -> Result<()> {
        let mc = self.retrain()?;
        let model = self.model.clone().expect("trained");
        let (theta, predicted) = mb_propose(&*model, &self.cfg.env, &self.bounds, self.cfg.direct.model(), &mc)?;
        self.stats.predicted_costs.push((i, predicted));
        self.evaluate(i, theta)
    }

    fn bo_iteration(&mut self, i: usize, mode: &PriorMode) -> Result<()> {
        let prior = match mode {
            PriorMode::Zero => PriorMean::zero(),
            PriorMode::Fixed(p) => p.clone(),
            PriorMode::Learned { period } => {
                if self.prior.is_none() || (i - 1).is_multiple_of(*period) {
                    self.retrain()?;
                }
                self.prior.clone().expect("trained")
            }
        };
        let mut surface_cfg = self.cfg.gp.surface.clone();
        surface_cfg.fit.seed = seed::mix(surface_cfg.fit.seed, stream(self.seed, SURFACE_STREAM, i as u64));
        let surface = build_response_surface(&self.d2, prior, &surface_cfg, self.surface_hyper.as_ref())?;
        self.surface_hyper = Some(surface.gp.hyper().clone());
        let theta = propose_next(&surface, &self.bounds, self.cfg.direct.acquisition())?;
        self.evaluate(i, theta)
    }

    fn run_iters(
        &mut self,
        iters: RangeInclusive<usize>,
        mut step: impl FnMut(&mut Self, usize) -> Result<()>,
    ) -> Result<()> {
        for i in iters {
            if let Err(e) = step(self, i) {
                log::warn!("{} trial {} failed at iteration {i}: {e}", self.label, self.index);
                return Err(e);
            }
        }
        Ok(())
    }

    fn finish(mut self, result: Result<()>) -> TrialOutcome {
        self.stats.d1_len = self.d1.len();
        self.stats.d2_len = self.d2.len();
        let failure = result.err().map(|e| TrialFailure {
            iteration: self.records.last().map_or(0, |r| r.iteration + 1),
            message: e.to_string(),
        });
        TrialOutcome {
            trial: self.index,
            records: self.records,
            failure,
            best_trajectory: self.best.map(|(_, t)| t),
            stats: self.stats,
        }
    }
}

/// Runs the BO loop for iterations `1..=n_iters` with the given prior.
/// MBMF and MF are this function with a learned and a zero prior.
pub fn run_bo(cfg: &ExperimentConfig, trial: usize, mode: PriorMode) -> TrialOutcome {
    let data = match init_trial(cfg, trial) {
        Ok(d) => d,
        Err(e) => return init_failure(cfg, trial, e),
    };
    let mut t = Trial::new(cfg, trial, data);
    let res = t.run_iters(1..=cfg.n_iters, |t, i| t.bo_iteration(i, &mode));
    t.finish(res)
}

pub fn run_mbmf(cfg: &ExperimentConfig, trial: usize) -> TrialOutcome {
    run_bo(cfg, trial, PriorMode::Learned { period: cfg.f })
}

pub fn run_mf(cfg: &ExperimentConfig, trial: usize) -> TrialOutcome {
    run_bo(cfg, trial, PriorMode::Zero)
}

/// Model-based baseline: retrain, minimize the predicted cost, execute.
pub fn run_mb(cfg: &ExperimentConfig, trial: usize) -> TrialOutcome {
    let data = match init_trial(cfg, trial) {
        Ok(d) => d,
        Err(e) => return init_failure(cfg, trial, e),
    };
    let mut t = Trial::new(cfg, trial, data);
    let res = t.run_iters(1..=cfg.n_iters, Trial::mb_iteration);
    t.finish(res)
}

/// Model-based for iterations `1..=K`, then model-free BO seeded with every
/// cost observed so far.
pub fn run_mb_then_mf(cfg: &ExperimentConfig, trial: usize) -> TrialOutcome {
    let data = match init_trial(cfg, trial) {
        Ok(d) => d,
        Err(e) => return init_failure(cfg, trial, e),
    };
    let mut t = Trial::new(cfg, trial, data);
    let k = cfg.k.min(cfg.n_iters);
    let mut res = t.run_iters(1..=k, Trial::mb_iteration);
    if res.is_ok() {
        t.stats.d2_len_at_switch = Some(t.d2.len());
        res = t.run_iters(k + 1..=cfg.n_iters, |t, i| t.bo_iteration(i, &PriorMode::Zero));
    }
    t.finish(res)
}

fn init_failure(cfg: &ExperimentConfig, trial: usize, e: crate::Error) -> TrialOutcome {
    log::warn!("{} trial {trial}: initial design failed: {e}", cfg.label());
    TrialOutcome {
        trial,
        records: Vec::new(),
        failure: Some(TrialFailure {
            iteration: 0,
            message: e.to_string(),
        }),
        best_trajectory: None,
        stats: TrialStats::default(),
    }
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialOutcome {
    match cfg.method {
        Method::Mbmf => run_mbmf(cfg, trial),
        Method::Mb => run_mb(cfg, trial),
        Method::Mf => run_mf(cfg, trial),
        Method::MbMfSwitch => run_mb_then_mf(cfg, trial),
    }
}

/// All trials of one configuration, in trial order.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub outcomes: Vec<TrialOutcome>,
}

impl ExperimentResult {
    pub fn label(&self) -> String {
        self.config.label()
    }

    pub fn n_valid(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_valid()).count()
    }

    /// Final incumbents of the valid trials.
    pub fn final_costs(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter(|o| o.is_valid())
            .filter_map(|o| o.final_incumbent())
            .collect()
    }
}

/// Runs trials `0..n_trials`. Trials are independent, so with the `parallel`
/// feature they run on the rayon pool; results are identical either way.
pub fn run_experiment(cfg: &ExperimentConfig) -> ExperimentResult {
    let trials: Vec<usize> = (0..cfg.n_trials).collect();
    #[cfg(feature = "parallel")]
    let outcomes = {
        use rayon::prelude::*;
        trials.par_iter().map(|&t| run_trial(cfg, t)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes = trials.iter().map(|&t| run_trial(cfg, t)).collect();
    ExperimentResult {
        config: cfg.clone(),
        outcomes,
    }
}
