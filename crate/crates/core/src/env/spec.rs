use serde::{Deserialize, Serialize};

use super::{pointmass, pusher};
use crate::error::{check_dims, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    PointMass,
    Pusher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub running: f64,
    pub terminal: f64,
    /// Weight on the squared action norm.
    pub action: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            running: 1.0,
            terminal: 10.0,
            action: 0.0,
        }
    }
}

/// Planar three-link arm with a disc end-effector and a disc object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PusherGeometry {
    pub link_lengths: [f64; 3],
    /// Limits for the two actuated joints.
    pub joint_limits: [[f64; 2]; 2],
    pub effector_radius: f64,
    pub object_radius: f64,
}

/// A simulated system: dynamics parameters, task geometry, and cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub state_dim: usize,
    pub action_dim: usize,
    pub dt: f64,
    pub horizon: usize,
    pub action_bounds: Vec<[f64; 2]>,
    pub start_state: Vec<f64>,
    /// Target for the cost position: the point mass itself or the pushed object.
    pub goal: Vec<f64>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub cost_weights: CostWeights,
    #[serde(default)]
    pub drag: f64,
    #[serde(default)]
    pub pusher: Option<PusherGeometry>,
    /// Standard deviation of additive noise on observed costs; 0 disables it.
    #[serde(default)]
    pub cost_noise_std: f64,
    /// States outside this box are treated as diverged in model rollouts.
    pub sanity_box: Vec<[f64; 2]>,
}

impl EnvSpec {
    /// Point mass among two obstacles blocking the start-goal diagonal.
    pub fn point_mass_reference() -> Self {
        Self {
            kind: EnvKind::PointMass,
            state_dim: 4,
            action_dim: 2,
            dt: 0.05,
            horizon: 50,
            action_bounds: vec![[-1.0, 1.0]; 2],
            start_state: vec![0.1, 0.1, 0.0, 0.0],
            goal: vec![0.9, 0.9],
            obstacles: vec![
                Obstacle {
                    center: [0.35, 0.35],
                    radius: 0.12,
                },
                Obstacle {
                    center: [0.65, 0.65],
                    radius: 0.12,
                },
            ],
            cost_weights: CostWeights::default(),
            drag: 0.1,
            pusher: None,
            cost_noise_std: 0.0,
            sanity_box: vec![[-2.0, 3.0], [-2.0, 3.0], [-10.0, 10.0], [-10.0, 10.0]],
        }
    }

    /// Quasi-static planar pusher: joints 1-2 driven, joint 3 passive.
    pub fn pusher_reference() -> Self {
        Self {
            kind: EnvKind::Pusher,
            state_dim: 5,
            action_dim: 2,
            dt: 0.05,
            horizon: 40,
            action_bounds: vec![[-1.0, 1.0]; 2],
            start_state: vec![-0.9, 1.8, 0.4, 0.65, 0.15],
            goal: vec![0.8, -0.05],
            obstacles: Vec::new(),
            cost_weights: CostWeights {
                running: 10.0,
                terminal: 100.0,
                action: 0.0,
            },
            drag: 0.0,
            pusher: Some(PusherGeometry {
                link_lengths: [0.4, 0.35, 0.25],
                joint_limits: [[-3.0, 3.0], [-2.6, 2.6]],
                effector_radius: 0.04,
                object_radius: 0.06,
            }),
            cost_noise_std: 0.0,
            sanity_box: vec![[-4.0, 4.0], [-4.0, 4.0], [-4.0, 4.0], [-2.0, 2.0], [-2.0, 2.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = match self.kind {
            EnvKind::PointMass => (4, 2),
            EnvKind::Pusher => (5, 2),
        };
        check_dims("state_dim", n, self.state_dim)?;
        check_dims("action_dim", m, self.action_dim)?;
        check_dims("start_state", n, self.start_state.len())?;
        check_dims("action_bounds", m, self.action_bounds.len())?;
        check_dims("goal", 2, self.goal.len())?;
        check_dims("sanity_box", n, self.sanity_box.len())?;
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.action_bounds.iter().any(|[lo, hi]| !(lo <= hi)) {
            return Err(Error::InvalidArgument("action bounds must satisfy lo <= hi".into()));
        }
        if self.drag < 0.0 || self.cost_noise_std < 0.0 {
            return Err(Error::InvalidArgument(
                "drag and cost noise must be non-negative".into(),
            ));
        }
        for o in &self.obstacles {
            if !(o.radius > 0.0) {
                return Err(Error::InvalidArgument("obstacle radius must be positive".into()));
            }
            for (what, p) in [("start", &self.start_state[..2]), ("goal", &self.goal[..])] {
                if self.kind == EnvKind::PointMass && dist(p, &o.center) < o.radius {
                    return Err(Error::InvalidArgument(format!("{what} lies inside an obstacle")));
                }
            }
        }
        if self.kind == EnvKind::Pusher && self.pusher.is_none() {
            return Err(Error::InvalidArgument(
                "pusher environment needs pusher geometry".into(),
            ));
        }
        Ok(())
    }

    pub fn theta_dim(&self) -> usize {
        self.action_dim * (self.state_dim + 1)
    }

    /// The planar point the cost is measured on.
    pub fn cost_position<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        match self.kind {
            EnvKind::PointMass => &state[0..2],
            EnvKind::Pusher => &state[3..5],
        }
    }

    pub fn running_cost(&self, state: &[f64], action: &[f64]) -> f64 {
        let p = self.cost_position(state);
        let d2 = sq_dist(p, &self.goal);
        let u2: f64 = action.iter().map(|u| u * u).sum();
        self.cost_weights.running * d2 + self.cost_weights.action * u2
    }

    pub fn terminal_cost(&self, state: &[f64]) -> f64 {
        self.cost_weights.terminal * sq_dist(self.cost_position(state), &self.goal)
    }

    /// Distance from the cost position to the goal.
    pub fn goal_distance(&self, state: &[f64]) -> f64 {
        sq_dist(self.cost_position(state), &self.goal).sqrt()
    }

    pub fn clip_action(&self, action: &mut [f64]) {
        for (u, [lo, hi]) in action.iter_mut().zip(&self.action_bounds) {
            *u = u.clamp(*lo, *hi);
        }
    }

    pub fn in_sanity_box(&self, state: &[f64]) -> bool {
        state
            .iter()
            .zip(&self.sanity_box)
            .all(|(x, [lo, hi])| x.is_finite() && *x >= *lo && *x <= *hi)
    }

    /// One step of the true system. The action is clipped to its bounds.
    pub fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut u = action.to_vec();
        self.clip_action(&mut u);
        match self.kind {
            EnvKind::PointMass => pointmass::step_pointmass(state, &u, self),
            EnvKind::Pusher => pusher::step_pusher(state, &u, self),
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}
