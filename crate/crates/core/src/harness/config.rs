use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayesopt::SurfaceConfig;
use crate::direct::{DirectConfig, SearchBox};
use crate::dynamics::DynamicsConfig;
use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::gp::FitConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MBMF")]
    Mbmf,
    #[serde(rename = "MB")]
    Mb,
    #[serde(rename = "MF")]
    Mf,
    #[serde(rename = "MB_MF_SWITCH")]
    MbMfSwitch,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mbmf, Method::Mb, Method::Mf, Method::MbMfSwitch];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mbmf => "MBMF",
            Method::Mb => "MB",
            Method::Mf => "MF",
            Method::MbMfSwitch => "MB_MF_SWITCH",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['-', '+'], "_").as_str() {
            "MBMF" => Ok(Method::Mbmf),
            "MB" => Ok(Method::Mb),
            "MF" => Ok(Method::Mf),
            "MB_MF_SWITCH" | "MB_MF" => Ok(Method::MbMfSwitch),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSettings {
    pub n_particles: usize,
    /// Diverged particles cost this multiple of the worst real cost observed
    /// when the model was trained.
    pub penalty_factor: f64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            n_particles: 200,
            penalty_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectSettings {
    /// Evaluations per acquisition maximization.
    pub acquisition_budget: usize,
    /// Evaluations per minimization of the model-predicted cost (MB).
    pub model_budget: usize,
    pub epsilon: f64,
    /// Policy parameters are searched in `[-theta_bound, theta_bound]`.
    pub theta_bound: f64,
}

impl Default for DirectSettings {
    fn default() -> Self {
        Self {
            acquisition_budget: 300,
            model_budget: 500,
            epsilon: 1e-4,
            theta_bound: 5.0,
        }
    }
}

impl DirectSettings {
    pub fn acquisition(&self) -> DirectConfig {
        DirectConfig {
            budget: self.acquisition_budget,
            epsilon: self.epsilon,
        }
    }

    pub fn model(&self) -> DirectConfig {
        DirectConfig {
            budget: self.model_budget,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GpSettings {
    pub dynamics: DynamicsConfig,
    pub surface: SurfaceConfig,
}

/// Everything one experiment needs. Field names are the config file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Prior update period for MBMF, in iterations.
    #[serde(rename = "F")]
    pub f: usize,
    /// Switch iteration for MB_MF_SWITCH.
    #[serde(rename = "K")]
    pub k: usize,
    pub n_init: usize,
    pub n_iters: usize,
    pub n_trials: usize,
    pub base_seed: u64,
    pub env: EnvSpec,
    #[serde(default)]
    pub mc: MonteCarloSettings,
    #[serde(default)]
    pub direct: DirectSettings,
    #[serde(default)]
    pub gp: GpSettings,
    /// Wall times are written as 0 unless this is set, keeping outputs
    /// byte-identical across runs.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    /// Desk-scale point-mass experiment: small particle counts and budgets
    /// sized so a trial takes seconds on one core.
    pub fn desk(kind: EnvKind) -> Self {
        let (env, n_iters) = match kind {
            EnvKind::PointMass => (EnvSpec::point_mass_reference(), 25),
            EnvKind::Pusher => (EnvSpec::pusher_reference(), 20),
        };
        Self {
            method: Method::Mbmf,
            f: 10,
            k: 5,
            n_init: 3,
            n_iters,
            n_trials: 10,
            base_seed: 2024,
            env,
            mc: MonteCarloSettings {
                n_particles: 10,
                penalty_factor: 10.0,
            },
            direct: DirectSettings {
                acquisition_budget: 200,
                model_budget: 300,
                ..Default::default()
            },
            gp: GpSettings {
                dynamics: DynamicsConfig {
                    fit: FitConfig {
                        restarts: 2,
                        ..Default::default()
                    },
                    max_train_points: 40,
                },
                surface: SurfaceConfig {
                    fit: FitConfig {
                        restarts: 3,
                        ..Default::default()
                    },
                    ..Default::default()
                },
            },
            record_wall_time: false,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.f < 1 {
            return bad("F must be at least 1".into());
        }
        if self.n_init < 1 {
            return bad("n_init must be at least 1".into());
        }
        if self.n_iters < 1 || self.n_trials < 1 {
            return bad("n_iters and n_trials must be at least 1".into());
        }
        if self.method == Method::MbMfSwitch && !(1 <= self.k && self.k < self.n_iters) {
            return bad(format!("K must satisfy 1 <= K < n_iters, got K = {}", self.k));
        }
        if self.mc.n_particles < 1 || !(self.mc.penalty_factor > 0.0) {
            return bad("mc needs n_particles >= 1 and a positive penalty_factor".into());
        }
        if self.direct.acquisition_budget < 1 || self.direct.model_budget < 1 || !(self.direct.theta_bound > 0.0) {
            return bad("direct budgets and theta_bound must be positive".into());
        }
        self.env.validate().map_err(|e| Error::Config(format!("env: {e}")))
    }

    pub fn theta_dim(&self) -> usize {
        self.env.theta_dim()
    }

    pub fn search_box(&self) -> SearchBox {
        SearchBox::cube(self.theta_dim(), -self.direct.theta_bound, self.direct.theta_bound).expect("validated bound")
    }

    /// Row label: the method plus the parameter that distinguishes runs of it.
    pub fn label(&self) -> String {
        match self.method {
            Method::Mbmf => format!("MBMF(F={})", self.f),
            Method::MbMfSwitch => format!("MB+MF(K={})", self.k),
            Method::Mb => "MB".into(),
            Method::Mf => "MF".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig::desk(EnvKind::PointMass);
        let text = cfg.to_toml_string().unwrap();
        assert!(text.contains("F = 10"));
        assert!(text.contains("method = \"MBMF\""));
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn invariants_enforced() {
        let mut cfg = ExperimentConfig::desk(EnvKind::PointMass);
        cfg.f = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::desk(EnvKind::PointMass);
        cfg.method = Method::MbMfSwitch;
        cfg.k = cfg.n_iters;
        assert!(cfg.validate().is_err());
        cfg.k = 0;
        assert!(cfg.validate().is_err());
        cfg.method = Method::Mb;
        assert!(cfg.validate().is_ok());
        let mut cfg = ExperimentConfig::desk(EnvKind::Pusher);
        cfg.n_init = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = ExperimentConfig::desk(EnvKind::PointMass).to_toml_string().unwrap();
        assert!(ExperimentConfig::from_toml_str(&format!("bogus = 1\n{text}")).is_err());
    }

    #[test]
    fn labels_and_parsing() {
        let mut cfg = ExperimentConfig::desk(EnvKind::PointMass);
        assert_eq!(cfg.label(), "MBMF(F=10)");
        cfg.method = Method::MbMfSwitch;
        assert_eq!(cfg.label(), "MB+MF(K=5)");
        assert_eq!("mb-mf-switch".parse::<Method>().unwrap(), Method::MbMfSwitch);
        assert!("pilco".parse::<Method>().is_err());
    }
}
