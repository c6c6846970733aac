//! GP response surface over policy parameters, expected improvement, and
//! acquisition maximization with DIRECT.
//!
//! The model-free baseline is this same code path with a zero prior mean.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::direct::{direct_minimize, DirectConfig, SearchBox};
use crate::error::{check_dims, Error, Result};
use crate::gp::{self, FitConfig, GpModel, KernelHyper, PriorMean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub theta: Vec<f64>,
    pub observed_cost: f64,
}

/// Evaluated policies and their observed costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDataset {
    dim: usize,
    records: Vec<CostRecord>,
}

impl CostDataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[CostRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, theta: Vec<f64>, observed_cost: f64) -> Result<()> {
        check_dims("policy parameters", self.dim, theta.len())?;
        if !observed_cost.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "observed cost {observed_cost} is not finite"
            )));
        }
        self.records.push(CostRecord { theta, observed_cost });
        Ok(())
    }

    /// Lowest observed cost; the earliest record wins ties.
    pub fn best(&self) -> Option<&CostRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&CostRecord>, r| match best {
                Some(b) if b.observed_cost <= r.observed_cost => Some(b),
                _ => Some(r),
            })
    }

    /// EI exploration offset: 1% of the observed cost range, floored at 1e-6.
    pub fn exploration_offset(&self) -> f64 {
        let (lo, hi) = self
            .records
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.observed_cost), hi.max(r.observed_cost))
            });
        (0.01 * (hi - lo)).max(1e-6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceConfig {
    pub fit: FitConfig,
    /// Refit hyperparameters on every build. When false, a surface built with
    /// previous hyperparameters only reconditions on the data.
    pub refit: bool,
    /// Lengthscale used while there is a single observation and nothing can
    /// be fitted.
    pub fallback_lengthscale: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            refit: true,
            fallback_lengthscale: 2.5,
        }
    }
}

/// A fitted response surface and the incumbent it improves on.
#[derive(Debug, Clone)]
pub struct ResponseSurface {
    pub gp: GpModel,
    pub incumbent: CostRecord,
    pub xi: f64,
}

/// Fits a GP to `(theta, observed_cost)` around `prior`.
///
/// `previous` is used as a warm start, or as the fixed hyperparameters when
/// refitting is switched off.
pub fn build_response_surface(
    data: &CostDataset,
    prior: PriorMean,
    config: &SurfaceConfig,
    previous: Option<&KernelHyper>,
) -> Result<ResponseSurface> {
    let incumbent = data
        .best()
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("response surface needs at least one record".into()))?;
    let inputs: Vec<Vec<f64>> = data.records().iter().map(|r| r.theta.clone()).collect();
    let targets: Vec<f64> = data.records().iter().map(|r| r.observed_cost).collect();
    let gp = match previous {
        Some(h) if !config.refit => GpModel::condition(inputs, targets, prior, h.clone())?,
        _ if data.len() == 1 => {
            let residual = targets[0] - prior.eval(&inputs[0]);
            let signal = (residual * residual).max(1.0);
            let hyper = KernelHyper::isotropic(data.dim(), config.fallback_lengthscale, signal, 1e-8 * signal)?;
            GpModel::condition(inputs, targets, prior, hyper)?
        }
        _ => {
            let fit_cfg = FitConfig {
                warm_start: previous.cloned(),
                ..config.fit.clone()
            };
            gp::fit(inputs, targets, prior, &fit_cfg)?
        }
    };
    Ok(ResponseSurface {
        gp,
        incumbent,
        xi: data.exploration_offset(),
    })
}

/// Closed-form expected improvement below `best - xi` for a Gaussian
/// prediction `N(mu, sigma^2)`.
pub fn ei_closed_form(mu: f64, sigma: f64, best: f64, xi: f64) -> f64 {
    let improvement = best - xi - mu;
    if !(sigma > 0.0) {
        return improvement.max(0.0);
    }
    let z = improvement / sigma;
    let n = Normal::standard();
    (improvement * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

pub fn expected_improvement(surface: &ResponseSurface, theta: &[f64]) -> Result<f64> {
    let (mu, var) = surface.gp.predict(theta)?;
    Ok(ei_closed_form(
        mu,
        var.sqrt(),
        surface.incumbent.observed_cost,
        surface.xi,
    ))
}

/// Maximizes EI over the box by running DIRECT on its negation. When EI is
/// zero everywhere the box center, DIRECT's first sample, is returned.
pub fn propose_next(surface: &ResponseSurface, bounds: &SearchBox, config: DirectConfig) -> Result<Vec<f64>> {
    check_dims("search box", surface.gp.dim(), bounds.dim())?;
    let neg_ei = |theta: &[f64]| match expected_improvement(surface, theta) {
        Ok(v) => -v,
        Err(_) => f64::NAN,
    };
    Ok(direct_minimize(neg_ei, bounds, config)?.best_point)
}
