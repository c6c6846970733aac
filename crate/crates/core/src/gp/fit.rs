use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelHyper;
use super::lbfgs::minimize_box;
use super::model::{lml_with_gradient, GpModel};
use super::prior::PriorMean;
use crate::error::{check_dims, Error, Result};
use crate::seed;

/// Settings for marginal-likelihood hyperparameter fitting.
///
/// Bounds are relative: lengthscales to the per-dimension input range, both
/// variances to the mean squared residual of the targets about the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub lengthscale_bounds: [f64; 2],
    pub signal_bounds: [f64; 2],
    pub noise_bounds: [f64; 2],
    /// Extra starting point, typically the previous fit.
    #[serde(skip)]
    pub warm_start: Option<KernelHyper>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 100,
            tolerance: 1e-5,
            seed: 0,
            lengthscale_bounds: [1e-3, 1e3],
            signal_bounds: [1e-4, 1e4],
            noise_bounds: [1e-8, 1.0],
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    pub start: KernelHyper,
    pub start_lml: f64,
    pub final_lml: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub restarts: Vec<RestartReport>,
    pub best_lml: f64,
}

struct Scales {
    input_std: Vec<f64>,
    input_range: Vec<f64>,
    target_scale: f64,
}

fn scales(inputs: &[Vec<f64>], residuals: &[f64]) -> Scales {
    let n = inputs.len() as f64;
    let d = inputs[0].len();
    let mut input_std = Vec::with_capacity(d);
    let mut input_range = Vec::with_capacity(d);
    for j in 0..d {
        let col = inputs.iter().map(|x| x[j]);
        let mean = col.clone().sum::<f64>() / n;
        let var = col.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let std = var.sqrt();
        input_std.push(if std > 1e-12 { std } else { 1.0 });
        input_range.push(if hi - lo > 1e-12 { hi - lo } else { 1.0 });
    }
    let target_scale = (residuals.iter().map(|r| r * r).sum::<f64>() / n).max(1e-12);
    Scales {
        input_std,
        input_range,
        target_scale,
    }
}

/// Fits kernel hyperparameters by multi-start maximization of the log
/// marginal likelihood in log space and conditions the GP at the best point.
pub fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, prior: PriorMean, config: &FitConfig) -> Result<GpModel> {
    fit_with_report(inputs, targets, prior, config).map(|(m, _)| m)
}

pub fn fit_with_report(
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    prior: PriorMean,
    config: &FitConfig,
) -> Result<(GpModel, FitReport)> {
    if inputs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "fitting needs at least 2 points, got {}",
            inputs.len()
        )));
    }
    check_dims("number of targets", inputs.len(), targets.len())?;
    let d = inputs[0].len();
    for x in &inputs {
        check_dims("training input", d, x.len())?;
    }
    let residuals: Vec<f64> = inputs.iter().zip(&targets).map(|(x, f)| f - prior.eval(x)).collect();
    let sc = scales(&inputs, &residuals);

    let mut lo = Vec::with_capacity(d + 2);
    let mut hi = Vec::with_capacity(d + 2);
    for r in &sc.input_range {
        lo.push((config.lengthscale_bounds[0] * r).ln());
        hi.push((config.lengthscale_bounds[1] * r).ln());
    }
    lo.push((config.signal_bounds[0] * sc.target_scale).ln());
    hi.push((config.signal_bounds[1] * sc.target_scale).ln());
    lo.push((config.noise_bounds[0] * sc.target_scale).ln());
    hi.push((config.noise_bounds[1] * sc.target_scale).ln());

    let clamp = |p: Vec<f64>| -> Vec<f64> {
        p.iter()
            .zip(lo.iter().zip(&hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = &config.warm_start {
        if w.dim() == d && w.validate().is_ok() && w.noise_variance > 0.0 {
            starts.push(clamp(w.to_log()));
        }
    }
    let mut heuristic: Vec<f64> = sc.input_std.iter().map(|s| s.ln()).collect();
    heuristic.push(sc.target_scale.ln());
    heuristic.push((1e-2 * sc.target_scale).ln());
    starts.push(clamp(heuristic));
    let mut rng = seed::rng(seed::mix(config.seed, d as u64));
    while starts.len() < config.restarts.max(1) {
        let mut p: Vec<f64> = sc
            .input_std
            .iter()
            .map(|s| (s * rng.random_range(0.2f64..5.0)).ln())
            .collect();
        p.push((sc.target_scale * rng.random_range(0.1f64..10.0)).ln());
        p.push((sc.target_scale * 10f64.powf(rng.random_range(-6.0..-1.0))).ln());
        starts.push(clamp(p));
    }

    let resid = DVector::from_vec(residuals);
    let objective = |p: &[f64]| -> Option<(f64, Vec<f64>)> {
        let hyper = KernelHyper::from_log(p);
        let (lml, grad) = lml_with_gradient(&inputs, &resid, &hyper).ok()?;
        if !lml.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some((-lml, grad.into_iter().map(|g| -g).collect()))
    };

    let mut reports = Vec::with_capacity(starts.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let start_lml = objective(start).map_or(f64::NEG_INFINITY, |(v, _)| -v);
        let outcome = minimize_box(objective, start, &lo, &hi, config.max_iters, config.tolerance);
        let (x, lml, iterations) = match outcome {
            Some(o) => (o.x, -o.value, o.iterations),
            None => (start.clone(), f64::NEG_INFINITY, 0),
        };
        reports.push(RestartReport {
            start: KernelHyper::from_log(start),
            start_lml,
            final_lml: lml,
            iterations,
        });
        if lml.is_finite() && best.as_ref().is_none_or(|(_, b)| lml > *b) {
            best = Some((x, lml));
        }
    }

    let Some((best_p, best_lml)) = best else {
        let best_start = reports.iter().map(|r| r.start_lml).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::Fit {
            message: format!("all {} restarts produced a non-finite likelihood", reports.len()),
            best_lml: best_start,
        });
    };
    let hyper = KernelHyper::from_log(&best_p);
    let model = GpModel::condition(inputs, targets, prior, hyper)?;
    Ok((
        model,
        FitReport {
            restarts: reports,
            best_lml,
        },
    ))
}
