use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

/// Hyperparameters of the ARD squared-exponential kernel.
///
/// Lengthscales are in input units, variances in squared output units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelHyper {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let hyper = Self {
            lengthscales,
            signal_variance,
            noise_variance,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance, noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one lengthscale".into()));
        }
        if !self.lengthscales.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lengthscales must be positive and finite: {:?}",
                self.lengthscales
            )));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "signal variance must be positive: {}",
                self.signal_variance
            )));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be non-negative: {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// `[ln l_1, .., ln l_d, ln signal, ln noise]`; the noise entry is only
    /// meaningful when the noise variance is positive.
    pub fn to_log(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        p.push(self.signal_variance.ln());
        p.push(self.noise_variance.ln());
        p
    }

    pub fn from_log(p: &[f64]) -> Self {
        let d = p.len() - 2;
        Self {
            lengthscales: p[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: p[d].exp(),
            noise_variance: p[d + 1].exp(),
        }
    }
}

/// ARD squared-exponential covariance between two inputs.
pub fn se_kernel(x1: &[f64], x2: &[f64], hyper: &KernelHyper) -> Result<f64> {
    check_dims("se_kernel x1", hyper.dim(), x1.len())?;
    check_dims("se_kernel x2", hyper.dim(), x2.len())?;
    Ok(se_unchecked(x1, x2, &hyper.lengthscales, hyper.signal_variance))
}

#[inline]
pub(crate) fn se_unchecked(x1: &[f64], x2: &[f64], lengthscales: &[f64], signal_variance: f64) -> f64 {
    let r2: f64 = x1
        .iter()
        .zip(x2)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let z = (a - b) / l;
            z * z
        })
        .sum();
    signal_variance * (-0.5 * r2).exp()
}
