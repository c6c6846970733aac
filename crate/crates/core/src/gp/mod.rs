//! Gaussian-process regression with an ARD squared-exponential kernel and an
//! arbitrary prior mean.

mod fit;
mod kernel;
mod lbfgs;
mod model;
mod prior;

pub use fit::{fit, fit_with_report, FitConfig, FitReport, RestartReport};
pub use kernel::{se_kernel, KernelHyper};
pub use model::{log_marginal_likelihood, GpModel, JITTER_MAX, JITTER_START};
pub use prior::PriorMean;

#[cfg(test)]
use model::lml_with_gradient;
