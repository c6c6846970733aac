use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::kernel::{se_unchecked, KernelHyper};
use super::prior::PriorMean;
use crate::error::{check_dims, Error, Result};

/// Initial diagonal jitter, relative to the signal variance.
pub const JITTER_START: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-2;

/// A Gaussian process conditioned on data.
///
/// Immutable once built; prediction only reads.
#[derive(Debug, Clone)]
pub struct GpModel {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    hyper: KernelHyper,
    prior: PriorMean,
    prior_at_inputs: Vec<f64>,
    /// Inputs divided by the lengthscales, one contiguous block per input
    /// dimension.
    scaled: Vec<f64>,
    inv_lengthscales: Vec<f64>,
    jitter: f64,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    lml: f64,
}

/// Lower Cholesky factor of `K + (noise + jitter) I`, escalating the jitter
/// until factorization succeeds.
pub(crate) fn factorize(mut k: DMatrix<f64>, hyper: &KernelHyper) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    for i in 0..n {
        k[(i, i)] += hyper.noise_variance;
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * hyper.signal_variance;
        let mut a = k.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = a.cholesky() {
            let l = chol.unpack();
            if l.iter().all(|v| v.is_finite()) {
                return Ok((l, jitter));
            }
        }
        rel *= 10.0;
    }
    Err(Error::Numerical(format!(
        "kernel matrix of size {n} not positive definite up to jitter {JITTER_MAX:e} x signal variance"
    )))
}

pub(crate) fn kernel_matrix(inputs: &[Vec<f64>], hyper: &KernelHyper) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.signal_variance;
        for j in 0..i {
            let v = se_unchecked(&inputs[i], &inputs[j], &hyper.lengthscales, hyper.signal_variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on `(inputs, targets)`.
    /// An empty data set is allowed and yields the prior.
    pub fn condition(inputs: Vec<Vec<f64>>, targets: Vec<f64>, prior: PriorMean, hyper: KernelHyper) -> Result<Self> {
        hyper.validate()?;
        let dim = hyper.dim();
        check_dims("number of targets", inputs.len(), targets.len())?;
        for x in &inputs {
            check_dims("training input", dim, x.len())?;
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("targets must be finite".into()));
        }
        let n = inputs.len();
        let prior_at_inputs: Vec<f64> = inputs.iter().map(|x| prior.eval(x)).collect();
        let residual = DVector::from_iterator(n, targets.iter().zip(&prior_at_inputs).map(|(f, m)| f - m));

        let (chol, jitter) = factorize(kernel_matrix(&inputs, &hyper), &hyper)?;
        let alpha = if n == 0 {
            DVector::zeros(0)
        } else {
            let z = chol.solve_lower_triangular(&residual).expect("nonsingular factor");
            chol.tr_solve_lower_triangular(&z).expect("nonsingular factor")
        };
        let log_det: f64 = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let lml = -0.5 * residual.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln();

        let inv_lengthscales: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / l).collect();
        let scaled = (0..dim)
            .flat_map(|j| {
                let s = inv_lengthscales[j];
                inputs.iter().map(move |x| x[j] * s)
            })
            .collect();
        Ok(Self {
            dim,
            inputs,
            targets,
            hyper,
            prior,
            prior_at_inputs,
            scaled,
            inv_lengthscales,
            jitter,
            chol,
            alpha,
            lml,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn hyper(&self) -> &KernelHyper {
        &self.hyper
    }

    pub fn prior(&self) -> &PriorMean {
        &self.prior
    }

    pub fn prior_at_inputs(&self) -> &[f64] {
        &self.prior_at_inputs
    }

    /// Diagonal jitter actually added during factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    fn cross_covariance(&self, query: &[f64], out: &mut [f64]) {
        let mut q = vec![0.0; self.dim];
        self.cross_covariance_with(query, &mut q, out);
    }

    /// `scratch` holds the scaled query and must have length `dim`.
    fn cross_covariance_with(&self, query: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let n = out.len();
        for ((q, v), s) in scratch.iter_mut().zip(query).zip(&self.inv_lengthscales) {
            *q = v * s;
        }
        out.fill(0.0);
        for (j, q) in scratch.iter().enumerate() {
            for (r2, x) in out.iter_mut().zip(&self.scaled[j * n..(j + 1) * n]) {
                *r2 += (x - q) * (x - q);
            }
        }
        for k in out.iter_mut() {
            *k = self.hyper.signal_variance * (-0.5 * *k).exp();
        }
    }

    /// Forward substitution `L z = k` in place, column-oriented so the inner
    /// loop runs over contiguous memory of the column-major factor.
    fn forward_solve(&self, k: &mut [f64]) {
        let n = k.len();
        let l = self.chol.as_slice();
        for j in 0..n {
            let col = &l[j * n..(j + 1) * n];
            let z = k[j] / col[j];
            k[j] = z;
            for (ki, lij) in k[j + 1..].iter_mut().zip(&col[j + 1..]) {
                *ki -= lij * z;
            }
        }
    }

    /// Posterior mean and variance at `query`.
    pub fn predict(&self, query: &[f64]) -> Result<(f64, f64)> {
        check_dims("query", self.dim, query.len())?;
        let m = self.prior.eval(query);
        let n = self.len();
        if n == 0 {
            return Ok((m, self.hyper.signal_variance));
        }
        let mut k = DVector::zeros(n);
        self.cross_covariance(query, k.as_mut_slice());
        let mean = m + k.dot(&self.alpha);
        self.chol.solve_lower_triangular_mut(&mut k);
        let var = (self.hyper.signal_variance - k.norm_squared()).max(0.0);
        Ok((mean, var))
    }

    /// Posterior mean only; skips the triangular solve.
    pub fn predict_mean(&self, query: &[f64]) -> Result<f64> {
        check_dims("query", self.dim, query.len())?;
        let m = self.prior.eval(query);
        if self.is_empty() {
            return Ok(m);
        }
        let mut k = vec![0.0; self.len()];
        self.cross_covariance(query, &mut k);
        Ok(m + k.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Posterior mean and variance for a batch of queries. Numerically the
    /// same as calling [`GpModel::predict`] on each, up to summation order.
    pub fn predict_batch<Q: AsRef<[f64]>>(&self, queries: &[Q]) -> Result<Vec<(f64, f64)>> {
        for q in queries {
            check_dims("query", self.dim, q.as_ref().len())?;
        }
        let n = self.len();
        if n == 0 {
            return Ok(queries
                .iter()
                .map(|q| (self.prior.eval(q.as_ref()), self.hyper.signal_variance))
                .collect());
        }
        let mut scratch = vec![0.0; self.dim];
        let mut k = vec![0.0; n];
        let alpha = self.alpha.as_slice();
        Ok(queries
            .iter()
            .map(|q| {
                let q = q.as_ref();
                self.cross_covariance_with(q, &mut scratch, &mut k);
                let mean: f64 = k.iter().zip(alpha).map(|(a, b)| a * b).sum();
                self.forward_solve(&mut k);
                let reduction: f64 = k.iter().map(|v| v * v).sum();
                let var = (self.hyper.signal_variance - reduction).max(0.0);
                (self.prior.eval(q) + mean, var)
            })
            .collect())
    }
}

/// Log marginal likelihood of `targets` under the GP prior with the given
/// mean and kernel, computed through the jittered Cholesky factor.
pub fn log_marginal_likelihood(
    inputs: &[Vec<f64>],
    targets: &[f64],
    prior: &PriorMean,
    hyper: &KernelHyper,
) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "log marginal likelihood needs at least one point".into(),
        ));
    }
    let model = GpModel::condition(inputs.to_vec(), targets.to_vec(), prior.clone(), hyper.clone())?;
    Ok(model.log_marginal_likelihood())
}

/// Log marginal likelihood of zero-mean `residuals` and its gradient with
/// respect to `[ln l_1.., ln signal, ln noise]`.
pub(crate) fn lml_with_gradient(
    inputs: &[Vec<f64>],
    residuals: &DVector<f64>,
    hyper: &KernelHyper,
) -> Result<(f64, Vec<f64>)> {
    let n = inputs.len();
    let d = hyper.dim();
    let kse = kernel_matrix(inputs, hyper);
    let (l, jitter) = factorize(kse.clone(), hyper)?;
    let z = l.solve_lower_triangular(residuals).expect("nonsingular factor");
    let alpha = l.tr_solve_lower_triangular(&z).expect("nonsingular factor");
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lml = -0.5 * residuals.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln();

    // A^{-1} from the factor: L^{-T} L^{-1}.
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("nonsingular factor");
    let ainv = linv.tr_mul(&linv);
    // W = alpha alpha^T - A^{-1}; dLML/dp = 0.5 tr(W dA/dp).
    let mut w = &alpha * alpha.transpose();
    w -= &ainv;

    let mut grad = vec![0.0; d + 2];
    for i in 0..n {
        for j in 0..i {
            let wk = w[(i, j)] * kse[(i, j)];
            if wk == 0.0 {
                continue;
            }
            for (dd, g) in grad[..d].iter_mut().enumerate() {
                let diff = (inputs[i][dd] - inputs[j][dd]) / hyper.lengthscales[dd];
                // symmetric pair counted twice, times the 0.5 prefactor
                *g += wk * diff * diff;
            }
        }
    }
    let mut trace_wk = 0.0;
    let mut trace_w = 0.0;
    for i in 0..n {
        trace_w += w[(i, i)];
        for j in 0..n {
            trace_wk += w[(i, j)] * kse[(i, j)];
        }
    }
    // The jitter is proportional to the signal variance, so it moves with it.
    grad[d] = 0.5 * (trace_wk + jitter * trace_w);
    grad[d + 1] = 0.5 * hyper.noise_variance * trace_w;
    Ok((lml, grad))
}
