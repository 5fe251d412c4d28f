//! Gaussian process regression with an anisotropic squared-exponential
//! kernel, trained by maximizing the log marginal likelihood.

use std::f64::consts::PI;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::designs::DesignMatrix;
use crate::error::{Error, Result};
use crate::models::{check_input_dim, BatchResult, Model};
use crate::optimize::{stochastic_minimize, StochasticKind, StochasticOptimizerConfig};
use crate::parameters::RandomStream;

/// Kernel hyperparameters in the units of the data.
///
/// A zero noise variance means a noise-free model: the noise term is then
/// held at zero during training instead of being optimized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl GpHyperparameters {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let h = GpHyperparameters {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        h.validate(h.lengthscales.len())?;
        Ok(h)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.lengthscales.len(),
            });
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.signal_variance) {
            return Err(Error::InvalidArgument("signal variance must be positive".into()));
        }
        if !self.lengthscales.iter().all(|&l| positive(l)) {
            return Err(Error::InvalidArgument("lengthscales must be positive".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
        }
        Ok(())
    }

    /// Unit signal variance, lengthscales at half the input range and a
    /// small noise variance, all relative to the data.
    pub fn default_for(x: &DesignMatrix, y: &[f64]) -> Self {
        let (_, scale) = standardization(y);
        let lengthscales = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                if range > 0.0 && range.is_finite() {
                    0.5 * range
                } else {
                    1.0
                }
            })
            .collect();
        GpHyperparameters {
            signal_variance: scale * scale,
            lengthscales,
            noise_variance: 1e-4 * scale * scale,
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        GpHyperparameters {
            signal_variance: self.signal_variance * factor,
            lengthscales: self.lengthscales.clone(),
            noise_variance: self.noise_variance * factor,
        }
    }
}

/// Optimizer budget for [`train_gp`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpTrainSettings {
    pub restarts: usize,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for GpTrainSettings {
    fn default() -> Self {
        GpTrainSettings {
            restarts: 5,
            steps: 500,
            step_size: 0.05,
            seed: 0,
        }
    }
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
const REFINEMENT_STEPS: usize = 50;

fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = if y.len() > 1 {
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

/// Training inputs with cached per-dimension squared distances.
struct Inputs {
    x: DMatrix<f64>,
    sqdist: Vec<DMatrix<f64>>,
}

impl Inputs {
    fn new(design: &DesignMatrix) -> Self {
        let (n, d) = (design.nrows(), design.ncols());
        let x = DMatrix::from_row_slice(n, d, design.values());
        let sqdist = (0..d)
            .map(|k| DMatrix::from_fn(n, n, |i, j| (x[(i, k)] - x[(j, k)]).powi(2)))
            .collect();
        Inputs { x, sqdist }
    }

    fn signal_kernel(&self, signal_variance: f64, lengthscales: &[f64]) -> DMatrix<f64> {
        let n = self.x.nrows();
        let mut scaled = DMatrix::<f64>::zeros(n, n);
        for (k, dk) in self.sqdist.iter().enumerate() {
            scaled.zip_apply(dk, |s, v| *s -= 0.5 * v / (lengthscales[k] * lengthscales[k]));
        }
        scaled.apply(|v| *v = signal_variance * v.exp());
        scaled
    }
}

/// Cholesky factor of `K + jitter·I`, escalating the jitter tenfold from
/// `1e-10·trace(K)/n` up to `1e-4·trace(K)/n`.
fn factorize(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let mean_diag = k.trace() / n as f64;
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * mean_diag;
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(chol) = kj.cholesky() {
            if rel > JITTER_START {
                debug!("kernel factorization needed jitter {jitter:e}");
            }
            return Ok((chol.unpack(), jitter));
        }
        rel *= 10.0;
        if rel > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::Factorization(format!(
                "kernel matrix not positive definite with jitter up to {:e}",
                JITTER_MAX * mean_diag
            )));
        }
    }
}

fn solve_chol(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let z = l.solve_lower_triangular(b).expect("non-singular cholesky factor");
    l.tr_solve_lower_triangular(&z).expect("non-singular cholesky factor")
}

/// Preconditioned conjugate gradients for `K·α = y` starting from `alpha`;
/// keeps the iterate with the smallest residual.
fn refine(k: &DMatrix<f64>, chol: &DMatrix<f64>, y: &DVector<f64>, mut alpha: DVector<f64>) -> DVector<f64> {
    let mut r = y - k * &alpha;
    let mut best = (r.norm(), alpha.clone());
    let mut z = solve_chol(chol, &r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..REFINEMENT_STEPS {
        let kp = k * &p;
        let pkp = p.dot(&kp);
        if !(pkp > 0.0) || !(rz > 0.0) {
            break;
        }
        let step = rz / pkp;
        alpha.axpy(step, &p, 1.0);
        // recompute rather than update the residual to avoid drift
        r = y - k * &alpha;
        let norm = r.norm();
        if norm < best.0 {
            best = (norm, alpha.clone());
        }
        z = solve_chol(chol, &r);
        let rz_next = r.dot(&z);
        p = &z + (rz_next / rz) * &p;
        rz = rz_next;
    }
    best.1
}

/// Value and gradient with respect to `[ln σ_f², ln ℓ₁..ln ℓ_d, ln σ_n²]`.
fn lml_core(inputs: &Inputs, y: &DVector<f64>, hyper: &GpHyperparameters) -> Result<(f64, Vec<f64>)> {
    let n = y.len();
    let d = inputs.sqdist.len();
    let kf = inputs.signal_kernel(hyper.signal_variance, &hyper.lengthscales);
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += hyper.noise_variance;
    }
    let (l, _) = factorize(&k)?;
    let alpha = solve_chol(&l, y);
    let log_det_half: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
    let value = -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n as f64 * (2.0 * PI).ln();

    // W = ααᵀ − K⁻¹, K⁻¹ = L⁻ᵀL⁻¹
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("non-singular cholesky factor");
    let mut w = linv.tr_mul(&linv);
    w.neg_mut();
    w.ger(1.0, &alpha, &alpha, 1.0);

    let wkf = w.component_mul(&kf);
    let mut grad = Vec::with_capacity(d + 2);
    grad.push(0.5 * wkf.sum());
    for (k, dk) in inputs.sqdist.iter().enumerate() {
        let l2 = hyper.lengthscales[k] * hyper.lengthscales[k];
        grad.push(0.5 * wkf.dot(dk) / l2);
    }
    grad.push(0.5 * hyper.noise_variance * w.trace());
    Ok((value, grad))
}

fn check_training_data(x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a Gaussian process needs at least 2 training points, got {}",
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite training target at row {i}")));
    }
    if let Some(i) = x.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite training input at row {}",
            i / x.ncols().max(1)
        )));
    }
    Ok(())
}

/// Log marginal likelihood of `y` under a zero-mean GP and its gradient
/// with respect to `[ln σ_f², ln ℓ₁..ln ℓ_d, ln σ_n²]`.
pub fn log_marginal_likelihood(x: &DesignMatrix, y: &[f64], hyper: &GpHyperparameters) -> Result<(f64, Vec<f64>)> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("no training points".into()));
    }
    hyper.validate(x.ncols())?;
    lml_core(&Inputs::new(x), &DVector::from_column_slice(y), hyper)
}

/// A trained, immutable Gaussian process. Targets are standardized
/// internally, so the prior mean is the training-target mean.
#[derive(Clone, Debug)]
pub struct GpModel {
    name: String,
    x: DMatrix<f64>,
    y_mean: f64,
    y_scale: f64,
    /// Standardized units.
    hyper: GpHyperparameters,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    log_marginal_likelihood: f64,
}

impl GpModel {
    /// Conditions a GP on data with fixed hyperparameters (no training).
    pub fn fit(x: &DesignMatrix, y: &[f64], hyper: &GpHyperparameters) -> Result<Self> {
        check_training_data(x, y)?;
        hyper.validate(x.ncols())?;
        let (y_mean, y_scale) = standardization(y);
        let hyper_s = hyper.scaled(1.0 / (y_scale * y_scale));
        Self::condition(&Inputs::new(x), y, y_mean, y_scale, hyper_s)
    }

    fn condition(inputs: &Inputs, y: &[f64], y_mean: f64, y_scale: f64, hyper: GpHyperparameters) -> Result<Self> {
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
        let mut k = inputs.signal_kernel(hyper.signal_variance, &hyper.lengthscales);
        for i in 0..y.len() {
            k[(i, i)] += hyper.noise_variance;
        }
        let (chol, jitter) = factorize(&k)?;
        let mut alpha = solve_chol(&chol, &ys);
        let n = y.len() as f64;
        let lml = -0.5 * ys.dot(&alpha)
            - chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
            - 0.5 * n * (2.0 * PI).ln();
        // conjugate gradients on the unjittered system, preconditioned by
        // the jittered factor, recover the accuracy the jitter costs at the
        // training points
        if jitter > 0.0 {
            alpha = refine(&k, &chol, &ys, alpha);
        }
        Ok(GpModel {
            name: "gp".into(),
            x: inputs.x.clone(),
            y_mean,
            y_scale,
            hyper,
            chol,
            alpha,
            jitter,
            log_marginal_likelihood: lml,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_train(&self) -> usize {
        self.x.nrows()
    }

    /// Hyperparameters in data units.
    pub fn hyperparameters(&self) -> GpHyperparameters {
        self.hyper.scaled(self.y_scale * self.y_scale)
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    fn cross_kernel(&self, xstar: &DesignMatrix) -> DMatrix<f64> {
        let (n, d) = (self.x.nrows(), self.x.ncols());
        let ls = &self.hyper.lengthscales;
        DMatrix::from_fn(n, xstar.nrows(), |i, j| {
            let row = xstar.row(j);
            let mut s = 0.0;
            for k in 0..d {
                let diff = (self.x[(i, k)] - row[k]) / ls[k];
                s += diff * diff;
            }
            self.hyper.signal_variance * (-0.5 * s).exp()
        })
    }

    fn check_query(&self, xstar: &DesignMatrix) -> Result<()> {
        if xstar.ncols() != self.x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.x.ncols(),
                got: xstar.ncols(),
            });
        }
        Ok(())
    }

    pub fn predict_mean(&self, xstar: &DesignMatrix) -> Result<Vec<f64>> {
        self.check_query(xstar)?;
        let ks = self.cross_kernel(xstar);
        let mean = ks.tr_mul(&self.alpha);
        Ok(mean.iter().map(|m| self.y_mean + self.y_scale * m).collect())
    }

    /// Posterior mean and variance of the latent function at each row.
    pub fn predict(&self, xstar: &DesignMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_query(xstar)?;
        let ks = self.cross_kernel(xstar);
        let mean = ks.tr_mul(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&ks)
            .expect("non-singular cholesky factor");
        let s2 = self.y_scale * self.y_scale;
        let var = (0..xstar.nrows())
            .map(|j| {
                let reduction = v.column(j).norm_squared();
                (s2 * (self.hyper.signal_variance - reduction)).max(0.0)
            })
            .collect();
        let mean = mean.iter().map(|m| self.y_mean + self.y_scale * m).collect();
        Ok((mean, var))
    }

    /// Root-mean-square error of the predictive mean on held-out data.
    pub fn rmse(&self, x: &DesignMatrix, y: &[f64]) -> Result<f64> {
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let mean = self.predict_mean(x)?;
        let sse: f64 = mean.iter().zip(y).map(|(m, t)| (m - t).powi(2)).sum();
        Ok((sse / y.len() as f64).sqrt())
    }
}

impl Model for GpModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_dim(&self) -> usize {
        self.x.ncols()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, design: &DesignMatrix) -> Result<BatchResult> {
        check_input_dim(self, design)?;
        let mean = self.predict_mean(design)?;
        let mut result = BatchResult::with_capacity(mean.len());
        for m in mean {
            result.push_completed(vec![m]);
        }
        Ok(result)
    }
}

/// Trains a GP by multi-restart Adam ascent of the log marginal likelihood
/// in log-hyperparameter space. Restart 0 starts from `initial` (or
/// [`GpHyperparameters::default_for`]); later restarts perturb it randomly.
pub fn train_gp(
    x: &DesignMatrix,
    y: &[f64],
    initial: Option<&GpHyperparameters>,
    settings: &GpTrainSettings,
) -> Result<GpModel> {
    check_training_data(x, y)?;
    let d = x.ncols();
    let init = match initial {
        Some(h) => {
            h.validate(d)?;
            h.clone()
        }
        None => GpHyperparameters::default_for(x, y),
    };
    let (y_mean, y_scale) = standardization(y);
    let init_s = init.scaled(1.0 / (y_scale * y_scale));
    let inputs = Inputs::new(x);
    let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
    let fit_noise = init_s.noise_variance > 0.0;
    let np = d + 1 + usize::from(fit_noise);

    // box in log space keeps the kernel matrix numerically sane; beyond ten
    // input ranges a lengthscale only trades off against the signal variance
    let mut lower = vec![(1e-4f64).ln()];
    let mut upper = vec![(1e4f64).ln()];
    for j in 0..d {
        let col = x.column(j);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = if hi > lo { hi - lo } else { 1.0 };
        lower.push((1e-3 * range).ln());
        upper.push((10.0 * range).ln());
    }
    if fit_noise {
        lower.push((1e-10f64).ln());
        upper.push((10.0f64).ln());
    }

    let to_hyper = |theta: &[f64]| GpHyperparameters {
        signal_variance: theta[0].exp(),
        lengthscales: theta[1..=d].iter().map(|t| t.exp()).collect(),
        noise_variance: if fit_noise { theta[d + 1].exp() } else { 0.0 },
    };
    let clamp = |theta: &[f64]| -> Vec<f64> {
        theta
            .iter()
            .zip(lower.iter().zip(&upper))
            .map(|(t, (lo, hi))| t.clamp(*lo, *hi))
            .collect()
    };

    let mut start = vec![init_s.signal_variance.ln()];
    start.extend(init_s.lengthscales.iter().map(|l| l.ln()));
    if fit_noise {
        start.push(init_s.noise_variance.ln());
    }
    let start = clamp(&start);

    let adam = StochasticOptimizerConfig {
        kind: StochasticKind::Adam,
        step_size: settings.step_size,
        max_iter: settings.steps,
        grad_tol: 1e-6,
        ..StochasticOptimizerConfig::default()
    };
    let mut rng = RandomStream::new(settings.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_err = None;

    for restart in 0..settings.restarts.max(1) {
        let theta0: Vec<f64> = if restart == 0 {
            start.clone()
        } else {
            let perturbed: Vec<f64> = start
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let width = if fit_noise && i == np - 1 { 2.0 } else { 1.0 };
                    t + width * (2.0 * rng.uniform() - 1.0)
                })
                .collect();
            clamp(&perturbed)
        };
        let outcome = stochastic_minimize(
            |theta| {
                let clamped = clamp(theta);
                let (value, grad) = lml_core(&inputs, &ys, &to_hyper(&clamped))?;
                let mut g: Vec<f64> = grad[..=d].iter().map(|v| -v).collect();
                if fit_noise {
                    g.push(-grad[d + 1]);
                }
                // no pull across the box faces
                for i in 0..np {
                    if (theta[i] <= lower[i] && g[i] > 0.0) || (theta[i] >= upper[i] && g[i] < 0.0) {
                        g[i] = 0.0;
                    }
                }
                Ok((-value, g))
            },
            &theta0,
            &adam,
        );
        match outcome {
            Ok(res) => {
                let point = res
                    .trace
                    .iter()
                    .min_by(|a, b| a.objective.total_cmp(&b.objective))
                    .expect("non-empty trace");
                debug!("gp restart {restart}: -lml {:.6} after {} steps", point.objective, res.iterations);
                if best.as_ref().is_none_or(|(f, _)| point.objective < *f) {
                    best = Some((point.objective, clamp(&point.x)));
                }
            }
            Err(e) => {
                debug!("gp restart {restart} failed: {e}");
                last_err = Some(e);
            }
        }
    }

    let Some((_, theta)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Factorization("no restart succeeded".into())));
    };
    GpModel::condition(&inputs, y, y_mean, y_scale, to_hyper(&theta))
}
