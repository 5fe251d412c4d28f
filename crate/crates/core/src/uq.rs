//! Forward uncertainty propagation: Monte Carlo output statistics and a
//! Bayesian multi-fidelity density estimate.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::designs::DesignMatrix;
use crate::error::{Error, Result};
use crate::models::{BatchResult, Model};
use crate::parameters::{sample_space, ParameterSpace, RandomStream};
use crate::surrogate::{train_gp, GpTrainSettings};

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputStatistics {
    pub samples: usize,
    pub failures: usize,
    pub mean: f64,
    /// Unbiased.
    pub variance: f64,
    /// `(level, value)` pairs at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
    /// Sorted completed values; the empirical CDF steps by `1/n` at each.
    pub ecdf: Vec<f64>,
    pub histogram: Histogram,
}

/// Linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let h = level * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn histogram(sorted: &[f64]) -> Histogram {
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if hi <= lo {
        return Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            counts: vec![n],
        };
    }
    // Sturges' rule
    let bins = ((n as f64).log2().ceil() as usize + 1).clamp(1, 64);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0; bins];
    for &v in sorted {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

/// Summary statistics of completed values; `failures` is only recorded.
pub fn output_statistics(values: &[f64], failures: usize) -> Result<OutputStatistics> {
    if values.is_empty() {
        return Err(Error::Estimation(format!("all {failures} evaluations failed")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(OutputStatistics {
        samples: values.len(),
        failures,
        mean,
        variance,
        quantiles: QUANTILE_LEVELS.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect(),
        histogram: histogram(&sorted),
        ecdf: sorted,
    })
}

/// Statistics per output column over the completed rows of a batch.
pub fn batch_statistics(outputs: &BatchResult, output_dim: usize) -> Result<Vec<OutputStatistics>> {
    let completed = outputs.completed_rows();
    let failures = outputs.len() - completed.len();
    (0..output_dim)
        .map(|j| {
            let values: Vec<f64> = completed.iter().map(|&k| outputs.outputs[k][j]).collect();
            output_statistics(&values, failures)
        })
        .collect()
}

/// Samples, raw outputs and per-output statistics of a Monte Carlo run.
#[derive(Clone, Debug)]
pub struct MonteCarloRun {
    pub samples: DesignMatrix,
    pub outputs: BatchResult,
    pub statistics: Vec<OutputStatistics>,
}

pub fn monte_carlo(model: &dyn Model, space: &ParameterSpace, n: usize, rng: &mut RandomStream) -> Result<MonteCarloRun> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Monte Carlo needs at least 2 samples, got {n}")));
    }
    let samples = sample_space(space, n, rng)?;
    let outputs = model.evaluate(&samples)?;
    let statistics = batch_statistics(&outputs, model.output_dim())?;
    Ok(MonteCarloRun {
        samples,
        outputs,
        statistics,
    })
}

/// Direct Monte Carlo statistics of the first model output.
pub fn propagate_mc(model: &dyn Model, space: &ParameterSpace, n: usize, rng: &mut RandomStream) -> Result<OutputStatistics> {
    let mut run = monte_carlo(model, space, n, rng)?;
    Ok(run.statistics.swap_remove(0))
}

/// A density sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityEstimate {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, p)| 0.5 * (x[1] - x[0]) * (p[0] + p[1]))
            .sum()
    }

    /// Cumulative trapezoid integral at each grid point.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.grid.len());
        out.push(0.0);
        for k in 1..self.grid.len() {
            acc += 0.5 * (self.grid[k] - self.grid[k - 1]) * (self.density[k] + self.density[k - 1]);
            out.push(acc);
        }
        out
    }

    pub fn mean(&self) -> f64 {
        let weighted = DensityEstimate {
            grid: self.grid.clone(),
            density: self.grid.iter().zip(&self.density).map(|(y, p)| y * p).collect(),
        };
        weighted.integral() / self.integral()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BmfmcSettings {
    pub grid_size: usize,
    pub gp: GpTrainSettings,
}

impl Default for BmfmcSettings {
    fn default() -> Self {
        BmfmcSettings {
            grid_size: 1024,
            gp: GpTrainSettings::default(),
        }
    }
}

/// Density of the high-fidelity output from low-fidelity samples and a few
/// `(lf, hf)` pairs: a 1-D GP maps LF to HF, and the estimate is the
/// mixture `(1/N) Σⱼ Normal(y | m(zⱼ), v(zⱼ) + σ_n²)`.
///
/// The grid spans every component to ±4 standard deviations; component
/// widths are floored at 1.5 grid spacings so the trapezoid rule resolves
/// them.
pub fn bmfmc_estimate(lf_outputs: &[f64], pairs: &[(f64, f64)], settings: &BmfmcSettings) -> Result<DensityEstimate> {
    if pairs.len() < 5 {
        return Err(Error::Estimation(format!(
            "insufficient high-fidelity data: {} pairs, at least 5 required",
            pairs.len()
        )));
    }
    if lf_outputs.len() < 100 {
        return Err(Error::Estimation(format!(
            "at least 100 low-fidelity samples required, got {}",
            lf_outputs.len()
        )));
    }
    if settings.grid_size < 16 {
        return Err(Error::InvalidArgument("grid size must be at least 16".into()));
    }
    if lf_outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimation("non-finite low-fidelity output".into()));
    }
    let lf_lo = lf_outputs.iter().copied().fold(f64::INFINITY, f64::min);
    let lf_hi = lf_outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if pairs.iter().any(|(z, _)| *z < lf_lo || *z > lf_hi) {
        warn!("some training pairs lie outside the low-fidelity sample range");
    }

    let x = DesignMatrix::from_rows(&pairs.iter().map(|(z, _)| vec![*z]).collect::<Vec<_>>())?;
    let y: Vec<f64> = pairs.iter().map(|(_, h)| *h).collect();
    let gp = train_gp(&x, &y, None, &settings.gp)?;
    let noise = gp.hyperparameters().noise_variance;
    let z = DesignMatrix::from_rows(&lf_outputs.iter().map(|v| vec![*v]).collect::<Vec<_>>())?;
    let (mean, var) = gp.predict(&z)?;
    let sd: Vec<f64> = var.iter().map(|v| (v + noise).sqrt()).collect();

    let span = |sd: &[f64]| {
        let lo = mean.iter().zip(sd).map(|(m, s)| m - 4.0 * s).fold(f64::INFINITY, f64::min);
        let hi = mean.iter().zip(sd).map(|(m, s)| m + 4.0 * s).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let g = settings.grid_size;
    let (lo0, hi0) = span(&sd);
    let floor = 1.5 * (hi0 - lo0).max(f64::MIN_POSITIVE) / (g - 1) as f64;
    let sd: Vec<f64> = sd.iter().map(|s| s.max(floor)).collect();
    let (lo, hi) = span(&sd);
    let h = (hi - lo) / (g - 1) as f64;
    let grid: Vec<f64> = (0..g).map(|k| lo + k as f64 * h).collect();

    let n = lf_outputs.len() as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut density = vec![0.0; g];
    for (m, s) in mean.iter().zip(&sd) {
        // components are negligible beyond ±9 sd
        let k0 = (((m - 9.0 * s - lo) / h).floor().max(0.0)) as usize;
        let k1 = ((((m + 9.0 * s - lo) / h).ceil()) as usize).min(g - 1);
        for k in k0..=k1 {
            let t = (grid[k] - m) / s;
            density[k] += norm * (-0.5 * t * t).exp() / (s * n);
        }
    }
    Ok(DensityEstimate { grid, density })
}

/// Kolmogorov–Smirnov distance between a gridded CDF (linear between grid
/// points) and the empirical CDF of `samples`.
pub fn ks_distance_to_samples(estimate: &DensityEstimate, samples: &[f64]) -> f64 {
    let cdf = estimate.cdf();
    let total = *cdf.last().unwrap_or(&1.0);
    let eval = |y: f64| -> f64 {
        let g = &estimate.grid;
        if y <= g[0] {
            return 0.0;
        }
        if y >= g[g.len() - 1] {
            return 1.0;
        }
        let h = g[1] - g[0];
        let k = (((y - g[0]) / h) as usize).min(g.len() - 2);
        let t = (y - g[k]) / h;
        (cdf[k] + t * (cdf[k + 1] - cdf[k])) / total
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = eval(y);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}
