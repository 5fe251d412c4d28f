use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::designs::DesignMatrix;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::parameters::{sample_space, ParameterSpace, RandomStream};

const NORMALIZATION_TOL: f64 = 1e-9;
const BISECTION_TOL: f64 = 1e-6;

/// Effective sample size `1 / Σ w²` of normalized weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Sampler(format!("weights are not normalized (sum {sum})")));
    }
    Ok(1.0 / weights.iter().map(|w| w * w).sum::<f64>())
}

/// Multiplies `weights` by `exp(Δφ·loglike)` in log space and normalizes.
/// Returns the new weights and `ln Σ wₖ exp(Δφ·ℓₖ)`.
fn reweight(weights: &[f64], loglikes: &[f64], dphi: f64) -> (Vec<f64>, f64) {
    let lw: Vec<f64> = weights
        .iter()
        .zip(loglikes)
        .map(|(w, l)| {
            let l = if l.is_nan() { f64::NEG_INFINITY } else { *l };
            if *w > 0.0 && l > f64::NEG_INFINITY {
                w.ln() + dphi * l
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (vec![0.0; weights.len()], f64::NEG_INFINITY);
    }
    let mut w: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    (w, max + sum.ln())
}

fn ess_unchecked(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Next tempering exponent: the largest `φ ∈ (φ_prev, 1]` whose reweighted
/// ESS stays at or above `τ·N`, located by bisection to `1e-6`. The upper
/// end of the final bracket is returned, so a non-unit result sits just
/// past the threshold and triggers resampling.
pub fn adapt_temperature(weights: &[f64], loglikes: &[f64], phi_prev: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Sampler(format!("ESS fraction must lie in (0, 1), got {tau}")));
    }
    if !(0.0..1.0).contains(&phi_prev) {
        return Err(Error::Sampler(format!("previous temperature must lie in [0, 1), got {phi_prev}")));
    }
    if weights.len() != loglikes.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: loglikes.len(),
        });
    }
    ess(weights)?;
    if !loglikes.iter().any(|l| l.is_finite()) {
        return Err(Error::Sampler("every particle has a non-finite log-likelihood".into()));
    }
    let target = tau * weights.len() as f64;
    let ess_at = |phi: f64| ess_unchecked(&reweight(weights, loglikes, phi - phi_prev).0);
    if ess_at(1.0) >= target {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (phi_prev, 1.0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if ess_at(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Systematic resampling: one uniform offset, `N` evenly spaced pointers
/// into the cumulative weights.
pub fn systematic_resample(weights: &[f64], rng: &mut RandomStream) -> Vec<usize> {
    let n = weights.len();
    let u0 = rng.uniform();
    let mut indices = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0;
    for i in 0..n {
        let pointer = (i as f64 + u0) / n as f64;
        while pointer > cumulative && j < n - 1 {
            j += 1;
            cumulative += weights[j];
        }
        indices.push(j);
    }
    indices
}

/// Weighted particles at temperature `φ` with cached log-likelihoods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub particles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub temperature: f64,
    pub loglikes: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn ess(&self) -> f64 {
        ess_unchecked(&self.weights)
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.particles.first().map_or(0, Vec::len);
        (0..d)
            .map(|j| self.particles.iter().zip(&self.weights).map(|(p, w)| w * p[j]).sum())
            .collect()
    }

    /// Weighted (population) variance per dimension.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        (0..mean.len())
            .map(|j| {
                self.particles
                    .iter()
                    .zip(&self.weights)
                    .map(|(p, w)| w * (p[j] - mean[j]).powi(2))
                    .sum()
            })
            .collect()
    }

    /// Weighted quantile of dimension `j`.
    pub fn quantile(&self, j: usize, level: f64) -> f64 {
        let mut pairs: Vec<(f64, f64)> = self.particles.iter().map(|p| p[j]).zip(self.weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        for (x, w) in &pairs {
            acc += w;
            if acc >= level {
                return *x;
            }
        }
        pairs.last().map_or(f64::NAN, |p| p.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmcSettings {
    pub particles: usize,
    /// Target ESS fraction τ.
    pub ess_fraction: f64,
    pub rejuvenation_steps: usize,
    pub max_stages: usize,
}

impl Default for SmcSettings {
    fn default() -> Self {
        SmcSettings {
            particles: 1000,
            ess_fraction: 0.5,
            rejuvenation_steps: 5,
            max_stages: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmcResult {
    pub ensemble: ParticleEnsemble,
    pub log_evidence: f64,
    /// Starts at 0, ends at 1.
    pub temperatures: Vec<f64>,
    /// ESS after each reweighting.
    pub ess_history: Vec<f64>,
    pub acceptance_rates: Vec<f64>,
    pub likelihood_evaluations: usize,
    pub failed_evaluations: usize,
}

struct Evaluator<'a> {
    model: &'a dyn Model,
    names: Vec<String>,
    evaluations: usize,
    failures: usize,
}

impl Evaluator<'_> {
    fn loglikes(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let design = DesignMatrix::from_rows_named(self.names.clone(), points)?;
        let result = self.model.evaluate(&design)?;
        self.evaluations += points.len();
        Ok((0..points.len())
            .map(|k| {
                if result.is_completed(k) {
                    let v = result.outputs[k][0];
                    if v.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        v
                    }
                } else {
                    self.failures += 1;
                    f64::NEG_INFINITY
                }
            })
            .collect())
    }
}

/// Sequential Monte Carlo with likelihood tempering.
///
/// `loglike` is a one-output model returning the log-likelihood; failed rows
/// count as zero likelihood. Each stage picks the next temperature from the
/// ESS target, reweights, resamples systematically when the ESS drops below
/// `τ·N`, and moves every particle with random-walk Metropolis–Hastings
/// steps targeting `prior(x)·exp(φ·loglike(x))`. All likelihood
/// evaluations of one sweep are issued as one batch.
pub fn smc_run(prior: &ParameterSpace, loglike: &dyn Model, settings: &SmcSettings, rng: &mut RandomStream) -> Result<SmcResult> {
    let n = settings.particles;
    if n < 10 {
        return Err(Error::Sampler(format!("at least 10 particles are required, got {n}")));
    }
    if !(settings.ess_fraction > 0.0 && settings.ess_fraction < 1.0) {
        return Err(Error::Sampler("ESS fraction must lie in (0, 1)".into()));
    }
    if settings.rejuvenation_steps == 0 {
        return Err(Error::Sampler("at least one rejuvenation step is required".into()));
    }
    if loglike.output_dim() != 1 || loglike.input_dim() != prior.dim() {
        return Err(Error::Sampler(format!(
            "log-likelihood model {} must map {} inputs to one output",
            loglike.name(),
            prior.dim()
        )));
    }
    let d = prior.dim();
    let mut eval = Evaluator {
        model: loglike,
        names: prior.names(),
        evaluations: 0,
        failures: 0,
    };

    let mut particles = sample_space(prior, n, rng)?.to_rows();
    let mut ll = eval.loglikes(&particles)?;
    if !ll.iter().any(|l| l.is_finite()) {
        return Err(Error::Sampler("every particle has zero likelihood under the prior sample".into()));
    }
    let mut log_prior: Vec<f64> = particles.iter().map(|p| prior.log_pdf(p)).collect::<Result<_>>()?;
    let mut weights = vec![1.0 / n as f64; n];
    let mut phi = 0.0;
    let mut log_evidence = 0.0;
    let mut temperatures = vec![0.0];
    let mut ess_history = Vec::new();
    let mut acceptance_rates = Vec::new();
    let target = settings.ess_fraction * n as f64;

    while phi < 1.0 {
        if temperatures.len() > settings.max_stages {
            return Err(Error::Sampler(format!(
                "no convergence after {} stages (temperature {phi:.3e})",
                settings.max_stages
            )));
        }
        let next = adapt_temperature(&weights, &ll, phi, settings.ess_fraction)?;
        let (w, log_increment) = reweight(&weights, &ll, next - phi);
        if log_increment == f64::NEG_INFINITY {
            return Err(Error::Sampler("all particles have zero likelihood".into()));
        }
        log_evidence += log_increment;
        weights = w;
        phi = next;
        temperatures.push(phi);
        let current_ess = ess_unchecked(&weights);
        ess_history.push(current_ess);

        if current_ess < target {
            let idx = systematic_resample(&weights, rng);
            particles = idx.iter().map(|&i| particles[i].clone()).collect();
            ll = idx.iter().map(|&i| ll[i]).collect();
            log_prior = idx.iter().map(|&i| log_prior[i]).collect();
            weights = vec![1.0 / n as f64; n];
        }

        // proposal scale: half the weighted ensemble spread
        let ensemble = ParticleEnsemble {
            particles: particles.clone(),
            weights: weights.clone(),
            temperature: phi,
            loglikes: ll.clone(),
        };
        let mean = ensemble.mean();
        let scales: Vec<f64> = ensemble
            .variance()
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = 0.5 * v.sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1e-6 * (1.0 + m.abs())
                }
            })
            .collect();

        let mut accepted = 0usize;
        for _ in 0..settings.rejuvenation_steps {
            let candidates: Vec<Vec<f64>> = particles
                .iter()
                .map(|p| (0..d).map(|j| p[j] + scales[j] * rng.standard_normal()).collect())
                .collect();
            let cand_prior: Vec<f64> = candidates.iter().map(|c| prior.log_pdf(c)).collect::<Result<_>>()?;
            let inside: Vec<usize> = (0..n).filter(|&k| cand_prior[k].is_finite()).collect();
            let points: Vec<Vec<f64>> = inside.iter().map(|&k| candidates[k].clone()).collect();
            let cand_ll = eval.loglikes(&points)?;
            let mut cand_ll_full = vec![f64::NEG_INFINITY; n];
            for (slot, &k) in inside.iter().enumerate() {
                cand_ll_full[k] = cand_ll[slot];
            }
            for k in 0..n {
                let log_u = rng.uniform_open().ln();
                if !(cand_prior[k].is_finite() && cand_ll_full[k].is_finite()) {
                    continue;
                }
                let proposed = cand_prior[k] + phi * cand_ll_full[k];
                let current = log_prior[k] + if ll[k].is_finite() { phi * ll[k] } else { f64::NEG_INFINITY };
                if log_u < proposed - current {
                    particles[k] = candidates[k].clone();
                    ll[k] = cand_ll_full[k];
                    log_prior[k] = cand_prior[k];
                    accepted += 1;
                }
            }
        }
        let rate = accepted as f64 / (n * settings.rejuvenation_steps) as f64;
        acceptance_rates.push(rate);
        debug!("smc stage {}: phi {phi:.6}, ess {current_ess:.1}, acceptance {rate:.3}", temperatures.len() - 1);
    }
    info!(
        "smc finished after {} stages, log-evidence {log_evidence:.6}",
        temperatures.len() - 1
    );
    Ok(SmcResult {
        ensemble: ParticleEnsemble {
            particles,
            weights,
            temperature: 1.0,
            loglikes: ll,
        },
        log_evidence,
        temperatures,
        ess_history,
        acceptance_rates,
        likelihood_evaluations: eval.evaluations,
        failed_evaluations: eval.failures,
    })
}
