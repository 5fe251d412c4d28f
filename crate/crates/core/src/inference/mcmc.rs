use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parameters::RandomStream;

/// A Markov chain including its initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub states: Vec<Vec<f64>>,
    pub log_posterior: Vec<f64>,
    pub accepted: usize,
    pub proposals: usize,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// Per-dimension mean over states from `burn_in` on.
    pub fn mean(&self, burn_in: usize) -> Vec<f64> {
        let kept = &self.states[burn_in.min(self.states.len())..];
        let d = self.states.first().map_or(0, Vec::len);
        let n = kept.len().max(1) as f64;
        (0..d).map(|j| kept.iter().map(|s| s[j]).sum::<f64>() / n).collect()
    }
}

/// Gaussian random-walk Metropolis–Hastings with per-dimension proposal
/// scales. A proposal is accepted when `ln u < Δ log-posterior`, so uphill
/// moves are always taken.
pub fn metropolis_hastings<F>(
    mut log_posterior: F,
    x0: &[f64],
    steps: usize,
    scales: &[f64],
    rng: &mut RandomStream,
) -> Result<Chain>
where
    F: FnMut(&[f64]) -> f64,
{
    if scales.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            got: scales.len(),
        });
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::Sampler(format!("proposal scale must be positive, got {s}")));
    }
    let mut current = x0.to_vec();
    let mut lp = log_posterior(&current);
    if !lp.is_finite() {
        return Err(Error::Sampler(format!("log-posterior at the initial state is {lp}")));
    }
    let mut chain = Chain {
        states: Vec::with_capacity(steps + 1),
        log_posterior: Vec::with_capacity(steps + 1),
        accepted: 0,
        proposals: steps,
    };
    chain.states.push(current.clone());
    chain.log_posterior.push(lp);
    let mut candidate = vec![0.0; x0.len()];
    for _ in 0..steps {
        for j in 0..candidate.len() {
            candidate[j] = current[j] + scales[j] * rng.standard_normal();
        }
        let lp_new = log_posterior(&candidate);
        let log_u = rng.uniform_open().ln();
        if lp_new.is_finite() && log_u < lp_new - lp {
            current.copy_from_slice(&candidate);
            lp = lp_new;
            chain.accepted += 1;
        }
        chain.states.push(current.clone());
        chain.log_posterior.push(lp);
    }
    Ok(chain)
}
