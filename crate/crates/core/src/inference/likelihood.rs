use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;

use super::ObservationSet;
use crate::designs::DesignMatrix;
use crate::error::{Error, Result};
use crate::models::{check_input_dim, BatchResult, JobStatus, Model};

/// `−(m/2)·ln(2πσ²) − Σ (y_k − f_k)² / (2σ²)`.
pub fn gaussian_loglike_value(observed: &[f64], predicted: &[f64], noise_variance: f64) -> f64 {
    let m = observed.len() as f64;
    let sse: f64 = observed.iter().zip(predicted).map(|(y, f)| (y - f).powi(2)).sum();
    -0.5 * m * (2.0 * PI * noise_variance).ln() - sse / (2.0 * noise_variance)
}

/// Gaussian log-likelihood of a forward model's outputs against observed
/// data, aligned by row order. As a [`Model`] it has one output, the
/// log-likelihood; rows whose forward run failed are reported as failed.
#[derive(Clone)]
pub struct LikelihoodModel {
    name: String,
    forward: Arc<dyn Model>,
    observations: ObservationSet,
}

impl fmt::Debug for LikelihoodModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LikelihoodModel")
            .field("name", &self.name)
            .field("forward", &self.forward.name())
            .field("observations", &self.observations.len())
            .finish()
    }
}

impl LikelihoodModel {
    pub fn new(forward: Arc<dyn Model>, observations: ObservationSet) -> Result<Self> {
        if forward.output_dim() != observations.len() {
            return Err(Error::Observations(format!(
                "forward model {} has {} outputs but there are {} observations",
                forward.name(),
                forward.output_dim(),
                observations.len()
            )));
        }
        Ok(LikelihoodModel {
            name: "likelihood".into(),
            forward,
            observations,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.observations
    }

    pub fn forward(&self) -> &Arc<dyn Model> {
        &self.forward
    }

    /// Log-likelihood at one point; a failed forward run yields `−∞`.
    pub fn gaussian_loglike(&self, x: &[f64]) -> f64 {
        let design = match DesignMatrix::from_rows(&[x.to_vec()]) {
            Ok(d) => d,
            Err(e) => {
                warn!("likelihood at {x:?}: {e}");
                return f64::NEG_INFINITY;
            }
        };
        match self.evaluate(&design) {
            Ok(r) if r.is_completed(0) => r.outputs[0][0],
            Ok(r) => {
                warn!("likelihood at {x:?}: forward run failed: {}", r.diagnostics[0]);
                f64::NEG_INFINITY
            }
            Err(e) => {
                warn!("likelihood at {x:?}: {e}");
                f64::NEG_INFINITY
            }
        }
    }
}

impl Model for LikelihoodModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, design: &DesignMatrix) -> Result<BatchResult> {
        check_input_dim(self, design)?;
        let forward = self.forward.evaluate(design)?;
        let mut result = BatchResult::with_capacity(forward.len());
        for k in 0..forward.len() {
            if forward.is_completed(k) {
                let ll = gaussian_loglike_value(
                    &self.observations.values,
                    &forward.outputs[k],
                    self.observations.noise_variance,
                );
                result.push_completed(vec![ll]);
            } else {
                warn!("forward run failed, likelihood is zero: {}", forward.diagnostics[k]);
                let status = if forward.statuses[k] == JobStatus::TimedOut {
                    JobStatus::TimedOut
                } else {
                    JobStatus::Failed
                };
                result.push_failure(status, 1, forward.diagnostics[k].clone());
            }
        }
        Ok(result)
    }
}
