//! Levenberg–Marquardt least squares and first-order stochastic
//! optimizers (Adam, Adamax, RMSProp).

mod lm;
mod stochastic;

use serde::{Deserialize, Serialize};

pub use lm::{levenberg_marquardt, JacobianSource, LmSettings};
pub use stochastic::{
    stochastic_minimize, stochastic_minimize_model, StochasticKind, StochasticOptimizerConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTol,
    StepTol,
    ObjectiveTol,
    MaxIter,
    /// Damping grew past its ceiling without finding a descent step.
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// `iterations + 1` entries, starting with the initial point.
    pub trace: Vec<TracePoint>,
}
