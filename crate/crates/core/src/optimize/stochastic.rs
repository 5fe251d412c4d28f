use serde::{Deserialize, Serialize};

use super::{OptimResult, Termination, TracePoint};
use crate::error::{Error, Result};
use crate::models::{evaluate_point, gradient, GradientSpec, Model};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StochasticKind {
    Adam,
    Adamax,
    Rmsprop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StochasticOptimizerConfig {
    pub kind: StochasticKind,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// RMSProp decay.
    pub rho: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for StochasticOptimizerConfig {
    fn default() -> Self {
        StochasticOptimizerConfig {
            kind: StochasticKind::Adam,
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            epsilon: 1e-8,
            max_iter: 10_000,
            grad_tol: 1e-8,
        }
    }
}

impl StochasticOptimizerConfig {
    pub fn new(kind: StochasticKind) -> Self {
        StochasticOptimizerConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Optimizer(format!("{name} must lie in (0, 1)")))
            }
        };
        match self.kind {
            StochasticKind::Adam | StochasticKind::Adamax => {
                unit(self.beta1, "beta1")?;
                unit(self.beta2, "beta2")?;
            }
            StochasticKind::Rmsprop => unit(self.rho, "rho")?,
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Optimizer("step size must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Optimizer("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Minimizes an objective given as `x ↦ (value, gradient)`.
///
/// - Adam: bias-corrected moments, `x -= α·m̂/(√v̂ + ε)`.
/// - Adamax: `u = max(β₂u, |g|)`, `x -= α/(1 − β₁ᵗ)·m/(u + ε)`.
/// - RMSProp: `v = ρv + (1 − ρ)g²`, `x -= α·g/√(v + ε)`.
pub fn stochastic_minimize<F>(mut objective: F, x0: &[f64], config: &StochasticOptimizerConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    let d = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = objective(&x)?;
    let mut trace = vec![TracePoint { x: x.clone(), objective: f }];
    let mut m = vec![0.0; d];
    let mut v = vec![0.0; d];

    for t in 1..=config.max_iter {
        if g.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.len() });
        }
        if g.iter().any(|gi| !gi.is_finite()) {
            return Err(Error::Optimizer(format!("non-finite gradient at iteration {t}")));
        }
        let gnorm = g.iter().map(|gi| gi * gi).sum::<f64>().sqrt();
        if gnorm < config.grad_tol {
            return Ok(OptimResult {
                x,
                objective: f,
                iterations: t - 1,
                termination: Termination::GradientTol,
                trace,
            });
        }
        let tf = t as f64;
        match config.kind {
            StochasticKind::Adam => {
                let c1 = 1.0 - config.beta1.powf(tf);
                let c2 = 1.0 - config.beta2.powf(tf);
                for i in 0..d {
                    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
                    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    x[i] -= config.step_size * m_hat / (v_hat.sqrt() + config.epsilon);
                }
            }
            StochasticKind::Adamax => {
                let c1 = 1.0 - config.beta1.powf(tf);
                for i in 0..d {
                    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
                    v[i] = (config.beta2 * v[i]).max(g[i].abs());
                    x[i] -= config.step_size / c1 * m[i] / (v[i] + config.epsilon);
                }
            }
            StochasticKind::Rmsprop => {
                for i in 0..d {
                    v[i] = config.rho * v[i] + (1.0 - config.rho) * g[i] * g[i];
                    x[i] -= config.step_size * g[i] / (v[i] + config.epsilon).sqrt();
                }
            }
        }
        (f, g) = objective(&x)?;
        trace.push(TracePoint { x: x.clone(), objective: f });
    }
    Ok(OptimResult {
        x,
        objective: f,
        iterations: config.max_iter,
        termination: Termination::MaxIter,
        trace,
    })
}

/// Minimizes the first output of `model`, using its analytic Jacobian when
/// available and finite differences otherwise.
pub fn stochastic_minimize_model(
    model: &dyn Model,
    x0: &[f64],
    config: &StochasticOptimizerConfig,
    spec: GradientSpec,
) -> Result<OptimResult> {
    if model.output_dim() != 1 {
        return Err(Error::Optimizer(format!(
            "objective model must have one output, {} has {}",
            model.name(),
            model.output_dim()
        )));
    }
    stochastic_minimize(
        |x| {
            let value = evaluate_point(model, x)?[0];
            let grad = gradient(model, x, spec)?;
            Ok((value, grad.column(0).iter().copied().collect()))
        },
        x0,
        config,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::register_function_model;

    fn one_step(kind: StochasticKind, x0: &[f64], g: &[f64]) -> Vec<f64> {
        let g = g.to_vec();
        let config = StochasticOptimizerConfig {
            max_iter: 1,
            ..StochasticOptimizerConfig::new(kind)
        };
        stochastic_minimize(|_| Ok((0.0, g.clone())), x0, &config).unwrap().x
    }

    #[test]
    fn adam_first_step_hand_formula() {
        let (alpha, eps) = (1e-3, 1e-8);
        let g = [0.3, -2.0, 1e-4];
        let x = one_step(StochasticKind::Adam, &[1.0, 1.0, 1.0], &g);
        for i in 0..3 {
            // m̂ = g, v̂ = g² after one bias-corrected step
            let expected = 1.0 - alpha * g[i] / (g[i].abs() + eps);
            assert!((x[i] - expected).abs() < 1e-12);
            assert!(((1.0 - x[i]).abs() - alpha).abs() < 1e-6);
        }
    }

    #[test]
    fn adamax_first_step_hand_formula() {
        let g = [0.3, -2.0];
        let x = one_step(StochasticKind::Adamax, &[0.0, 0.0], &g);
        for i in 0..2 {
            // m = 0.1 g, u = |g|, α/(1 − 0.9) · 0.1 g/(|g| + ε)
            let expected = -1e-3 / 0.1 * (0.1 * g[i]) / (g[i].abs() + 1e-8);
            assert!((x[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rmsprop_first_step_hand_formula() {
        let g = [0.3, -2.0];
        let x = one_step(StochasticKind::Rmsprop, &[0.0, 0.0], &g);
        for i in 0..2 {
            let expected = -1e-3 * g[i] / (0.1 * g[i] * g[i] + 1e-8).sqrt();
            assert!((x[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        for kind in [StochasticKind::Adam, StochasticKind::Adamax, StochasticKind::Rmsprop] {
            let res = stochastic_minimize(|_| Ok((1.0, vec![0.0, 0.0])), &[0.5, -0.5], &StochasticOptimizerConfig::new(kind))
                .unwrap();
            assert_eq!(res.x, vec![0.5, -0.5]);
            assert_eq!(res.termination, Termination::GradientTol);
            assert!(res.iterations <= 1);
            assert_eq!(res.trace.len(), res.iterations + 1);
        }
    }

    #[test]
    fn sphere_convergence() {
        let sphere = register_function_model("sphere", Some(3)).unwrap();
        let x0 = [0.6, -0.48, 0.64]; // unit norm
        for kind in [StochasticKind::Adam, StochasticKind::Adamax, StochasticKind::Rmsprop] {
            let res = stochastic_minimize_model(&sphere, &x0, &StochasticOptimizerConfig::new(kind), GradientSpec::default())
                .unwrap();
            let norm = res.x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < 1e-2, "{kind:?}: {norm}");
        }
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let res = stochastic_minimize(|_| Ok((0.0, vec![f64::NAN])), &[0.0], &StochasticOptimizerConfig::default());
        assert!(res.is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = StochasticOptimizerConfig {
            beta1: 1.0,
            ..Default::default()
        };
        assert!(stochastic_minimize(|_| Ok((0.0, vec![1.0])), &[0.0], &cfg).is_err());
    }
}
