use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{OptimResult, Termination, TracePoint};
use crate::error::{Error, Result};
use crate::models::{evaluate_point, fd_gradient, GradientSpec, Model};

/// Where the residual Jacobian comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianSource {
    FiniteDifference(GradientSpec),
    /// The model's own Jacobian; falls back to finite differences when it
    /// has none.
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmSettings {
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    /// `λ₀ = initial_damping · max(diag(JᵀJ))`.
    pub initial_damping: f64,
    pub jacobian: JacobianSource,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            grad_tol: 1e-8,
            step_tol: 1e-10,
            max_iter: 200,
            initial_damping: 1e-6,
            jacobian: JacobianSource::FiniteDifference(GradientSpec::default()),
        }
    }
}

const MAX_DAMPING: f64 = 1e12;

fn residual_jacobian(model: &dyn Model, x: &[f64], source: JacobianSource) -> Result<DMatrix<f64>> {
    // models return d × m; LM works with m × d
    let grad = match source {
        JacobianSource::FiniteDifference(spec) => fd_gradient(model, x, spec)?,
        JacobianSource::Analytic => match model.jacobian(x) {
            Some(j) => j?,
            None => fd_gradient(model, x, GradientSpec::central(1e-6))?,
        },
    };
    Ok(grad.transpose())
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimizes `½‖r(x)‖²` for a residual model `r: ℝᵈ → ℝᵐ`.
///
/// Steps solve `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr`; accepted steps divide `λ`
/// by ten, rejected ones multiply it by ten.
pub fn levenberg_marquardt(model: &dyn Model, x0: &[f64], settings: &LmSettings) -> Result<OptimResult> {
    let d = model.input_dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if model.output_dim() < d {
        warn!(
            "least squares with {} residuals for {} unknowns is underdetermined",
            model.output_dim(),
            d
        );
    }

    let mut x = x0.to_vec();
    let mut r = evaluate_point(model, &x)?;
    let mut f = half_sq(&r);
    let mut jac = residual_jacobian(model, &x, settings.jacobian)?;
    let mut trace = vec![TracePoint { x: x.clone(), objective: f }];

    let normal = |jac: &DMatrix<f64>, r: &[f64]| {
        let jtj = jac.transpose() * jac;
        let g = jac.transpose() * DVector::from_column_slice(r);
        (jtj, g)
    };
    let (mut jtj, mut g) = normal(&jac, &r);
    if g.amax() < settings.grad_tol {
        return Ok(OptimResult {
            x,
            objective: f,
            iterations: 0,
            termination: Termination::GradientTol,
            trace,
        });
    }
    let max_diag = jtj.diagonal().max();
    let mut lambda = settings.initial_damping * if max_diag > 0.0 { max_diag } else { 1.0 };

    for iter in 1..=settings.max_iter {
        // zero diagonal entries would leave the damping without effect
        let floor = 1e-12 * jtj.diagonal().max().max(1e-300);
        let mut damped = jtj.clone();
        for i in 0..d {
            damped[(i, i)] += lambda * jtj[(i, i)].max(floor);
        }
        let step = match damped.clone().cholesky() {
            Some(chol) => Some(chol.solve(&(-&g))),
            None => damped.lu().solve(&(-&g)),
        };
        let Some(step) = step else {
            lambda *= 10.0;
            trace.push(TracePoint { x: x.clone(), objective: f });
            if lambda > MAX_DAMPING {
                return Ok(finish(x, f, iter, Termination::Stalled, trace));
            }
            continue;
        };

        let candidate: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let trial = evaluate_point(model, &candidate).ok().map(|rc| {
            let fc = half_sq(&rc);
            (rc, fc)
        });
        let step_norm = step.norm();
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();

        match trial {
            Some((rc, fc)) if fc < f => {
                x = candidate;
                r = rc;
                f = fc;
                lambda /= 10.0;
                trace.push(TracePoint { x: x.clone(), objective: f });
                jac = residual_jacobian(model, &x, settings.jacobian)?;
                (jtj, g) = normal(&jac, &r);
                if g.amax() < settings.grad_tol {
                    return Ok(finish(x, f, iter, Termination::GradientTol, trace));
                }
                if step_norm < settings.step_tol * (x_norm + settings.step_tol) {
                    return Ok(finish(x, f, iter, Termination::StepTol, trace));
                }
            }
            _ => {
                lambda *= 10.0;
                trace.push(TracePoint { x: x.clone(), objective: f });
                if step_norm < settings.step_tol * (x_norm + settings.step_tol) {
                    return Ok(finish(x, f, iter, Termination::StepTol, trace));
                }
                if lambda > MAX_DAMPING {
                    return Ok(finish(x, f, iter, Termination::Stalled, trace));
                }
            }
        }
    }
    Ok(finish(x, f, settings.max_iter, Termination::MaxIter, trace))
}

fn finish(x: Vec<f64>, objective: f64, iterations: usize, termination: Termination, trace: Vec<TracePoint>) -> OptimResult {
    OptimResult {
        x,
        objective,
        iterations,
        termination,
        trace,
    }
}
