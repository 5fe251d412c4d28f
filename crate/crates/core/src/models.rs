//! The model abstraction: a mapping from parameter vectors to output
//! vectors, evaluated in row-aligned batches with per-row status.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::DesignMatrix;
use crate::error::{Error, Result};

/// Outcome of one row of a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Completed,
    Failed,
    TimedOut,
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobStatus::Completed => "completed",
            JobStatus::Failed => "failed",
            JobStatus::TimedOut => "timed_out",
        })
    }
}

/// Row-aligned outputs of a batch evaluation. Rows that did not complete
/// are filled with NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub outputs: Vec<Vec<f64>>,
    pub statuses: Vec<JobStatus>,
    pub diagnostics: Vec<String>,
}

impl BatchResult {
    pub fn with_capacity(n: usize) -> Self {
        BatchResult {
            outputs: Vec::with_capacity(n),
            statuses: Vec::with_capacity(n),
            diagnostics: Vec::with_capacity(n),
        }
    }

    pub fn push_completed(&mut self, output: Vec<f64>) {
        self.outputs.push(output);
        self.statuses.push(JobStatus::Completed);
        self.diagnostics.push(String::new());
    }

    pub fn push_failure(&mut self, status: JobStatus, output_dim: usize, diagnostic: impl Into<String>) {
        self.outputs.push(vec![f64::NAN; output_dim]);
        self.statuses.push(status);
        self.diagnostics.push(diagnostic.into());
    }

    pub fn len(&self) -> usize {
        self.statuses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statuses.is_empty()
    }

    pub fn is_completed(&self, row: usize) -> bool {
        self.statuses[row] == JobStatus::Completed
    }

    pub fn completed_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_completed(i)).collect()
    }

    pub fn failure_count(&self) -> usize {
        self.statuses.iter().filter(|s| **s != JobStatus::Completed).count()
    }

    /// First output component of each row (NaN for failed rows).
    pub fn first_column(&self) -> Vec<f64> {
        self.outputs.iter().map(|o| o.first().copied().unwrap_or(f64::NAN)).collect()
    }
}

/// An abstract input → output mapping.
///
/// Implementations must keep `outputs[i]` aligned with `design.row(i)` and
/// record failures per row instead of failing the whole batch.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn evaluate(&self, design: &DesignMatrix) -> Result<BatchResult>;

    /// Analytic Jacobian as a `d × m` matrix, if the model provides one.
    fn jacobian(&self, _x: &[f64]) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

impl<M: Model + ?Sized> Model for Arc<M> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn evaluate(&self, design: &DesignMatrix) -> Result<BatchResult> {
        (**self).evaluate(design)
    }
    fn jacobian(&self, x: &[f64]) -> Option<Result<DMatrix<f64>>> {
        (**self).jacobian(x)
    }
}

pub(crate) fn check_input_dim(model: &dyn Model, design: &DesignMatrix) -> Result<()> {
    if design.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: design.ncols(),
        });
    }
    Ok(())
}

/// Evaluates a single point, turning a failed row into an error.
pub fn evaluate_point(model: &dyn Model, x: &[f64]) -> Result<Vec<f64>> {
    let design = DesignMatrix::from_rows(&[x.to_vec()])?;
    let mut result = model.evaluate(&design)?;
    if !result.is_completed(0) {
        return Err(Error::Evaluation(format!(
            "{} at {:?}: {}",
            model.name(),
            x,
            result.diagnostics[0]
        )));
    }
    Ok(result.outputs.swap_remove(0))
}

/// Evaluates explicit points as one batch.
pub fn evaluate_points(model: &dyn Model, points: &[Vec<f64>]) -> Result<BatchResult> {
    if points.is_empty() {
        return Ok(BatchResult::with_capacity(0));
    }
    model.evaluate(&DesignMatrix::from_rows(points)?)
}

type PointFn = dyn Fn(&[f64]) -> std::result::Result<Vec<f64>, String> + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// In-process model backed by a closure. Rows are evaluated in parallel.
#[derive(Clone)]
pub struct FunctionModel {
    name: String,
    input_dim: usize,
    output_dim: usize,
    function: Arc<PointFn>,
    jacobian: Option<Arc<JacobianFn>>,
}

impl fmt::Debug for FunctionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionModel")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .finish()
    }
}

impl FunctionModel {
    pub fn new<F>(name: impl Into<String>, input_dim: usize, output_dim: usize, function: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::fallible(name, input_dim, output_dim, move |x| Ok(function(x)))
    }

    /// A model whose evaluation may fail for some inputs.
    pub fn fallible<F>(name: impl Into<String>, input_dim: usize, output_dim: usize, function: F) -> Self
    where
        F: Fn(&[f64]) -> std::result::Result<Vec<f64>, String> + Send + Sync + 'static,
    {
        FunctionModel {
            name: name.into(),
            input_dim,
            output_dim,
            function: Arc::new(function),
            jacobian: None,
        }
    }

    /// Attaches an analytic `d × m` Jacobian.
    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    fn eval_row(&self, x: &[f64]) -> (JobStatus, Vec<f64>, String) {
        match (self.function)(x) {
            Ok(y) if y.len() != self.output_dim => (
                JobStatus::Failed,
                vec![f64::NAN; self.output_dim],
                format!("expected {} outputs, got {}", self.output_dim, y.len()),
            ),
            Ok(y) if y.iter().any(|v| v.is_nan()) => (
                JobStatus::Failed,
                vec![f64::NAN; self.output_dim],
                "model returned NaN".to_string(),
            ),
            Ok(y) => (JobStatus::Completed, y, String::new()),
            Err(msg) => (JobStatus::Failed, vec![f64::NAN; self.output_dim], msg),
        }
    }
}

impl Model for FunctionModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn evaluate(&self, design: &DesignMatrix) -> Result<BatchResult> {
        check_input_dim(self, design)?;
        let rows: Vec<(JobStatus, Vec<f64>, String)> = if design.nrows() > 64 {
            design.rows().collect::<Vec<_>>().par_iter().map(|x| self.eval_row(x)).collect()
        } else {
            design.rows().map(|x| self.eval_row(x)).collect()
        };
        let mut result = BatchResult::with_capacity(rows.len());
        for (status, output, diagnostic) in rows {
            result.outputs.push(output);
            result.statuses.push(status);
            result.diagnostics.push(diagnostic);
        }
        Ok(result)
    }

    fn jacobian(&self, x: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let jac = self.jacobian.as_ref()?;
        if x.len() != self.input_dim {
            return Some(Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            }));
        }
        Some(Ok(jac(x)))
    }
}

/// Names accepted by [`register_function_model`].
pub const BUILTIN_MODELS: &[&str] = &["sum", "sphere", "rosenbrock_residuals", "ishigami", "identity"];

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.1;

/// Looks up a shipped in-process model. `input_dim` sizes the
/// dimension-generic builtins (`sum`, `sphere`, `identity`); fixed-size
/// builtins reject a conflicting value.
pub fn register_function_model(name: &str, input_dim: Option<usize>) -> Result<FunctionModel> {
    let fixed = |d: usize| match input_dim {
        Some(given) if given != d => Err(Error::DimensionMismatch { expected: d, got: given }),
        _ => Ok(d),
    };
    let generic = || match input_dim {
        Some(0) => Err(Error::InvalidArgument(format!("builtin {name} needs at least one input"))),
        Some(d) => Ok(d),
        None => Ok(2),
    };
    let model = match name {
        "sum" => {
            let d = generic()?;
            FunctionModel::new(name, d, 1, |x| vec![x.iter().sum()])
                .with_jacobian(move |_| DMatrix::from_element(d, 1, 1.0))
        }
        "sphere" => {
            let d = generic()?;
            FunctionModel::new(name, d, 1, |x| vec![x.iter().map(|v| v * v).sum()])
                .with_jacobian(move |x| DMatrix::from_fn(d, 1, |i, _| 2.0 * x[i]))
        }
        "identity" => {
            let d = generic()?;
            FunctionModel::new(name, d, d, |x| x.to_vec()).with_jacobian(move |_| DMatrix::identity(d, d))
        }
        "rosenbrock_residuals" => {
            fixed(2)?;
            FunctionModel::new(name, 2, 2, |x| vec![1.0 - x[0], 10.0 * (x[1] - x[0] * x[0])])
                .with_jacobian(|x| {
                    // rows: inputs, columns: residuals
                    DMatrix::from_row_slice(2, 2, &[-1.0, -20.0 * x[0], 0.0, 10.0])
                })
        }
        "ishigami" => {
            fixed(3)?;
            FunctionModel::new(name, 3, 1, |x| {
                vec![x[0].sin() + ISHIGAMI_A * x[1].sin().powi(2) + ISHIGAMI_B * x[2].powi(4) * x[0].sin()]
            })
            .with_jacobian(|x| {
                DMatrix::from_column_slice(
                    3,
                    1,
                    &[
                        x[0].cos() * (1.0 + ISHIGAMI_B * x[2].powi(4)),
                        2.0 * ISHIGAMI_A * x[1].sin() * x[1].cos(),
                        4.0 * ISHIGAMI_B * x[2].powi(3) * x[0].sin(),
                    ],
                )
            })
        }
        _ => {
            return Err(Error::UnknownModel {
                name: name.to_string(),
                available: BUILTIN_MODELS.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    Forward,
    Central,
}

/// Finite-difference settings; the step along axis `i` is
/// `h_rel · max(1, |x_i|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientSpec {
    pub scheme: FdScheme,
    pub h_rel: f64,
}

impl Default for GradientSpec {
    fn default() -> Self {
        GradientSpec {
            scheme: FdScheme::Forward,
            h_rel: 1.49e-8,
        }
    }
}

impl GradientSpec {
    pub fn forward(h_rel: f64) -> Self {
        GradientSpec {
            scheme: FdScheme::Forward,
            h_rel,
        }
    }

    pub fn central(h_rel: f64) -> Self {
        GradientSpec {
            scheme: FdScheme::Central,
            h_rel,
        }
    }
}

/// Finite-difference Jacobian (`d × m`). All perturbed points go to the
/// model as a single batch.
pub fn fd_gradient(model: &dyn Model, x: &[f64], spec: GradientSpec) -> Result<DMatrix<f64>> {
    let d = model.input_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if !(spec.h_rel > 0.0) {
        return Err(Error::InvalidArgument("relative step must be positive".into()));
    }
    let steps: Vec<f64> = x.iter().map(|xi| spec.h_rel * xi.abs().max(1.0)).collect();
    let perturbed = |i: usize, sign: f64| {
        let mut p = x.to_vec();
        p[i] += sign * steps[i];
        p
    };

    let (points, labels): (Vec<Vec<f64>>, Vec<String>) = match spec.scheme {
        FdScheme::Forward => std::iter::once((x.to_vec(), "base point".to_string()))
            .chain((0..d).map(|i| (perturbed(i, 1.0), format!("+h along input {i}"))))
            .unzip(),
        FdScheme::Central => (0..d)
            .flat_map(|i| {
                [
                    (perturbed(i, 1.0), format!("+h along input {i}")),
                    (perturbed(i, -1.0), format!("-h along input {i}")),
                ]
            })
            .unzip(),
    };
    let batch = evaluate_points(model, &points)?;
    if let Some(bad) = (0..batch.len()).find(|&k| !batch.is_completed(k)) {
        return Err(Error::Gradient(format!("{} ({})", labels[bad], batch.diagnostics[bad])));
    }
    let m = model.output_dim();
    let out = &batch.outputs;
    let jac = match spec.scheme {
        FdScheme::Forward => {
            // exact step actually taken, to cancel representation error
            DMatrix::from_fn(d, m, |i, k| (out[i + 1][k] - out[0][k]) / (points[i + 1][i] - x[i]))
        }
        FdScheme::Central => DMatrix::from_fn(d, m, |i, k| {
            (out[2 * i][k] - out[2 * i + 1][k]) / (points[2 * i][i] - points[2 * i + 1][i])
        }),
    };
    Ok(jac)
}

/// Analytic Jacobian when the model has one, finite differences otherwise.
pub fn gradient(model: &dyn Model, x: &[f64], spec: GradientSpec) -> Result<DMatrix<f64>> {
    match model.jacobian(x) {
        Some(j) => j,
        None => fd_gradient(model, x, spec),
    }
}
