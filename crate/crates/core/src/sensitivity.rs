//! Global sensitivity analysis: Morris elementary effects and Sobol
//! indices. Each method splits into a design generator and an estimator so
//! the model evaluation in between can go through any [`Model`].
//!
//! [`Model`]: crate::models::Model

use serde::{Deserialize, Serialize};

use crate::designs::{DesignMatrix, Provenance, SobolSequence};
use crate::error::{Error, Result};
use crate::models::BatchResult;
use crate::parameters::{from_unit_cube, ParameterSpace, RandomStream};

/// Stacked one-at-a-time trajectories on a `p`-level unit grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorrisDesign {
    pub trajectories: usize,
    pub levels: usize,
    pub delta: f64,
    /// `trajectories · (d + 1)` rows in parameter space.
    pub design: DesignMatrix,
    /// The same rows on the unit grid.
    pub unit: Vec<Vec<f64>>,
    pub trajectory_id: Vec<usize>,
    /// Dimension changed relative to the previous row; `None` for the first
    /// row of each trajectory.
    pub varied_dim: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorrisIndices {
    pub names: Vec<String>,
    pub mu: Vec<f64>,
    pub mu_star: Vec<f64>,
    pub sigma: Vec<f64>,
    pub trajectories_used: usize,
    pub trajectories_discarded: usize,
}

/// `A`, `B` and the `d` column-substituted matrices `A_B^(i)`, stacked in
/// that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaltelliDesign {
    pub base_samples: usize,
    pub dim: usize,
    pub design: DesignMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub names: Vec<String>,
    pub first_order: Vec<f64>,
    pub total_effect: Vec<f64>,
    pub variance: f64,
    pub base_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SensitivityIndices {
    Morris(MorrisIndices),
    Sobol(SobolIndices),
}

pub const DEFAULT_LEVELS: usize = 4;
pub const DEFAULT_TRAJECTORIES: usize = 20;

/// Generates `r` randomized Morris trajectories with step
/// `Δ = p / (2(p − 1))` on the unit grid.
pub fn morris_design(space: &ParameterSpace, r: usize, p: usize, rng: &mut RandomStream) -> Result<MorrisDesign> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::InvalidArgument(format!("number of levels must be even and at least 2, got {p}")));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("at least one trajectory is required".into()));
    }
    space.require_bounded()?;
    let d = space.dim();
    let step = 1.0 / (p - 1) as f64;
    let delta = p as f64 / (2.0 * (p - 1) as f64);
    let provenance = Provenance::seeded("morris", rng);

    let mut unit = Vec::with_capacity(r * (d + 1));
    let mut trajectory_id = Vec::with_capacity(r * (d + 1));
    let mut varied_dim = Vec::with_capacity(r * (d + 1));
    for t in 0..r {
        // base levels in the lower half keep x + Δ on the grid
        let mut x: Vec<f64> = (0..d).map(|_| rng.index(p / 2) as f64 * step).collect();
        let up: Vec<bool> = (0..d).map(|_| rng.uniform() < 0.5).collect();
        for i in 0..d {
            if !up[i] {
                x[i] += delta;
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        rng.shuffle(&mut order);
        unit.push(x.clone());
        trajectory_id.push(t);
        varied_dim.push(None);
        for &i in &order {
            x[i] += if up[i] { delta } else { -delta };
            // keep grid values exact despite rounding
            x[i] = (x[i] / step).round() * step;
            unit.push(x.clone());
            trajectory_id.push(t);
            varied_dim.push(Some(i));
        }
    }
    let flat: Vec<f64> = unit.iter().flatten().copied().collect();
    let design = from_unit_cube(space, &flat, provenance)?;
    Ok(MorrisDesign {
        trajectories: r,
        levels: p,
        delta,
        design,
        unit,
        trajectory_id,
        varied_dim,
    })
}

fn check_alignment(expected: usize, outputs: &BatchResult) -> Result<()> {
    if outputs.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: outputs.len(),
        });
    }
    Ok(())
}

/// Elementary-effect statistics over the first model output. Trajectories
/// containing a failed row are discarded whole.
pub fn morris_indices(design: &MorrisDesign, outputs: &BatchResult) -> Result<MorrisIndices> {
    check_alignment(design.unit.len(), outputs)?;
    let d = design.design.ncols();
    let rows_per = d + 1;
    let mut effects: Vec<Vec<f64>> = vec![Vec::with_capacity(design.trajectories); d];
    let mut discarded = 0;
    for t in 0..design.trajectories {
        let rows = t * rows_per..(t + 1) * rows_per;
        if rows.clone().any(|k| !outputs.is_completed(k)) {
            discarded += 1;
            continue;
        }
        for k in rows.start + 1..rows.end {
            let i = design.varied_dim[k].expect("non-initial trajectory row");
            let du = design.unit[k][i] - design.unit[k - 1][i];
            effects[i].push((outputs.outputs[k][0] - outputs.outputs[k - 1][0]) / du);
        }
    }
    let used = design.trajectories - discarded;
    if used == 0 {
        return Err(Error::Estimation(format!(
            "all {} Morris trajectories contain failed evaluations",
            design.trajectories
        )));
    }
    let n = used as f64;
    let mut mu = Vec::with_capacity(d);
    let mut mu_star = Vec::with_capacity(d);
    let mut sigma = Vec::with_capacity(d);
    for ee in &effects {
        let m = ee.iter().sum::<f64>() / n;
        mu.push(m);
        mu_star.push(ee.iter().map(|e| e.abs()).sum::<f64>() / n);
        sigma.push(if used > 1 {
            (ee.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        });
    }
    Ok(MorrisIndices {
        names: design.design.names().to_vec(),
        mu,
        mu_star,
        sigma,
        trajectories_used: used,
        trajectories_discarded: discarded,
    })
}

/// Builds `A` and `B` from Sobol points `skip .. skip + N` in dimension
/// `2d` (first and second half of the columns).
pub fn saltelli_design(space: &ParameterSpace, n: usize, skip: u64) -> Result<SaltelliDesign> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("base sample count must be at least 2, got {n}")));
    }
    let d = space.dim();
    if skip == 0 && !(0..d).all(|i| space.distribution(i).is_bounded()) {
        return Err(Error::InvalidArgument(
            "the first Sobol point lies on the cube boundary; use skip >= 1 for unbounded marginals".into(),
        ));
    }
    let points = SobolSequence::new(2 * d)?.points(skip, n);
    let a = |k: usize, j: usize| points[k * 2 * d + j];
    let b = |k: usize, j: usize| points[k * 2 * d + d + j];
    let mut unit = Vec::with_capacity(n * (d + 2) * d);
    for k in 0..n {
        unit.extend((0..d).map(|j| a(k, j)));
    }
    for k in 0..n {
        unit.extend((0..d).map(|j| b(k, j)));
    }
    for i in 0..d {
        for k in 0..n {
            unit.extend((0..d).map(|j| if j == i { b(k, j) } else { a(k, j) }));
        }
    }
    let provenance = Provenance {
        generator: "saltelli".into(),
        skip: Some(skip),
        ..Default::default()
    };
    Ok(SaltelliDesign {
        base_samples: n,
        dim: d,
        design: from_unit_cube(space, &unit, provenance)?,
    })
}

/// First-order (Saltelli 2010) and total-effect (Jansen) indices of the
/// first model output. Any failed row is an error.
pub fn sobol_indices(design: &SaltelliDesign, outputs: &BatchResult) -> Result<SobolIndices> {
    let (n, d) = (design.base_samples, design.dim);
    check_alignment(n * (d + 2), outputs)?;
    if let Some(row) = (0..outputs.len()).find(|&k| !outputs.is_completed(k)) {
        return Err(Error::Estimation(format!(
            "Sobol indices need complete data; row {row} failed: {}",
            outputs.diagnostics[row]
        )));
    }
    let f = outputs.first_column();
    let fa = &f[..n];
    let fb = &f[n..2 * n];
    let both = &f[..2 * n];
    let mean = both.iter().sum::<f64>() / (2 * n) as f64;
    let variance = both.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (2 * n - 1) as f64;
    if !(variance > 0.0) {
        return Err(Error::Estimation("model output has zero variance".into()));
    }
    let nf = n as f64;
    let mut first_order = Vec::with_capacity(d);
    let mut total_effect = Vec::with_capacity(d);
    for i in 0..d {
        let fab = &f[(2 + i) * n..(3 + i) * n];
        let vi: f64 = (0..n).map(|k| fb[k] * (fab[k] - fa[k])).sum::<f64>() / nf;
        let ti: f64 = (0..n).map(|k| (fa[k] - fab[k]).powi(2)).sum::<f64>() / (2.0 * nf);
        first_order.push(vi / variance);
        total_effect.push(ti / variance);
    }
    Ok(SobolIndices {
        names: design.design.names().to_vec(),
        first_order,
        total_effect,
        variance,
        base_samples: n,
    })
}
