use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed values with optional coordinates and a fixed noise variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    /// Coordinate names without the `coord_` prefix.
    pub coord_names: Vec<String>,
    pub coords: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub noise_variance: f64,
}

impl ObservationSet {
    pub fn new(coord_names: Vec<String>, coords: Vec<Vec<f64>>, values: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Observations("noise variance must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::Observations("at least one observation is required".into()));
        }
        if coords.len() != values.len() || coords.iter().any(|c| c.len() != coord_names.len()) {
            return Err(Error::Observations("coordinates do not match the observations".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Observations(format!("non-finite observation at row {}", i + 1)));
        }
        Ok(ObservationSet {
            coord_names,
            coords,
            values,
            noise_variance,
        })
    }

    /// Observations without coordinates.
    pub fn from_values(values: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let coords = vec![Vec::new(); values.len()];
        Self::new(Vec::new(), coords, values, noise_variance)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reads a CSV with a header row of `coord_<name>` columns followed by
/// `value`. Row order is preserved.
pub fn load_observations(path: impl AsRef<Path>, noise_variance: f64) -> Result<ObservationSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Observations(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    let mut coord_cols = Vec::new();
    let mut coord_names = Vec::new();
    let mut value_col = None;
    for (j, h) in headers.iter().enumerate() {
        if let Some(name) = h.strip_prefix("coord_") {
            coord_cols.push(j);
            coord_names.push(name.to_string());
        } else if h == "value" {
            value_col = Some(j);
        } else {
            return Err(Error::Observations(format!("unexpected column {h}")));
        }
    }
    let value_col = value_col.ok_or_else(|| Error::Observations("missing column value".into()))?;

    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |j: usize| -> Result<f64> {
            let text = record.get(j).unwrap_or("");
            text.parse::<f64>().map_err(|_| {
                Error::Observations(format!(
                    "non-numeric cell {text:?} at row {row}, column {}",
                    &headers[j]
                ))
            })
        };
        coords.push(coord_cols.iter().map(|&j| cell(j)).collect::<Result<Vec<f64>>>()?);
        values.push(cell(value_col)?);
    }
    ObservationSet::new(coord_names, coords, values, noise_variance)
}
