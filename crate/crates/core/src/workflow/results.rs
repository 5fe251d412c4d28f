use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::JobStatus;
use crate::parameters::Distribution;
use crate::scheduler::StatusCounts;
use crate::surrogate::GpHyperparameters;

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const OUTPUTS_FILE: &str = "outputs.csv";

/// What a surrogate's offline training produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub name: String,
    pub target: String,
    pub n_train: usize,
    /// Training rows dropped because the target failed there.
    pub failed_rows: usize,
    pub hyperparameters: GpHyperparameters,
    pub log_marginal_likelihood: f64,
    pub training_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_name: String,
    pub method: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_secs: f64,
    pub version: String,
    /// The configuration as run, after overrides.
    pub config: Value,
    pub status_counts: StatusCounts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surrogates: Vec<SurrogateReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub distribution: Distribution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Everything a run produced. Failed rows carry NaN outputs, stored as
/// `null` in JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultArtifact {
    pub schema_version: u32,
    pub meta: RunMeta,
    pub parameters: Vec<ParameterEntry>,
    pub samples: Samples,
    #[serde(serialize_with = "nan_as_null", deserialize_with = "null_as_nan")]
    pub outputs: Vec<Vec<f64>>,
    pub statuses: Vec<JobStatus>,
    pub method_results: Value,
    pub checksum: String,
}

fn nan_as_null<S: Serializer>(rows: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Option<f64>>> = rows
        .iter()
        .map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect())
        .collect();
    rows.serialize(s)
}

fn null_as_nan<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    let rows = Vec::<Vec<Option<f64>>>::deserialize(d)?;
    Ok(rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect())
}

impl ResultArtifact {
    /// The artifact without its checksum, as canonical JSON.
    pub fn payload(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("plain data");
        if let Value::Object(m) = &mut v {
            m.shift_remove("checksum");
        }
        v
    }

    pub fn compute_checksum(&self) -> String {
        checksum_of(&self.payload())
    }

    pub fn seal(mut self) -> Self {
        self.checksum = self.compute_checksum();
        self
    }

    /// Equality on every field, treating NaN outputs as equal.
    pub fn equivalent(&self, other: &ResultArtifact) -> bool {
        self.payload() == other.payload() && self.checksum == other.checksum
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.first().map_or(0, Vec::len)
    }
}

fn checksum_of(payload: &Value) -> String {
    let bytes = serde_json::to_vec(payload).expect("plain data");
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

fn samples_csv(artifact: &ResultArtifact) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&artifact.samples.names)?;
    for row in &artifact.samples.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Evaluation(e.to_string()))
}

fn outputs_csv(artifact: &ResultArtifact) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["status".to_string()];
    header.extend((0..artifact.output_dim()).map(|j| format!("y{j}")));
    w.write_record(&header)?;
    for (row, status) in artifact.outputs.iter().zip(&artifact.statuses) {
        let mut record = vec![status.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.into_inner().map_err(|e| Error::Evaluation(e.to_string()))
}

/// Writes `results.json`, `samples.csv`, `outputs.csv` and any extra files
/// into `dir`. Files are staged in a hidden directory and moved into place
/// with `results.json` last, so a readable `results.json` always belongs
/// to a complete set.
pub fn write_results_with(artifact: &ResultArtifact, dir: &Path, extra: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos());
    let staging = dir.join(format!(".partial-{}-{stamp}", std::process::id()));
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    let mut files: Vec<(String, Vec<u8>)> = extra.iter().map(|(n, c)| (n.clone(), c.clone().into_bytes())).collect();
    files.push((SAMPLES_FILE.into(), samples_csv(artifact)?));
    files.push((OUTPUTS_FILE.into(), outputs_csv(artifact)?));
    let mut json = serde_json::to_vec_pretty(artifact)?;
    json.push(b'\n');
    files.push((RESULTS_FILE.into(), json));

    for (name, bytes) in &files {
        let p = staging.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    for (name, _) in &files {
        let target = dir.join(name);
        fs::rename(staging.join(name), &target).map_err(|e| Error::io(&target, e))?;
    }
    let _ = fs::remove_dir(&staging);
    Ok(())
}

pub fn write_results(artifact: &ResultArtifact, dir: &Path) -> Result<()> {
    write_results_with(artifact, dir, &[])
}

/// Reads `results.json` (or the file inside `path` if it is a directory),
/// verifying schema version and checksum.
pub fn read_results(path: impl AsRef<Path>) -> Result<ResultArtifact> {
    let path = path.as_ref();
    let file: PathBuf = if path.is_dir() {
        path.join(RESULTS_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Checksum(format!("{} is truncated or corrupted ({e})", file.display())))?;
    let found = value.get("schema_version").and_then(Value::as_u64);
    if let Some(v) = found {
        if v != SCHEMA_VERSION as u64 {
            return Err(Error::SchemaVersion {
                found: v as u32,
                supported: SCHEMA_VERSION,
            });
        }
    }
    let recorded = value
        .as_object_mut()
        .and_then(|m| m.shift_remove("checksum"))
        .and_then(|c| c.as_str().map(String::from))
        .ok_or_else(|| Error::Checksum(format!("{} has no checksum", file.display())))?;
    if checksum_of(&value) != recorded {
        return Err(Error::Checksum(format!("{} does not match its recorded checksum", file.display())));
    }
    if let Value::Object(m) = &mut value {
        m.insert("checksum".into(), Value::String(recorded));
    }
    Ok(serde_json::from_value(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn artifact() -> ResultArtifact {
        ResultArtifact {
            schema_version: SCHEMA_VERSION,
            meta: RunMeta {
                run_name: "t".into(),
                method: "grid".into(),
                seed: 1,
                started_at: "a".into(),
                finished_at: "b".into(),
                wall_time_secs: 0.25,
                version: "0".into(),
                config: serde_json::json!({"k": 1}),
                status_counts: StatusCounts {
                    completed: 1,
                    failed: 1,
                    timed_out: 0,
                },
                surrogates: Vec::new(),
            },
            parameters: vec![ParameterEntry {
                name: "x".into(),
                distribution: Distribution::uniform(0.0, 1.0),
            }],
            samples: Samples {
                names: vec!["x".into()],
                rows: vec![vec![0.1], vec![1.0 / 3.0]],
            },
            outputs: vec![vec![0.2 + 0.1], vec![f64::NAN]],
            statuses: vec![JobStatus::Completed, JobStatus::Failed],
            method_results: serde_json::json!({"mean": 0.30000000000000004}),
            checksum: String::new(),
        }
        .seal()
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let a = artifact();
        write_results(&a, dir.path()).unwrap();
        let b = read_results(dir.path()).unwrap();
        assert!(a.equivalent(&b));
        assert_eq!(b.outputs[0][0], 0.2 + 0.1);
        assert!(b.outputs[1][0].is_nan());
        let samples = fs::read_to_string(dir.path().join(SAMPLES_FILE)).unwrap();
        assert_eq!(samples.lines().count(), 3);
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with('.'))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        write_results(&artifact(), dir.path()).unwrap();
        let p = dir.path().join(RESULTS_FILE);
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, &text[..text.len() / 2]).unwrap();
        assert!(read_results(&p).unwrap_err().to_string().contains("checksum mismatch"));
    }

    #[test]
    fn edited_value_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        write_results(&artifact(), dir.path()).unwrap();
        let p = dir.path().join(RESULTS_FILE);
        let text = fs::read_to_string(&p).unwrap().replace("0.25", "0.5");
        fs::write(&p, text).unwrap();
        assert!(read_results(&p).unwrap_err().to_string().contains("checksum mismatch"));
    }

    #[test]
    fn future_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = artifact();
        a.schema_version = 99;
        write_results(&a, dir.path()).unwrap();
        assert!(matches!(read_results(dir.path()), Err(Error::SchemaVersion { found: 99, .. })));
    }
}
