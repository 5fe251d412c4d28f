//! External executables as models: template rendering, job directories,
//! process supervision and output extraction.
//!
//! Each job owns `job_<id>/` below the workspace root and leaves behind
//! `input.rendered`, `stdout.log`, `stderr.log` and whatever output file the
//! solver writes. The solver is started inside that directory as
//! `<executable> [args…] <abs path to input.rendered>`.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::models::JobStatus;

pub const RENDERED_INPUT: &str = "input.rendered";
pub const STDOUT_LOG: &str = "stdout.log";
pub const STDERR_LOG: &str = "stderr.log";

/// How the solver's output file is turned into an output vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    /// One value per line (first field of each CSV line).
    CsvScalarColumn,
    /// All values from the first data row.
    CsvVectorRow,
    /// The file holds exactly one number.
    SingleNumberFile,
}

impl Extractor {
    pub fn parse(&self, text: &str) -> std::result::Result<Vec<f64>, String> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
        let parse_num = |tok: &str| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("non-numeric value {tok:?}"))
        };
        // a non-numeric first line is a header
        if let Some(first) = lines.peek() {
            let head = first.split(',').next().unwrap_or("");
            if *self != Extractor::SingleNumberFile && head.trim().parse::<f64>().is_err() {
                lines.next();
            }
        }
        match self {
            Extractor::CsvScalarColumn => lines
                .map(|l| parse_num(l.split(',').next().unwrap_or("")))
                .collect(),
            Extractor::CsvVectorRow => match lines.next() {
                Some(row) => row.split(',').map(parse_num).collect(),
                None => Err("no data row".into()),
            },
            Extractor::SingleNumberFile => {
                let all: Vec<&str> = lines.collect();
                match all.as_slice() {
                    [one] => parse_num(one).map(|v| vec![v]),
                    _ => Err(format!("expected a single number, found {} lines", all.len())),
                }
            }
        }
    }
}

/// Everything needed to run one external solver invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    pub executable: PathBuf,
    pub template_path: PathBuf,
    #[serde(skip)]
    template: String,
    pub output_file: String,
    pub extractor: Extractor,
    pub timeout: Duration,
    pub args: Vec<String>,
    pub output_dim: usize,
}

impl DriverConfig {
    /// Reads the template eagerly so a missing file fails at setup time.
    pub fn new(
        executable: impl Into<PathBuf>,
        template_path: impl Into<PathBuf>,
        output_file: impl Into<String>,
        extractor: Extractor,
        timeout: Duration,
    ) -> Result<Self> {
        let template_path = template_path.into();
        let template = fs::read_to_string(&template_path).map_err(|e| Error::io(&template_path, e))?;
        if timeout.is_zero() {
            return Err(Error::InvalidArgument("driver timeout must be positive".into()));
        }
        Ok(DriverConfig {
            executable: executable.into(),
            template_path,
            template,
            output_file: output_file.into(),
            extractor,
            timeout,
            args: Vec::new(),
            output_dim: 1,
        })
    }

    pub fn with_args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_output_dim(mut self, m: usize) -> Self {
        self.output_dim = m;
        self
    }

    pub fn template(&self) -> &str {
        &self.template
    }
}

/// Shortest round-trip decimal (at most 17 significant digits), switching
/// to exponent form for very large or very small magnitudes.
pub fn format_real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Substitutes every `{{ name }}` placeholder. Unknown placeholders and
/// parameters that never appear are both errors.
pub fn render_template(template: &str, params: &[(&str, f64)]) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut used = vec![false; params.len()];
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        let name = after[..end].trim();
        match params.iter().position(|(n, _)| *n == name) {
            Some(k) => {
                used[k] = true;
                out.push_str(&format_real(params[k].1));
            }
            None => return Err(Error::Template(format!("unresolved placeholder {name}"))),
        }
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    if let Some(k) = used.iter().position(|u| !u) {
        return Err(Error::Template(format!("unused parameter {}", params[k].0)));
    }
    Ok(out)
}

/// Complete lifecycle record of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: u64,
    pub attempt: u32,
    pub input_row: Vec<f64>,
    pub rendered_input: PathBuf,
    pub working_dir: PathBuf,
    pub exit_code: Option<i32>,
    pub status: JobStatus,
    /// NaN-filled unless completed.
    pub outputs: Vec<f64>,
    pub wall_time_secs: f64,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
    pub diagnostic: String,
}

pub fn job_dir_name(job_id: u64, attempt: u32) -> String {
    if attempt == 0 {
        format!("job_{job_id}")
    } else {
        format!("job_{job_id}_retry{attempt}")
    }
}

/// Runs one job in `workspace/job_<id>/`.
pub fn execute_job(config: &DriverConfig, names: &[String], row: &[f64], job_id: u64, workspace: &Path) -> Result<JobRecord> {
    execute_attempt(config, names, row, job_id, 0, workspace)
}

pub(crate) fn execute_attempt(
    config: &DriverConfig,
    names: &[String],
    row: &[f64],
    job_id: u64,
    attempt: u32,
    workspace: &Path,
) -> Result<JobRecord> {
    if names.len() != row.len() {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            got: row.len(),
        });
    }
    let params: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(row.iter().copied()).collect();
    let rendered = render_template(&config.template, &params)?;

    let dir = workspace.join(job_dir_name(job_id, attempt));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let dir = dir.canonicalize().map_err(|e| Error::io(&dir, e))?;
    let input_path = dir.join(RENDERED_INPUT);
    fs::write(&input_path, rendered).map_err(|e| Error::io(&input_path, e))?;
    let stdout_path = dir.join(STDOUT_LOG);
    let stderr_path = dir.join(STDERR_LOG);
    let stdout = File::create(&stdout_path).map_err(|e| Error::io(&stdout_path, e))?;
    let stderr = File::create(&stderr_path).map_err(|e| Error::io(&stderr_path, e))?;

    let mut record = JobRecord {
        job_id,
        attempt,
        input_row: row.to_vec(),
        rendered_input: input_path.clone(),
        working_dir: dir.clone(),
        exit_code: None,
        status: JobStatus::Failed,
        outputs: vec![f64::NAN; config.output_dim],
        wall_time_secs: 0.0,
        stdout_path,
        stderr_path,
        diagnostic: String::new(),
    };

    let started = Instant::now();
    let spawned = Command::new(&config.executable)
        .args(&config.args)
        .arg(&input_path)
        .current_dir(&dir)
        .stdin(Stdio::null())
        .stdout(Stdio::from(stdout))
        .stderr(Stdio::from(stderr))
        .spawn();
    let mut child = match spawned {
        Ok(child) => child,
        Err(e) => {
            record.diagnostic = format!("failed to start {}: {e}", config.executable.display());
            return Ok(record);
        }
    };

    let waited = child.wait_timeout(config.timeout);
    record.wall_time_secs = started.elapsed().as_secs_f64();
    let exit = match waited {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            record.wall_time_secs = started.elapsed().as_secs_f64();
            record.status = JobStatus::TimedOut;
            record.diagnostic = format!("timed out after {:.3} s", config.timeout.as_secs_f64());
            return Ok(record);
        }
        Err(e) => {
            let _ = child.kill();
            record.diagnostic = format!("waiting for solver failed: {e}");
            return Ok(record);
        }
    };
    record.exit_code = exit.code();
    if !exit.success() {
        record.diagnostic = match exit.code() {
            Some(code) => format!("solver exited with code {code}"),
            None => "solver terminated by signal".to_string(),
        };
        return Ok(record);
    }

    let output_path = dir.join(&config.output_file);
    let text = match fs::read_to_string(&output_path) {
        Ok(t) => t,
        Err(e) => {
            record.diagnostic = format!("output file {} unreadable: {e}", output_path.display());
            return Ok(record);
        }
    };
    match config.extractor.parse(&text) {
        Ok(values) if values.len() == config.output_dim => {
            record.outputs = values;
            record.status = JobStatus::Completed;
        }
        Ok(values) => {
            record.diagnostic = format!("expected {} outputs, parsed {}", config.output_dim, values.len());
        }
        Err(msg) => record.diagnostic = format!("unparseable output: {msg}"),
    }
    Ok(record)
}
