//! Local concurrent job pool for driver jobs.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::designs::DesignMatrix;
use crate::driver::{execute_attempt, DriverConfig, JobRecord};
use crate::error::{Error, Result};
use crate::models::{check_input_dim, BatchResult, JobStatus, Model};
use crate::parameters::ParameterSpace;

pub const RUN_LOG: &str = "queens_run.log";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub max_concurrent: usize,
    #[serde(default)]
    pub retries: u32,
    pub workspace: PathBuf,
}

impl SchedulerConfig {
    pub fn new(workspace: impl Into<PathBuf>, max_concurrent: usize) -> Self {
        SchedulerConfig {
            max_concurrent,
            retries: 0,
            workspace: workspace.into(),
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }
}

/// Timestamped, line-oriented log shared by the scheduler and the workflow.
#[derive(Debug)]
pub struct RunLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl RunLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(RunLog {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn line(&self, message: impl AsRef<str>) {
        let stamp = chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.6fZ");
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        // logging must never take a run down
        let _ = writeln!(file, "{stamp} {}", message.as_ref());
    }
}

/// One unit of work: a parameter row rendered through a driver.
#[derive(Clone, Debug)]
pub struct JobSpec {
    pub names: Arc<[String]>,
    pub row: Vec<f64>,
    pub driver: Arc<DriverConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub completed: usize,
    pub failed: usize,
    pub timed_out: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.completed + self.failed + self.timed_out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchReport {
    /// In submission order.
    pub records: Vec<JobRecord>,
    pub counts: StatusCounts,
    pub wall_time_secs: f64,
    /// Highest number of simultaneously running jobs observed.
    pub peak_concurrency: usize,
}

/// Fixed-size worker pool over a shared queue. Job ids increase
/// monotonically across batches so job directories never collide.
#[derive(Debug)]
pub struct Scheduler {
    config: SchedulerConfig,
    next_id: AtomicU64,
    log: Arc<RunLog>,
}

fn probe_writable(dir: &Path) -> Result<()> {
    let fail = |reason: String| Error::Workspace {
        path: dir.to_path_buf(),
        reason,
    };
    fs::create_dir_all(dir).map_err(|e| fail(e.to_string()))?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"").map_err(|e| fail(e.to_string()))?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        if config.max_concurrent == 0 {
            return Err(Error::InvalidArgument("max_concurrent must be at least 1".into()));
        }
        probe_writable(&config.workspace)?;
        let log = Arc::new(RunLog::open(config.workspace.join(RUN_LOG))?);
        Self::with_log(config, log)
    }

    /// Shares an already-open run log.
    pub fn with_log(config: SchedulerConfig, log: Arc<RunLog>) -> Result<Self> {
        if config.max_concurrent == 0 {
            return Err(Error::InvalidArgument("max_concurrent must be at least 1".into()));
        }
        probe_writable(&config.workspace)?;
        let next = existing_max_job_id(&config.workspace).map_or(0, |m| m + 1);
        Ok(Scheduler {
            config,
            next_id: AtomicU64::new(next),
            log,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn log(&self) -> &Arc<RunLog> {
        &self.log
    }

    /// Runs every job, at most `max_concurrent` at a time. Blocks until the
    /// whole batch is done; failures are recorded, never propagated.
    pub fn submit_batch(&self, jobs: Vec<JobSpec>) -> Result<BatchReport> {
        if jobs.is_empty() {
            return Err(Error::InvalidArgument("batch must contain at least one job".into()));
        }
        probe_writable(&self.config.workspace)?;
        let n = jobs.len();
        let first_id = self.next_id.fetch_add(n as u64, Ordering::SeqCst);
        for k in 0..n {
            self.log.line(format!("job {} queued", first_id + k as u64));
        }

        let started = Instant::now();
        let cursor = AtomicUsize::new(0);
        let running = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<JobRecord>>> = Mutex::new(vec![None; n]);
        let workers = self.config.max_concurrent.min(n);

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = cursor.fetch_add(1, Ordering::SeqCst);
                    if k >= n {
                        break;
                    }
                    let now = running.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    let record = self.run_with_retries(&jobs[k], first_id + k as u64);
                    running.fetch_sub(1, Ordering::SeqCst);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[k] = Some(record);
                });
            }
        });

        let records: Vec<JobRecord> = slots
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .into_iter()
            .map(|r| r.expect("every queued job produces a record"))
            .collect();
        let mut counts = StatusCounts::default();
        for r in &records {
            match r.status {
                JobStatus::Completed => counts.completed += 1,
                JobStatus::Failed => counts.failed += 1,
                JobStatus::TimedOut => counts.timed_out += 1,
            }
        }
        Ok(BatchReport {
            records,
            counts,
            wall_time_secs: started.elapsed().as_secs_f64(),
            peak_concurrency: peak.load(Ordering::SeqCst),
        })
    }

    fn run_with_retries(&self, job: &JobSpec, job_id: u64) -> JobRecord {
        let mut attempt = 0;
        loop {
            self.log.line(format!("job {job_id} running (attempt {attempt})"));
            let record = execute_attempt(&job.driver, &job.names, &job.row, job_id, attempt, &self.config.workspace)
                .unwrap_or_else(|e| setup_failure(job, job_id, attempt, &self.config.workspace, e));
            let detail = if record.diagnostic.is_empty() {
                String::new()
            } else {
                format!(": {}", record.diagnostic)
            };
            self.log
                .line(format!("job {job_id} {} ({:.3} s){detail}", record.status, record.wall_time_secs));
            if record.status == JobStatus::Completed || attempt >= self.config.retries {
                return record;
            }
            attempt += 1;
        }
    }
}

fn setup_failure(job: &JobSpec, job_id: u64, attempt: u32, workspace: &Path, err: Error) -> JobRecord {
    let dir = workspace.join(crate::driver::job_dir_name(job_id, attempt));
    JobRecord {
        job_id,
        attempt,
        input_row: job.row.clone(),
        rendered_input: dir.join(crate::driver::RENDERED_INPUT),
        stdout_path: dir.join(crate::driver::STDOUT_LOG),
        stderr_path: dir.join(crate::driver::STDERR_LOG),
        working_dir: dir,
        exit_code: None,
        status: JobStatus::Failed,
        outputs: vec![f64::NAN; job.driver.output_dim],
        wall_time_secs: 0.0,
        diagnostic: format!("job setup failed: {err}"),
    }
}

fn existing_max_job_id(workspace: &Path) -> Option<u64> {
    fs::read_dir(workspace)
        .ok()?
        .filter_map(|entry| {
            let name = entry.ok()?.file_name().into_string().ok()?;
            let digits = name.strip_prefix("job_")?;
            digits.split('_').next()?.parse::<u64>().ok()
        })
        .max()
}

/// One-shot form: builds a scheduler for `config` and runs the batch.
pub fn submit_batch(jobs: Vec<JobSpec>, config: &SchedulerConfig) -> Result<BatchReport> {
    Scheduler::new(config.clone())?.submit_batch(jobs)
}

/// An external solver exposed through the [`Model`] contract.
#[derive(Debug, Clone)]
pub struct DriverModel {
    name: String,
    driver: Arc<DriverConfig>,
    scheduler: Arc<Scheduler>,
    names: Arc<[String]>,
}

impl DriverModel {
    pub fn driver(&self) -> &DriverConfig {
        &self.driver
    }

    pub fn scheduler(&self) -> &Arc<Scheduler> {
        &self.scheduler
    }
}

/// Wraps a driver and scheduler as a model over `space`.
pub fn as_model(driver: DriverConfig, scheduler: Arc<Scheduler>, space: &ParameterSpace) -> DriverModel {
    as_named_model("driver", driver, scheduler, space)
}

pub fn as_named_model(
    name: impl Into<String>,
    driver: DriverConfig,
    scheduler: Arc<Scheduler>,
    space: &ParameterSpace,
) -> DriverModel {
    DriverModel {
        name: name.into(),
        driver: Arc::new(driver),
        scheduler,
        names: space.names().into(),
    }
}

impl Model for DriverModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_dim(&self) -> usize {
        self.names.len()
    }

    fn output_dim(&self) -> usize {
        self.driver.output_dim
    }

    fn evaluate(&self, design: &DesignMatrix) -> Result<BatchResult> {
        check_input_dim(self, design)?;
        if design.nrows() == 0 {
            return Ok(BatchResult::with_capacity(0));
        }
        let jobs = design
            .rows()
            .map(|row| JobSpec {
                names: Arc::clone(&self.names),
                row: row.to_vec(),
                driver: Arc::clone(&self.driver),
            })
            .collect();
        let report = self.scheduler.submit_batch(jobs)?;
        let mut result = BatchResult::with_capacity(report.records.len());
        for record in report.records {
            if record.status == JobStatus::Completed {
                result.push_completed(record.outputs);
            } else {
                let diagnostic = format!("job {}: {}", record.job_id, record.diagnostic);
                result.push_failure(record.status, self.driver.output_dim, diagnostic);
            }
        }
        Ok(result)
    }
}
