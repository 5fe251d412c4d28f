//! Command-line front end: `run`, `validate` and `show`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multiquery::workflow::{build_plan, load_config, read_results, run, AnalysisPlan, NodeKind, RunOverrides};
use multiquery::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "multiquery", version, about = "Multi-query analyses around arbitrary forward models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        max_concurrent: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "info")]
        log_level: log::LevelFilter,
    },
    /// Parse and plan a configuration without running it.
    Validate { config: PathBuf },
    /// Summarize a results file or output directory.
    Show { results: PathBuf },
}

fn plan_from(path: &PathBuf) -> Result<AnalysisPlan, Error> {
    build_plan(load_config(path)?)
}

fn describe(plan: &AnalysisPlan) {
    println!("run {}: method {}", plan.config.global.run_name, plan.method().name());
    println!("parameters: {}", plan.space.names().join(", "));
    for node in &plan.nodes {
        let kind = match &node.kind {
            NodeKind::Function { function, .. } => format!("function {function}"),
            NodeKind::Driver { driver, scheduler } => {
                format!("driver {} (scheduler {scheduler})", driver.executable.display())
            }
            NodeKind::Likelihood { observations, .. } => format!("likelihood over {} observations", observations.len()),
            NodeKind::Surrogate { training } => format!("surrogate trained on {} points", training.n),
            NodeKind::Method { method } => format!("method {}", method.name()),
        };
        let deps = if node.depends_on.is_empty() {
            String::new()
        } else {
            format!(" <- {}", node.depends_on.join(", "))
        };
        println!("  {}: {kind}{deps}", node.name);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output_dir,
            max_concurrent,
            seed,
            log_level,
        } => {
            env_logger::Builder::new().filter_level(log_level).init();
            let mut plan = match plan_from(&config) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let cwd = std::env::current_dir().unwrap_or_default();
            plan.apply_overrides(&RunOverrides {
                output_dir: output_dir.map(|d| cwd.join(d)),
                max_concurrent,
                seed,
            });
            match run(&plan) {
                Ok(artifact) => {
                    let c = artifact.meta.status_counts;
                    println!(
                        "{}: {} rows ({} completed, {} failed, {} timed out) -> {}",
                        artifact.meta.run_name,
                        c.total(),
                        c.completed,
                        c.failed,
                        c.timed_out,
                        plan.config.output_dir().display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::Validate { config } => match plan_from(&config) {
            Ok(plan) => {
                describe(&plan);
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Show { results } => match read_results(&results) {
            Ok(a) => {
                let c = a.meta.status_counts;
                let mut text = format!("run {} (method {}, seed {})\n", a.meta.run_name, a.meta.method, a.meta.seed);
                let _ = writeln!(text, "started {}, {:.3} s", a.meta.started_at, a.meta.wall_time_secs);
                let _ = writeln!(text, "parameters: {}", a.samples.names.join(", "));
                let _ = writeln!(
                    text,
                    "rows: {} ({} completed, {} failed, {} timed out)",
                    c.total(),
                    c.completed,
                    c.failed,
                    c.timed_out
                );
                for s in &a.meta.surrogates {
                    let _ = writeln!(
                        text,
                        "surrogate {}: {} points, training rmse {:.3e}",
                        s.name, s.n_train, s.training_rmse
                    );
                }
                let _ = writeln!(text, "{}", summarize(&a.method_results));
                // a closed pipe (e.g. `| head`) is not an error worth reporting
                let _ = std::io::stdout().lock().write_all(text.as_bytes());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("cannot read results: {e}");
                ExitCode::from(EXIT_RUNTIME)
            }
        },
    }
}

/// Method results with long arrays elided.
fn summarize(v: &serde_json::Value) -> String {
    fn trim(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Array(a) if a.len() > 8 => serde_json::Value::String(format!("[{} values]", a.len())),
            serde_json::Value::Array(a) => a.iter().map(trim).collect(),
            serde_json::Value::Object(m) => m.iter().map(|(k, v)| (k.clone(), trim(v))).collect(),
            other => other.clone(),
        }
    }
    serde_json::to_string_pretty(&trim(v)).unwrap_or_default()
}
