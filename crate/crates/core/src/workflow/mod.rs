//! Block-structured run configurations: parsing, planning, execution and
//! persistence.
//!
//! A configuration is a JSON object of named blocks. Three keys are
//! reserved:
//!
//! - `global_settings`: `run_name`, optional `output_dir`, master `seed`.
//! - `parameters`: named marginals, e.g. `{"E": {"type": "uniform", "lower": 1, "upper": 2}}`.
//! - `method`: `{"type": <method>, "model": <block name>, ...}`.
//!
//! Every other key names a block with a `type`:
//!
//! | type | fields |
//! |------|--------|
//! | `function` | `function` (a built-in model name) |
//! | `driver` | `executable`, `template`, `output_file`, `extractor`, `timeout`, `args`, `output_dim`, `scheduler` |
//! | `likelihood` | `forward`, `observations` (CSV path), `noise_variance` |
//! | `surrogate` | `training {model, design, n, skip}`, `restarts`, `steps`, `step_size` |
//! | `scheduler` | `max_concurrent`, `retries`, `workspace` |
//!
//! Blocks may appear in any order; references are resolved by name. Every
//! model maps the full parameter vector to its outputs, so models nest
//! freely (a surrogate of a likelihood of a driver, for example).

mod config;
mod plan;
mod results;
mod run;

pub use config::{
    load_config, parse_config, Block, DriverBlock, FunctionBlock, GlobalSettings, JacobianChoice, LikelihoodBlock,
    MethodConfig, PointsPerAxis, RunConfig, SchedulerBlock, StochasticBlock, SurrogateBlock, TrainingBlock,
    TrainingDesign, BLOCK_TYPES, METHOD_NAMES, RESERVED_KEYS,
};
pub use plan::{
    build_plan, resolve_executable, AnalysisPlan, NodeKind, PlanNode, RunOverrides, SchedulerPlan, TrainingPlan,
    DEFAULT_SCHEDULER,
};
pub use results::{
    read_results, write_results, write_results_with, ParameterEntry, ResultArtifact, RunMeta, Samples,
    SurrogateReport, OUTPUTS_FILE, RESULTS_FILE, SAMPLES_FILE, SCHEMA_VERSION,
};
pub use run::{run, run_config_file, workspace_root, WORKSPACE_ENV};
