use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use super::config::{Block, DriverBlock, MethodConfig, RunConfig, SchedulerBlock, TrainingBlock};
use crate::driver::DriverConfig;
use crate::error::{Error, Result};
use crate::inference::{load_observations, ObservationSet};
use crate::models::{register_function_model, Model};
use crate::parameters::{build_space, ParameterSpace};
use crate::surrogate::GpTrainSettings;

/// Name of the scheduler used by drivers that do not reference one.
pub const DEFAULT_SCHEDULER: &str = "default";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchedulerPlan {
    pub name: String,
    pub max_concurrent: usize,
    pub retries: u32,
    /// Explicit workspace; `None` uses the run's workspace root.
    pub workspace: Option<PathBuf>,
}

/// A surrogate's offline training step, recorded but not executed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingPlan {
    pub target: String,
    pub design: super::config::TrainingDesign,
    pub n: usize,
    pub skip: u64,
    pub settings: GpTrainSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Function { function: String, output_dim: usize },
    Driver { driver: DriverConfig, scheduler: String },
    Likelihood { forward: String, observations: ObservationSet },
    Surrogate { training: TrainingPlan },
    Method { method: MethodConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanNode {
    pub name: String,
    pub kind: NodeKind,
    pub depends_on: Vec<String>,
}

/// Overrides applied on top of a configuration, e.g. from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub output_dir: Option<PathBuf>,
    pub max_concurrent: Option<usize>,
    pub seed: Option<u64>,
}

/// The resolved object graph: parameter space, schedulers, and model nodes
/// ordered innermost first, with the method node last.
#[derive(Clone, Debug)]
pub struct AnalysisPlan {
    pub config: RunConfig,
    pub space: ParameterSpace,
    pub schedulers: Vec<SchedulerPlan>,
    pub nodes: Vec<PlanNode>,
}

impl AnalysisPlan {
    pub fn method(&self) -> &MethodConfig {
        &self.config.method
    }

    pub fn node(&self, name: &str) -> Option<&PlanNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn apply_overrides(&mut self, overrides: &RunOverrides) {
        if let Some(dir) = &overrides.output_dir {
            self.config.global.output_dir = Some(dir.clone());
        }
        if let Some(k) = overrides.max_concurrent {
            for s in &mut self.schedulers {
                s.max_concurrent = k;
            }
        }
        if let Some(seed) = overrides.seed {
            self.config.global.seed = seed;
        }
    }
}

/// Validates and wires a configuration without evaluating any model.
/// Templates, executables and observation files are resolved here so a
/// broken setup fails before the first job runs.
pub fn build_plan(config: RunConfig) -> Result<AnalysisPlan> {
    let space = build_space(config.parameters.iter().map(|(n, d)| (n.clone(), d.clone())))?;

    let mut order = Vec::new();
    let mut state = HashMap::new();
    let mut stack = Vec::new();
    for r in config.method.model_refs() {
        visit(&config, r, &mut state, &mut stack, &mut order)?;
    }

    let mut nodes = Vec::new();
    let mut schedulers: Vec<SchedulerPlan> = Vec::new();
    for name in &order {
        let block = &config.blocks[name.as_str()];
        let depends_on: Vec<String> = block.model_refs().into_iter().map(String::from).collect();
        let kind = match block {
            Block::Function(f) => {
                let model = register_function_model(&f.function, Some(space.dim()))?;
                NodeKind::Function {
                    function: f.function.clone(),
                    output_dim: model.output_dim(),
                }
            }
            Block::Driver(d) => {
                let scheduler = d.scheduler.clone().unwrap_or_else(|| DEFAULT_SCHEDULER.to_string());
                if !schedulers.iter().any(|s| s.name == scheduler) {
                    schedulers.push(scheduler_plan(&config, &scheduler));
                }
                NodeKind::Driver {
                    driver: driver_config(&config, name, d)?,
                    scheduler,
                }
            }
            Block::Likelihood(l) => {
                let observations = load_observations(config.resolve_path(&l.observations), l.noise_variance)?;
                NodeKind::Likelihood {
                    forward: l.forward.clone(),
                    observations,
                }
            }
            Block::Surrogate(s) => {
                let training = s
                    .training
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("surrogate {name} has no training block")))?;
                NodeKind::Surrogate {
                    training: training_plan(training, s, config.global.seed),
                }
            }
            Block::Scheduler(_) => unreachable!("schedulers are not model nodes"),
        };
        nodes.push(PlanNode {
            name: name.clone(),
            kind,
            depends_on,
        });
    }
    check_output_dims(&config, &nodes)?;
    nodes.push(PlanNode {
        name: "method".into(),
        kind: NodeKind::Method {
            method: config.method.clone(),
        },
        depends_on: config.method.model_refs().into_iter().map(String::from).collect(),
    });

    for (name, block) in &config.blocks {
        if !order.contains(name) && block.is_model() {
            log::warn!("block {name} is not referenced and will not be instantiated");
        }
    }

    Ok(AnalysisPlan {
        config,
        space,
        schedulers,
        nodes,
    })
}

fn visit(
    config: &RunConfig,
    name: &str,
    state: &mut HashMap<String, bool>,
    stack: &mut Vec<String>,
    order: &mut Vec<String>,
) -> Result<()> {
    match state.get(name) {
        Some(true) => return Ok(()),
        Some(false) => {
            let start = stack.iter().position(|s| s == name).unwrap_or(0);
            let mut cycle: Vec<&str> = stack[start..].iter().map(String::as_str).collect();
            cycle.push(name);
            return Err(Error::Cycle(cycle.join(" -> ")));
        }
        None => {}
    }
    let block = config
        .blocks
        .get(name)
        .ok_or_else(|| Error::DanglingReference(name.to_string()))?;
    state.insert(name.to_string(), false);
    stack.push(name.to_string());
    for dep in block.model_refs() {
        visit(config, dep, state, stack, order)?;
    }
    stack.pop();
    state.insert(name.to_string(), true);
    order.push(name.to_string());
    Ok(())
}

fn scheduler_plan(config: &RunConfig, name: &str) -> SchedulerPlan {
    let block = match config.blocks.get(name) {
        Some(Block::Scheduler(b)) => b.clone(),
        _ => SchedulerBlock {
            max_concurrent: 1,
            retries: 0,
            workspace: None,
        },
    };
    SchedulerPlan {
        name: name.to_string(),
        max_concurrent: block.max_concurrent,
        retries: block.retries,
        workspace: block.workspace.as_deref().map(|w| config.resolve_path(w)),
    }
}

fn driver_config(config: &RunConfig, name: &str, d: &DriverBlock) -> Result<DriverConfig> {
    if !(d.timeout > 0.0 && d.timeout.is_finite()) {
        return Err(Error::Config(format!("driver {name}: timeout must be positive")));
    }
    if d.output_dim == 0 {
        return Err(Error::Config(format!("driver {name}: output_dim must be at least 1")));
    }
    let executable = resolve_executable(&d.executable, &config.base_dir)
        .ok_or_else(|| Error::Config(format!("driver {name}: executable {} not found", d.executable)))?;
    Ok(DriverConfig::new(
        executable,
        config.resolve_path(&d.template),
        d.output_file.clone(),
        d.extractor,
        Duration::from_secs_f64(d.timeout),
    )?
    .with_args(d.args.iter().cloned())
    .with_output_dim(d.output_dim))
}

fn training_plan(t: &TrainingBlock, s: &super::config::SurrogateBlock, seed: u64) -> TrainingPlan {
    let defaults = GpTrainSettings::default();
    TrainingPlan {
        target: t.model.clone(),
        design: t.design,
        n: t.n,
        skip: t.skip,
        settings: GpTrainSettings {
            restarts: s.restarts.unwrap_or(defaults.restarts),
            steps: s.steps.unwrap_or(defaults.steps),
            step_size: s.step_size.unwrap_or(defaults.step_size),
            seed,
        },
    }
}

fn output_dim(nodes: &[PlanNode], name: &str) -> usize {
    match nodes.iter().find(|n| n.name == name).map(|n| &n.kind) {
        Some(NodeKind::Function { output_dim, .. }) => *output_dim,
        Some(NodeKind::Driver { driver, .. }) => driver.output_dim,
        _ => 1,
    }
}

fn check_output_dims(config: &RunConfig, nodes: &[PlanNode]) -> Result<()> {
    for node in nodes {
        if let NodeKind::Likelihood { forward, observations } = &node.kind {
            let m = output_dim(nodes, forward);
            if m != observations.len() {
                return Err(Error::Config(format!(
                    "likelihood {}: forward model {forward} has {m} outputs but there are {} observations",
                    node.name,
                    observations.len()
                )));
            }
        }
    }
    let scalar = |name: &str| -> Result<()> {
        let m = output_dim(nodes, name);
        if m != 1 {
            return Err(Error::Config(format!(
                "method {} needs a single-output model, {name} has {m} outputs",
                config.method.name()
            )));
        }
        Ok(())
    };
    match &config.method {
        MethodConfig::MetropolisHastings { model, .. }
        | MethodConfig::Smc { model, .. }
        | MethodConfig::Morris { model, .. }
        | MethodConfig::SobolIndices { model, .. } => scalar(model),
        MethodConfig::Bmfmc {
            model,
            low_fidelity_model,
            ..
        } => scalar(model).and(scalar(low_fidelity_model)),
        MethodConfig::Adam(b) | MethodConfig::Adamax(b) | MethodConfig::Rmsprop(b) => scalar(&b.model),
        _ => Ok(()),
    }
}

/// Resolves a solver executable: absolute paths and paths with a directory
/// part are taken relative to the config; bare names are looked up next to
/// the config, next to the running binary (and one level up, for example
/// binaries), then on `PATH`.
pub fn resolve_executable(name: &str, base_dir: &Path) -> Option<PathBuf> {
    let path = Path::new(name);
    if path.is_absolute() {
        return path.is_file().then(|| path.to_path_buf());
    }
    if path.components().count() > 1 {
        let p = base_dir.join(path);
        return p.is_file().then_some(p);
    }
    let mut candidates = vec![base_dir.join(name)];
    if let Ok(exe) = std::env::current_exe() {
        if let Some(dir) = exe.parent() {
            candidates.push(dir.join(name));
            if let Some(up) = dir.parent() {
                candidates.push(up.join(name));
            }
        }
    }
    if let Some(paths) = std::env::var_os("PATH") {
        candidates.extend(std::env::split_paths(&paths).map(|d| d.join(name)));
    }
    candidates.into_iter().find(|p| p.is_file())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::parse_config;

    fn doc(blocks: &str, method: &str) -> String {
        format!(
            r#"{{
                "global_settings": {{"run_name": "t"}},
                "parameters": {{"a": {{"type": "uniform", "lower": 0, "upper": 1}},
                                "b": {{"type": "uniform", "lower": 0, "upper": 1}}}},
                {blocks},
                "method": {method}
            }}"#
        )
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let d = doc(
            r#""s": {"type": "surrogate", "training": {"model": "s", "design": "sobol", "n": 8}}"#,
            r#"{"type": "monte_carlo", "model": "s", "n": 10}"#,
        );
        let err = build_plan(parse_config(&d, ".").unwrap()).unwrap_err();
        assert!(err.to_string().contains("cycle detected"), "{err}");
    }

    #[test]
    fn surrogate_needs_training() {
        let d = doc(r#""s": {"type": "surrogate"}"#, r#"{"type": "monte_carlo", "model": "s", "n": 10}"#);
        let err = build_plan(parse_config(&d, ".").unwrap()).unwrap_err();
        assert!(err.to_string().contains("no training block"), "{err}");
    }

    #[test]
    fn order_independent_and_innermost_first() {
        let a = doc(
            r#""f": {"type": "function", "function": "sum"},
               "s": {"type": "surrogate", "training": {"model": "f", "design": "sobol", "n": 8}}"#,
            r#"{"type": "monte_carlo", "model": "s", "n": 10}"#,
        );
        let b = doc(
            r#""s": {"type": "surrogate", "training": {"model": "f", "design": "sobol", "n": 8}},
               "f": {"type": "function", "function": "sum"}"#,
            r#"{"type": "monte_carlo", "model": "s", "n": 10}"#,
        );
        let pa = build_plan(parse_config(&a, ".").unwrap()).unwrap();
        let pb = build_plan(parse_config(&b, ".").unwrap()).unwrap();
        assert_eq!(pa.nodes, pb.nodes);
        let names: Vec<&str> = pa.nodes.iter().map(|n| n.name.as_str()).collect();
        assert_eq!(names, ["f", "s", "method"]);
    }

    #[test]
    fn scalar_methods_reject_vector_models() {
        let d = doc(
            r#""f": {"type": "function", "function": "identity"}"#,
            r#"{"type": "sobol_indices", "model": "f", "base_samples": 16}"#,
        );
        assert!(build_plan(parse_config(&d, ".").unwrap()).is_err());
    }
}
