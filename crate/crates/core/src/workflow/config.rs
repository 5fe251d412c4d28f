use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::de::{self, DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::driver::Extractor;
use crate::error::{Error, Result};
use crate::parameters::Distribution;

/// Top-level keys that are not named blocks.
pub const RESERVED_KEYS: &[&str] = &["global_settings", "parameters", "method"];

pub const BLOCK_TYPES: &[&str] = &["function", "driver", "surrogate", "likelihood", "scheduler"];

pub const METHOD_NAMES: &[&str] = &[
    "grid",
    "monte_carlo",
    "latin_hypercube",
    "sobol_sequence",
    "morris",
    "sobol_indices",
    "mc_uq",
    "bmfmc",
    "metropolis_hastings",
    "smc",
    "levenberg_marquardt",
    "adam",
    "adamax",
    "rmsprop",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSettings {
    pub run_name: String,
    /// Relative paths resolve against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionBlock {
    /// Name of a built-in function model.
    pub function: String,
}

fn default_output_file() -> String {
    "output.csv".into()
}

fn default_extractor() -> Extractor {
    Extractor::CsvScalarColumn
}

fn default_timeout() -> f64 {
    60.0
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverBlock {
    pub executable: String,
    pub template: PathBuf,
    #[serde(default = "default_output_file")]
    pub output_file: String,
    #[serde(default = "default_extractor")]
    pub extractor: Extractor,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "one_usize")]
    pub output_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingDesign {
    Sobol,
    LatinHypercube,
    MonteCarlo,
}

fn default_skip() -> u64 {
    1
}

/// Initial design and target model a surrogate is trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBlock {
    pub model: String,
    pub design: TrainingDesign,
    pub n: usize,
    /// Leading Sobol points dropped.
    #[serde(default = "default_skip")]
    pub skip: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodBlock {
    pub forward: String,
    /// CSV with `coord_<name>` columns and a `value` column.
    pub observations: PathBuf,
    pub noise_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerBlock {
    #[serde(default = "one_usize")]
    pub max_concurrent: usize,
    #[serde(default)]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Block {
    Function(FunctionBlock),
    Driver(DriverBlock),
    Surrogate(SurrogateBlock),
    Likelihood(LikelihoodBlock),
    Scheduler(SchedulerBlock),
}

impl Block {
    pub fn type_name(&self) -> &'static str {
        match self {
            Block::Function(_) => "function",
            Block::Driver(_) => "driver",
            Block::Surrogate(_) => "surrogate",
            Block::Likelihood(_) => "likelihood",
            Block::Scheduler(_) => "scheduler",
        }
    }

    pub fn is_model(&self) -> bool {
        !matches!(self, Block::Scheduler(_))
    }

    /// Names of the model blocks this block depends on.
    pub fn model_refs(&self) -> Vec<&str> {
        match self {
            Block::Likelihood(b) => vec![b.forward.as_str()],
            Block::Surrogate(b) => b.training.iter().map(|t| t.model.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

/// Either one count for every axis or one count per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointsPerAxis {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianChoice {
    #[default]
    Forward,
    Central,
    Analytic,
}

fn default_trajectories() -> usize {
    crate::sensitivity::DEFAULT_TRAJECTORIES
}

fn default_levels() -> usize {
    crate::sensitivity::DEFAULT_LEVELS
}

fn default_n_lf() -> usize {
    1000
}

fn default_n_pairs() -> usize {
    50
}

fn default_grid_size() -> usize {
    1024
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Grid {
        model: String,
        points_per_axis: PointsPerAxis,
    },
    MonteCarlo {
        model: String,
        n: usize,
    },
    LatinHypercube {
        model: String,
        n: usize,
    },
    SobolSequence {
        model: String,
        n: usize,
        #[serde(default)]
        skip: u64,
    },
    Morris {
        model: String,
        #[serde(default = "default_trajectories")]
        trajectories: usize,
        #[serde(default = "default_levels")]
        levels: usize,
    },
    SobolIndices {
        model: String,
        base_samples: usize,
        #[serde(default = "default_skip")]
        skip: u64,
    },
    /// Monte Carlo propagation with output statistics.
    McUq {
        model: String,
        n: usize,
    },
    /// `model` is the high-fidelity model.
    Bmfmc {
        model: String,
        low_fidelity_model: String,
        #[serde(default = "default_n_lf")]
        n_lf: usize,
        #[serde(default = "default_n_pairs")]
        n_pairs: usize,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
    },
    /// `model` returns the log-likelihood.
    MetropolisHastings {
        model: String,
        steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scales: Option<Vec<f64>>,
        #[serde(default)]
        burn_in: usize,
    },
    /// `model` returns the log-likelihood.
    Smc {
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        particles: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ess_fraction: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rejuvenation_steps: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_stages: Option<usize>,
    },
    /// `model` returns the residual vector.
    LevenbergMarquardt {
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grad_tol: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_tol: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
        #[serde(default)]
        jacobian: JacobianChoice,
    },
    Adam(StochasticBlock),
    Adamax(StochasticBlock),
    Rmsprop(StochasticBlock),
}

/// Settings shared by the stochastic optimizers; unset fields keep the
/// optimizer defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticBlock {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub jacobian: JacobianChoice,
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Grid { .. } => "grid",
            MethodConfig::MonteCarlo { .. } => "monte_carlo",
            MethodConfig::LatinHypercube { .. } => "latin_hypercube",
            MethodConfig::SobolSequence { .. } => "sobol_sequence",
            MethodConfig::Morris { .. } => "morris",
            MethodConfig::SobolIndices { .. } => "sobol_indices",
            MethodConfig::McUq { .. } => "mc_uq",
            MethodConfig::Bmfmc { .. } => "bmfmc",
            MethodConfig::MetropolisHastings { .. } => "metropolis_hastings",
            MethodConfig::Smc { .. } => "smc",
            MethodConfig::LevenbergMarquardt { .. } => "levenberg_marquardt",
            MethodConfig::Adam(_) => "adam",
            MethodConfig::Adamax(_) => "adamax",
            MethodConfig::Rmsprop(_) => "rmsprop",
        }
    }

    /// The model the method drives.
    pub fn model(&self) -> &str {
        match self {
            MethodConfig::Grid { model, .. }
            | MethodConfig::MonteCarlo { model, .. }
            | MethodConfig::LatinHypercube { model, .. }
            | MethodConfig::SobolSequence { model, .. }
            | MethodConfig::Morris { model, .. }
            | MethodConfig::SobolIndices { model, .. }
            | MethodConfig::McUq { model, .. }
            | MethodConfig::Bmfmc { model, .. }
            | MethodConfig::MetropolisHastings { model, .. }
            | MethodConfig::Smc { model, .. }
            | MethodConfig::LevenbergMarquardt { model, .. } => model,
            MethodConfig::Adam(b) | MethodConfig::Adamax(b) | MethodConfig::Rmsprop(b) => &b.model,
        }
    }

    /// Every model reference, the driven model first.
    pub fn model_refs(&self) -> Vec<&str> {
        let mut refs = vec![self.model()];
        if let MethodConfig::Bmfmc { low_fidelity_model, .. } = self {
            refs.push(low_fidelity_model);
        }
        refs
    }
}

/// A parsed and cross-checked run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub global: GlobalSettings,
    pub parameters: IndexMap<String, Distribution>,
    /// Model and scheduler blocks by name, in document order.
    pub blocks: IndexMap<String, Block>,
    pub method: MethodConfig,
    /// Directory that relative paths resolve against.
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Inverse of [`parse_config`]: the document as a JSON value.
    pub fn to_value(&self) -> Value {
        let mut top = Map::new();
        top.insert("global_settings".into(), serde_json::to_value(&self.global).expect("plain data"));
        top.insert("parameters".into(), serde_json::to_value(&self.parameters).expect("plain data"));
        for (name, block) in &self.blocks {
            top.insert(name.clone(), serde_json::to_value(block).expect("plain data"));
        }
        top.insert("method".into(), serde_json::to_value(&self.method).expect("plain data"));
        Value::Object(top)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("plain data")
    }

    pub fn resolve_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Output directory: the configured one, else `<run_name>_output` next
    /// to the config.
    pub fn output_dir(&self) -> PathBuf {
        match &self.global.output_dir {
            Some(dir) => self.resolve_path(dir),
            None => self.base_dir.join(format!("{}_output", self.global.run_name)),
        }
    }
}

/// Parses a JSON run configuration. Relative paths in the document resolve
/// against `base_dir`.
pub fn parse_config(document: &str, base_dir: impl Into<PathBuf>) -> Result<RunConfig> {
    let value = parse_strict(document)?;
    let Value::Object(top) = value else {
        return Err(Error::Config("the configuration must be a JSON object of named blocks".into()));
    };

    let mut global = None;
    let mut parameters = None;
    let mut method = None;
    let mut blocks = IndexMap::new();
    for (key, body) in top {
        match key.as_str() {
            "global_settings" => {
                global = Some(
                    serde_json::from_value::<GlobalSettings>(body)
                        .map_err(|e| Error::Config(format!("global_settings: {e}")))?,
                )
            }
            "parameters" => parameters = Some(parse_parameters(body)?),
            "method" => method = Some(parse_method(body)?),
            _ => {
                let block = parse_block(&key, body)?;
                blocks.insert(key, block);
            }
        }
    }

    let global = global.ok_or_else(|| Error::Config("missing global_settings block".into()))?;
    if global.run_name.trim().is_empty()
        || global.run_name.contains(['/', '\\'])
        || global.run_name.starts_with('.')
    {
        return Err(Error::Config(format!("invalid run name {:?}", global.run_name)));
    }
    let parameters = parameters.ok_or(Error::EmptyParameterBlock)?;
    if parameters.is_empty() {
        return Err(Error::EmptyParameterBlock);
    }
    for (name, dist) in &parameters {
        dist.validate(name)?;
    }
    let method = method.ok_or_else(|| Error::Config("missing method block".into()))?;

    let config = RunConfig {
        global,
        parameters,
        blocks,
        method,
        base_dir: base_dir.into(),
    };
    check_references(&config)?;
    Ok(config)
}

/// Reads and parses a config file; paths resolve against its directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    parse_config(&text, base)
}

fn parse_parameters(body: Value) -> Result<IndexMap<String, Distribution>> {
    let Value::Object(entries) = body else {
        return Err(Error::Config("parameters must be an object of named distributions".into()));
    };
    let mut out = IndexMap::new();
    for (name, dist) in entries {
        let dist = serde_json::from_value::<Distribution>(dist)
            .map_err(|e| Error::param(&name, e.to_string()))?;
        out.insert(name, dist);
    }
    Ok(out)
}

fn type_field<'a>(what: &str, body: &'a Value) -> Result<&'a str> {
    body.as_object()
        .ok_or_else(|| Error::Config(format!("{what} must be an object")))?
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Config(format!("{what} has no type")))
}

fn parse_method(body: Value) -> Result<MethodConfig> {
    let name = type_field("method", &body)?;
    if !METHOD_NAMES.contains(&name) {
        return Err(Error::UnknownMethod {
            name: name.to_string(),
            available: METHOD_NAMES.iter().map(|s| s.to_string()).collect(),
        });
    }
    let name = name.to_string();
    serde_json::from_value(body).map_err(|e| Error::Config(format!("method {name}: {e}")))
}

fn parse_block(key: &str, body: Value) -> Result<Block> {
    let ty = type_field(&format!("block {key}"), &body)?;
    if !BLOCK_TYPES.contains(&ty) {
        return Err(Error::UnknownBlockType {
            block: key.to_string(),
            name: ty.to_string(),
            available: BLOCK_TYPES.iter().map(|s| s.to_string()).collect(),
        });
    }
    serde_json::from_value(body).map_err(|e| Error::Config(format!("block {key}: {e}")))
}

fn check_references(config: &RunConfig) -> Result<()> {
    let model = |name: &str| -> Result<()> {
        match config.blocks.get(name) {
            Some(b) if b.is_model() => Ok(()),
            Some(b) => Err(Error::Config(format!("{name} is a {} block, not a model", b.type_name()))),
            None => Err(Error::DanglingReference(name.to_string())),
        }
    };
    for block in config.blocks.values() {
        for r in block.model_refs() {
            model(r)?;
        }
        if let Block::Driver(DriverBlock {
            scheduler: Some(s), ..
        }) = block
        {
            match config.blocks.get(s) {
                Some(Block::Scheduler(_)) => {}
                Some(b) => return Err(Error::Config(format!("{s} is a {} block, not a scheduler", b.type_name()))),
                None => return Err(Error::DanglingReference(s.clone())),
            }
        }
    }
    for r in config.method.model_refs() {
        model(r)?;
    }
    Ok(())
}

/// JSON parsing that rejects duplicate keys at any depth.
fn parse_strict(document: &str) -> Result<Value> {
    let mut de = serde_json::Deserializer::from_str(document);
    let value = StrictValue.deserialize(&mut de).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix(DUPLICATE_PREFIX) {
            Some(rest) => Error::DuplicateName(rest.split(" at line").next().unwrap_or(rest).to_string()),
            None => Error::Json(e),
        }
    })?;
    de.end()?;
    Ok(value)
}

const DUPLICATE_PREFIX: &str = "duplicate key ";

struct StrictValue;

impl<'de> DeserializeSeed<'de> for StrictValue {
    type Value = Value;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> std::result::Result<Value, D::Error> {
        deserializer.deserialize_any(self)
    }
}

impl<'de> Visitor<'de> for StrictValue {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> std::result::Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> std::result::Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_u64<E>(self, v: u64) -> std::result::Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_f64<E>(self, v: f64) -> std::result::Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_str<E>(self, v: &str) -> std::result::Result<Value, E> {
        Ok(Value::String(v.to_string()))
    }

    fn visit_string<E>(self, v: String) -> std::result::Result<Value, E> {
        Ok(Value::String(v))
    }

    fn visit_unit<E>(self) -> std::result::Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_none<E>(self) -> std::result::Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Value, A::Error> {
        let mut items = Vec::new();
        while let Some(v) = seq.next_element_seed(StrictValue)? {
            items.push(v);
        }
        Ok(Value::Array(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Value, A::Error> {
        let mut out = Map::new();
        let mut seen = HashSet::new();
        while let Some(key) = map.next_key::<String>()? {
            if !seen.insert(key.clone()) {
                return Err(de::Error::custom(format!("{DUPLICATE_PREFIX}{key}")));
            }
            let v = map.next_value_seed(StrictValue)?;
            out.insert(key, v);
        }
        Ok(Value::Object(out))
    }
}
