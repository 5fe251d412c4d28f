#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub const MOCK_SOLVER: &str = env!("CARGO_BIN_EXE_mock_solver");
pub const CLI: &str = env!("CARGO_BIN_EXE_multiquery");

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Template for the mock solver with parameters `a` and `b` and optional
/// extra directive lines.
pub fn mock_template(dir: &Path, directives: &str) -> PathBuf {
    write(dir, "input.tmpl", &format!("{directives}\na = {{{{ a }}}}\nb = {{{{ b }}}}\n"))
}

/// 10×10 grid over the unit square where the corner `a, b ≥ 0.7` fails.
pub fn grid_config(dir: &Path, max_concurrent: usize) -> PathBuf {
    mock_template(dir, "mock_fail_box = 0.7 1.0 0.7 1.0");
    let doc = format!(
        r#"{{
  "global_settings": {{"run_name": "grid_study", "output_dir": "out", "seed": 1}},
  "parameters": {{
    "a": {{"type": "uniform", "lower": 0.0, "upper": 1.0}},
    "b": {{"type": "uniform", "lower": 0.0, "upper": 1.0}}
  }},
  "pool": {{"type": "scheduler", "max_concurrent": {max_concurrent}}},
  "solver": {{
    "type": "driver",
    "executable": "{MOCK_SOLVER}",
    "template": "input.tmpl",
    "timeout": 30,
    "scheduler": "pool"
  }},
  "method": {{"type": "grid", "model": "solver", "points_per_axis": 10}}
}}"#
    );
    write(dir, "grid.json", &doc)
}

pub fn mc_config(dir: &Path, seed: u64, out: &str) -> PathBuf {
    let doc = format!(
        r#"{{
  "global_settings": {{"run_name": "mc", "output_dir": "{out}", "seed": {seed}}},
  "parameters": {{
    "a": {{"type": "uniform", "lower": 0.0, "upper": 1.0}},
    "b": {{"type": "normal", "mean": 0.0, "std": 2.0}}
  }},
  "f": {{"type": "function", "function": "sum"}},
  "method": {{"type": "mc_uq", "model": "f", "n": 500}}
}}"#
    );
    write(dir, &format!("{out}.json"), &doc)
}
