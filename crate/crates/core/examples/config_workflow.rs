//! Runs a JSON configuration end to end: plan, execute, persist and read
//! back. Pass a path to run one of the files in examples/configs; with no
//! argument a Sobol-index study on a builtin function is written to a
//! temporary directory.

use multiquery::workflow::{build_plan, load_config, read_results, run, RunOverrides};

const DEFAULT_CONFIG: &str = r#"{
  "global_settings": {"run_name": "ishigami_sobol", "seed": 1},
  "parameters": {
    "x1": {"type": "uniform", "lower": -3.141592653589793, "upper": 3.141592653589793},
    "x2": {"type": "uniform", "lower": -3.141592653589793, "upper": 3.141592653589793},
    "x3": {"type": "uniform", "lower": -3.141592653589793, "upper": 3.141592653589793}
  },
  "ishigami": {"type": "function", "function": "ishigami"},
  "method": {"type": "sobol_indices", "model": "ishigami", "base_samples": 4096}
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let dir = std::env::temp_dir().join(format!("multiquery_example_{}", std::process::id()));
            std::fs::create_dir_all(&dir)?;
            let p = dir.join("ishigami.json");
            std::fs::write(&p, DEFAULT_CONFIG)?;
            p
        }
    };
    let mut plan = build_plan(load_config(&path)?)?;
    plan.apply_overrides(&RunOverrides::default());
    for node in &plan.nodes {
        println!("node {} <- {:?}", node.name, node.depends_on);
    }
    let artifact = run(&plan)?;
    let out = plan.config.output_dir();
    let back = read_results(&out)?;
    assert!(back.equivalent(&artifact));
    println!("results in {}", out.display());
    // long arrays such as particle weights are left to results.json
    if let Some(fields) = artifact.method_results.as_object() {
        for (key, value) in fields {
            let text = value.to_string();
            if text.len() <= 160 {
                println!("{key}: {text}");
            }
        }
    }
    Ok(())
}
