//! Deterministic stand-in for an external simulation code.
//!
//! Usage: `mock_solver [--crash] [--sleep SECS] [--fail-once MARKER] <input-file>`
//!
//! The input file holds `name = value` lines. Keys starting with `mock_`
//! are directives; every other key is a numeric model parameter, taken in
//! file order. Results go to `output.csv` in the working directory, one
//! value per line.
//!
//! Directives:
//! - `mock_model = sum` (default): one output, the sum of the parameters.
//! - `mock_model = poly` with `mock_coords = t1 t2 …`: one output per
//!   coordinate, `y_k = Σ_j p_j · t_k^(j+1)`.
//! - `mock_fail_box = lo1 hi1 lo2 hi2 …`: exit 1 ("did not converge") when
//!   every parameter lies inside its interval.
//! - `mock_crash = 1`: exit 3 with a message on stderr.
//! - `mock_sleep = SECS`: sleep before solving.
//! - `mock_fail_once = PATH`: fail if PATH does not exist yet, creating it.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

struct Input {
    params: Vec<f64>,
    model: String,
    coords: Vec<f64>,
    fail_box: Vec<f64>,
    crash: bool,
    sleep: f64,
    fail_once: Option<String>,
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c.is_whitespace() || c == ';' || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect()
}

fn parse_input(text: &str) -> Result<Input, String> {
    let mut input = Input {
        params: Vec::new(),
        model: "sum".into(),
        coords: Vec::new(),
        fail_box: Vec::new(),
        crash: false,
        sleep: 0.0,
        fail_once: None,
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `name = value`", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "mock_model" => input.model = value.to_string(),
            "mock_coords" => input.coords = numbers(value)?,
            "mock_fail_box" => input.fail_box = numbers(value)?,
            "mock_crash" => input.crash = numbers(value)?.first().is_some_and(|v| *v >= 0.5),
            "mock_sleep" => input.sleep = numbers(value)?.first().copied().unwrap_or(0.0),
            "mock_fail_once" => input.fail_once = Some(value.to_string()),
            k if k.starts_with("mock_") => return Err(format!("unknown directive {k}")),
            _ => input.params.push(
                value
                    .parse()
                    .map_err(|_| format!("line {}: value of {key} is not a number", lineno + 1))?,
            ),
        }
    }
    Ok(input)
}

fn run() -> Result<(), (u8, String)> {
    let mut args = std::env::args().skip(1);
    let mut crash = false;
    let mut sleep = 0.0;
    let mut fail_once = None;
    let mut path = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--crash" => crash = true,
            "--sleep" => {
                sleep = args
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or((2, "--sleep needs seconds".to_string()))?
            }
            "--fail-once" => fail_once = Some(args.next().ok_or((2, "--fail-once needs a path".to_string()))?),
            _ => path = Some(arg),
        }
    }
    let path = path.ok_or((2, "usage: mock_solver [--crash] [--sleep S] <input-file>".to_string()))?;
    let text = fs::read_to_string(&path).map_err(|e| (2, format!("cannot read {path}: {e}")))?;
    let mut input = parse_input(&text).map_err(|e| (2, e))?;
    input.crash |= crash;
    input.sleep = input.sleep.max(sleep);
    if fail_once.is_some() {
        input.fail_once = fail_once;
    }

    if input.sleep > 0.0 {
        thread::sleep(Duration::from_secs_f64(input.sleep));
    }
    if input.crash {
        return Err((3, "mock solver crash requested".into()));
    }
    if let Some(marker) = &input.fail_once {
        if !Path::new(marker).exists() {
            fs::write(marker, "failed once\n").map_err(|e| (2, format!("cannot write marker: {e}")))?;
            return Err((1, "transient failure (first attempt)".into()));
        }
    }
    if !input.fail_box.is_empty() {
        if input.fail_box.len() != 2 * input.params.len() {
            return Err((2, "mock_fail_box needs a lower and upper bound per parameter".into()));
        }
        let inside = input
            .params
            .iter()
            .zip(input.fail_box.chunks_exact(2))
            .all(|(p, b)| *p >= b[0] && *p <= b[1]);
        if inside {
            return Err((1, "the simulation did not converge".into()));
        }
    }

    let outputs: Vec<f64> = match input.model.as_str() {
        "sum" => vec![input.params.iter().sum()],
        "poly" => input
            .coords
            .iter()
            .map(|t| {
                input
                    .params
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * t.powi(j as i32 + 1))
                    .sum()
            })
            .collect(),
        other => return Err((2, format!("unknown mock_model {other}"))),
    };
    let text: String = outputs.iter().map(|v| format!("{v}\n")).collect();
    fs::write("output.csv", text).map_err(|e| (2, format!("cannot write output.csv: {e}")))?;
    println!("mock solver finished: {} outputs", outputs.len());
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}
