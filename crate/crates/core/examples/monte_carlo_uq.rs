//! Forward propagation of input uncertainty through the Ishigami function
//! by plain Monte Carlo.

use multiquery::models::register_function_model;
use multiquery::parameters::{build_space, Distribution, RandomStream};
use multiquery::uq::monte_carlo;

fn main() -> multiquery::Result<()> {
    let pi = std::f64::consts::PI;
    let space = build_space((1..=3).map(|k| (format!("x{k}"), Distribution::uniform(-pi, pi))))?;
    let model = register_function_model("ishigami", Some(3))?;
    let run = monte_carlo(&model, &space, 20_000, &mut RandomStream::new(7))?;
    let s = &run.statistics[0];

    // mean a/2, variance a²/8 + b·π⁴/5 + b²·π⁸/18 + 1/2
    let (a, b) = (7.0, 0.1);
    let var = a * a / 8.0 + b * pi.powi(4) / 5.0 + b * b * pi.powi(8) / 18.0 + 0.5;
    println!("mean {:.4} (exact {:.4})", s.mean, a / 2.0);
    println!("variance {:.4} (exact {var:.4})", s.variance);
    for (level, q) in &s.quantiles {
        println!("q{level:<5} {q:8.4}");
    }
    Ok(())
}
