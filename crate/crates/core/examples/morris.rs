//! Elementary-effects screening: an inert input shows up with zero μ*.

use multiquery::models::{FunctionModel, Model};
use multiquery::parameters::{build_space, Distribution, RandomStream};
use multiquery::sensitivity::{morris_design, morris_indices};

fn main() -> multiquery::Result<()> {
    let space = build_space([
        ("strong", Distribution::uniform(0.0, 1.0)),
        ("weak", Distribution::uniform(0.0, 1.0)),
        ("inert", Distribution::uniform(0.0, 1.0)),
        ("nonlinear", Distribution::uniform(0.0, 1.0)),
    ])?;
    let model = FunctionModel::new("screen", 4, 1, |x| vec![5.0 * x[0] + 0.5 * x[1] + 4.0 * x[3] * x[3] * x[0]]);
    let design = morris_design(&space, 20, 4, &mut RandomStream::new(3))?;
    let outputs = model.evaluate(&design.design)?;
    let idx = morris_indices(&design, &outputs)?;
    println!("{:>10} {:>8} {:>8} {:>8}", "input", "mu", "mu*", "sigma");
    for k in 0..idx.names.len() {
        println!("{:>10} {:8.3} {:8.3} {:8.3}", idx.names[k], idx.mu[k], idx.mu_star[k], idx.sigma[k]);
    }
    Ok(())
}
