//! Space-filling designs over a mixed parameter space: full grid, Monte
//! Carlo, Latin hypercube and Sobol points.

use multiquery::designs::{grid_design, lhs_design, mc_design, sobol_design, DesignMatrix};
use multiquery::parameters::{build_space, Distribution, RandomStream};

fn describe(label: &str, d: &DesignMatrix) {
    let means: Vec<String> = (0..d.ncols())
        .map(|j| format!("{:.3}", d.column(j).iter().sum::<f64>() / d.nrows() as f64))
        .collect();
    println!("{label:>8}: {} rows, column means [{}]", d.nrows(), means.join(", "));
}

fn main() -> multiquery::Result<()> {
    let space = build_space([
        ("stiffness", Distribution::uniform(1.0, 3.0)),
        ("load", Distribution::normal(10.0, 2.0)),
        ("ratio", Distribution::beta(2.0, 5.0, 0.0, 1.0)),
    ])?;
    let mut rng = RandomStream::new(42);

    describe("grid", &grid_design(&build_space([
        ("stiffness", Distribution::uniform(1.0, 3.0)),
        ("ratio", Distribution::uniform(0.0, 1.0)),
    ])?, &[5, 4])?);
    describe("mc", &mc_design(&space, 256, &mut rng)?);
    describe("lhs", &lhs_design(&space, 256, &mut rng)?);
    let sobol = sobol_design(&space, 256, 1)?;
    describe("sobol", &sobol);
    println!("first sobol row {:?}", sobol.row(0));
    println!("exact means [2.000, 10.000, {:.3}]", 2.0 / 7.0);
    Ok(())
}
