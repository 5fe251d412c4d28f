//! Trains a Gaussian-process surrogate on a Sobol design and checks it on
//! fresh points.

use multiquery::designs::sobol_design;
use multiquery::models::Model;
use multiquery::parameters::{build_space, sample_space, Distribution, RandomStream};
use multiquery::surrogate::{train_gp, GpTrainSettings};

fn f(x: &[f64]) -> f64 {
    (3.0 * x[0]).sin() + x[1] * x[1]
}

fn main() -> multiquery::Result<()> {
    let space = build_space([
        ("x1", Distribution::uniform(0.0, 1.0)),
        ("x2", Distribution::uniform(0.0, 1.0)),
    ])?;
    let train = sobol_design(&space, 32, 1)?;
    let y: Vec<f64> = train.rows().map(f).collect();
    let gp = train_gp(&train, &y, None, &GpTrainSettings::default())?;
    println!("hyperparameters {:?}", gp.hyperparameters());
    println!("log marginal likelihood {:.3}", gp.log_marginal_likelihood());

    let test = sample_space(&space, 200, &mut RandomStream::new(1))?;
    let (mean, var) = gp.predict(&test)?;
    let mut worst = 0.0f64;
    let mut inside = 0;
    for (k, row) in test.rows().enumerate() {
        let err = (mean[k] - f(row)).abs();
        worst = worst.max(err);
        if err <= 2.0 * var[k].sqrt() {
            inside += 1;
        }
    }
    println!("max test error {worst:.2e}, {inside}/200 within two predictive sd");

    // the surrogate is itself a model and plugs into any method
    let batch = gp.evaluate(&test)?;
    println!("{} surrogate evaluations, {} failed", batch.len(), batch.failure_count());
    Ok(())
}
