//! Calibrates two parameters of a vector-valued forward model against
//! noisy observations with tempered sequential Monte Carlo.

use std::sync::Arc;

use multiquery::inference::{smc_run, LikelihoodModel, ObservationSet, SmcSettings};
use multiquery::models::FunctionModel;
use multiquery::parameters::{build_space, Distribution, RandomStream};

fn main() -> multiquery::Result<()> {
    let coords: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let c = coords.clone();
    let forward = FunctionModel::new("beam", 2, coords.len(), move |x| {
        c.iter().map(|t| x[0] * t + x[1] * t * t).collect()
    });

    let (e_true, nu_true, sd) = (1.0, 0.3, 0.1);
    let mut rng = RandomStream::new(2024);
    let values: Vec<f64> = coords
        .iter()
        .map(|t| e_true * t + nu_true * t * t + sd * rng.standard_normal())
        .collect();
    let observations = ObservationSet::new(
        vec!["t".into()],
        coords.iter().map(|t| vec![*t]).collect(),
        values,
        sd * sd,
    )?;
    let likelihood = LikelihoodModel::new(Arc::new(forward), observations)?;

    let prior = build_space([
        ("E", Distribution::uniform(0.0, 2.0)),
        ("nu", Distribution::uniform(-0.5, 1.1)),
    ])?;
    let result = smc_run(&prior, &likelihood, &SmcSettings::default(), &mut rng.substream(1))?;
    let mean = result.ensemble.mean();
    let var = result.ensemble.variance();
    println!("{} tempering stages, log evidence {:.3}", result.temperatures.len(), result.log_evidence);
    for (j, name) in ["E", "nu"].iter().enumerate() {
        println!(
            "{name}: mean {:.3} sd {:.3}, 95% interval [{:.3}, {:.3}]",
            mean[j],
            var[j].sqrt(),
            result.ensemble.quantile(j, 0.025),
            result.ensemble.quantile(j, 0.975)
        );
    }
    println!("truth E {e_true}, nu {nu_true}");
    Ok(())
}
