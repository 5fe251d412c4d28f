//! Bayesian multi-fidelity Monte Carlo: many cheap low-fidelity runs and
//! a few paired high-fidelity runs give the high-fidelity output density.

use multiquery::models::{FunctionModel, Model};
use multiquery::parameters::{build_space, sample_space, Distribution, RandomStream};
use multiquery::uq::{bmfmc_estimate, ks_distance_to_samples, BmfmcSettings};

fn main() -> multiquery::Result<()> {
    let space = build_space([
        ("x1", Distribution::normal(0.0, 1.0)),
        ("x2", Distribution::normal(0.0, 1.0)),
    ])?;
    let hf = FunctionModel::new("hf", 2, 1, |x| vec![x[0] + 0.5 * x[1] + 0.3 * x[0] * x[0]]);
    let lf = FunctionModel::new("lf", 2, 1, |x| vec![0.9 * x[0] + 0.45 * x[1] + 0.25 * x[0] * x[0] + 0.1]);

    let mut rng = RandomStream::new(5);
    let x = sample_space(&space, 5_000, &mut rng)?;
    let z = lf.evaluate(&x)?.first_column();

    // high-fidelity runs at points spread evenly over the LF ranking
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|a, b| z[*a].total_cmp(&z[*b]));
    let picks: Vec<usize> = (0..40).map(|k| order[(k * (z.len() - 1)) / 39]).collect();
    let y = hf.evaluate(&x.select_rows(&picks))?.first_column();
    let pairs: Vec<(f64, f64)> = picks.iter().zip(&y).map(|(i, y)| (z[*i], *y)).collect();

    let density = bmfmc_estimate(&z, &pairs, &BmfmcSettings::default())?;
    let reference = hf.evaluate(&sample_space(&space, 20_000, &mut rng.substream(1))?)?.first_column();
    println!("high-fidelity runs: {}", pairs.len());
    println!("density integral {:.4}, mean {:.4}", density.integral(), density.mean());
    println!("reference mean {:.4}", reference.iter().sum::<f64>() / reference.len() as f64);
    println!("KS distance to reference {:.4}", ks_distance_to_samples(&density, &reference));
    Ok(())
}
