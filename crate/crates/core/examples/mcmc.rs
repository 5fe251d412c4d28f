//! Random-walk Metropolis–Hastings on a correlated Gaussian posterior.

use multiquery::inference::metropolis_hastings;
use multiquery::parameters::RandomStream;

fn main() -> multiquery::Result<()> {
    // precision matrix of a unit-variance Gaussian with correlation 0.8
    let rho: f64 = 0.8;
    let det = 1.0 - rho * rho;
    let log_post = |x: &[f64]| -0.5 * (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / det;

    let chain = metropolis_hastings(log_post, &[3.0, -3.0], 40_000, &[0.9, 0.9], &mut RandomStream::new(11))?;
    let burn = 2_000;
    let mean = chain.mean(burn);
    let kept = &chain.states[burn..];
    let n = kept.len() as f64;
    let var0 = kept.iter().map(|s| (s[0] - mean[0]).powi(2)).sum::<f64>() / n;
    let cov = kept.iter().map(|s| (s[0] - mean[0]) * (s[1] - mean[1])).sum::<f64>() / n;
    println!("acceptance rate {:.3}", chain.acceptance_rate());
    println!("mean [{:.3}, {:.3}] (exact [0, 0])", mean[0], mean[1]);
    println!("variance {var0:.3}, covariance {cov:.3} (exact 1, {rho})");
    Ok(())
}
