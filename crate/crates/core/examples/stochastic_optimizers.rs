//! Adam, Adamax and RMSprop on the same smooth objective.

use multiquery::models::{FunctionModel, GradientSpec};
use multiquery::optimize::{stochastic_minimize_model, StochasticKind, StochasticOptimizerConfig};

fn main() -> multiquery::Result<()> {
    // shifted, anisotropic quadratic with minimum at (1, -2)
    let model = FunctionModel::new("bowl", 2, 1, |x| vec![(x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2)]);
    // RMSprop has no momentum correction, so with a fixed step it settles
    // into a small oscillation of roughly step-size amplitude
    for kind in [StochasticKind::Adam, StochasticKind::Adamax, StochasticKind::Rmsprop] {
        let config = StochasticOptimizerConfig {
            step_size: 0.01,
            max_iter: 5_000,
            ..StochasticOptimizerConfig::new(kind)
        };
        let r = stochastic_minimize_model(&model, &[4.0, 3.0], &config, GradientSpec::central(1e-6))?;
        println!(
            "{kind:?}: x [{:.4}, {:.4}], objective {:.2e}, {} iterations, {:?}",
            r.x[0], r.x[1], r.objective, r.iterations, r.termination
        );
    }
    Ok(())
}
