//! Bayesian inverse analysis: a Gaussian likelihood over observed data,
//! random-walk Metropolis–Hastings, and sequential Monte Carlo with
//! adaptive likelihood tempering.

mod likelihood;
mod mcmc;
mod observations;
mod smc;

pub use likelihood::{gaussian_loglike_value, LikelihoodModel};
pub use mcmc::{metropolis_hastings, Chain};
pub use observations::{load_observations, ObservationSet};
pub use smc::{
    adapt_temperature, ess, smc_run, systematic_resample, ParticleEnsemble, SmcResult, SmcSettings,
};
