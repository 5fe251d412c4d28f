//! Parameter spaces: named marginal distributions with sampling, densities
//! and unit-cube transforms.
//!
//! Every draw goes through the inverse CDF of its marginal, so
//! [`sample_space`] and [`from_unit_cube`] applied to uniform draws produce
//! the same distribution by construction.

use std::f64::consts::{PI, SQRT_2};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, erf::erfc, gamma::ln_gamma};

use crate::designs::{DesignMatrix, Provenance};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A univariate marginal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Uniform {
        lower: f64,
        upper: f64,
    },
    Normal {
        mean: f64,
        #[serde(alias = "sd")]
        std: f64,
    },
    /// `ln X ~ Normal(mu, sigma)`.
    Lognormal { mu: f64, sigma: f64 },
    /// Beta(a, b) rescaled onto `[lower, upper]`.
    Beta {
        a: f64,
        b: f64,
        #[serde(default)]
        lower: f64,
        #[serde(default = "one")]
        upper: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Distribution {
    pub fn uniform(lower: f64, upper: f64) -> Self {
        Distribution::Uniform { lower, upper }
    }

    pub fn normal(mean: f64, std: f64) -> Self {
        Distribution::Normal { mean, std }
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Self {
        Distribution::Lognormal { mu, sigma }
    }

    pub fn beta(a: f64, b: f64, lower: f64, upper: f64) -> Self {
        Distribution::Beta { a, b, lower, upper }
    }

    /// Checks the parameter constraints; `name` labels the error.
    pub fn validate(&self, name: &str) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("{what} must be finite")))
            }
        };
        match *self {
            Distribution::Uniform { lower, upper } => {
                finite(lower, "lower bound")?;
                finite(upper, "upper bound")?;
                if lower > upper {
                    return Err(Error::param(name, "lower bound exceeds upper bound"));
                }
            }
            Distribution::Normal { mean, std } => {
                finite(mean, "mean")?;
                if !(std > 0.0 && std.is_finite()) {
                    return Err(Error::param(name, "standard deviation must be positive"));
                }
            }
            Distribution::Lognormal { mu, sigma } => {
                finite(mu, "log-mean")?;
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::param(name, "standard deviation must be positive"));
                }
            }
            Distribution::Beta { a, b, lower, upper } => {
                if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
                    return Err(Error::param(name, "beta shapes must be positive"));
                }
                finite(lower, "lower bound")?;
                finite(upper, "upper bound")?;
                if lower >= upper {
                    return Err(Error::param(name, "beta lower bound must be below upper bound"));
                }
            }
        }
        Ok(())
    }

    /// Support as `(lower, upper)`; unbounded ends are infinite.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lower, upper } | Distribution::Beta { lower, upper, .. } => {
                (lower, upper)
            }
            Distribution::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::Lognormal { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.support();
        lo.is_finite() && hi.is_finite()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => {
                if x < lower || x > upper || x.is_nan() {
                    f64::NEG_INFINITY
                } else if lower == upper {
                    // fixed value
                    0.0
                } else {
                    -(upper - lower).ln()
                }
            }
            Distribution::Normal { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * LN_2PI - std.ln() - 0.5 * z * z
            }
            Distribution::Lognormal { mu, sigma } => {
                if x <= 0.0 || x.is_nan() {
                    return f64::NEG_INFINITY;
                }
                let z = (x.ln() - mu) / sigma;
                -0.5 * LN_2PI - sigma.ln() - x.ln() - 0.5 * z * z
            }
            Distribution::Beta { a, b, lower, upper } => {
                if x < lower || x > upper || x.is_nan() {
                    return f64::NEG_INFINITY;
                }
                let width = upper - lower;
                let z = (x - lower) / width;
                let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
                (a - 1.0) * z.ln() + (b - 1.0) * (1.0 - z).ln() - ln_beta - width.ln()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => {
                if x < lower {
                    0.0
                } else if x >= upper {
                    1.0
                } else {
                    (x - lower) / (upper - lower)
                }
            }
            Distribution::Normal { mean, std } => std_normal_cdf((x - mean) / std),
            Distribution::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - mu) / sigma)
                }
            }
            Distribution::Beta { a, b, lower, upper } => {
                if x <= lower {
                    0.0
                } else if x >= upper {
                    1.0
                } else {
                    beta_reg(a, b, (x - lower) / (upper - lower))
                }
            }
        }
    }

    /// Inverse CDF for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => {
                if lower == upper {
                    lower
                } else {
                    lower + u * (upper - lower)
                }
            }
            Distribution::Normal { mean, std } => mean + std * std_normal_quantile(u),
            Distribution::Lognormal { mu, sigma } => (mu + sigma * std_normal_quantile(u)).exp(),
            Distribution::Beta { a, b, lower, upper } => {
                lower + (upper - lower) * beta_quantile(a, b, u)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => 0.5 * (lower + upper),
            Distribution::Normal { mean, .. } => mean,
            Distribution::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Distribution::Beta { a, b, lower, upper } => lower + (upper - lower) * a / (a + b),
        }
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation (relative
/// error below 1.2e-9) polished with one Halley step against `erfc`.
pub fn std_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Bisection on the regularized incomplete beta function to 1e-10.
fn beta_quantile(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordered, uniquely named marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    entries: Vec<(String, Distribution)>,
}

impl ParameterSpace {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn entries(&self) -> &[(String, Distribution)] {
        &self.entries
    }

    pub fn distribution(&self, index: usize) -> &Distribution {
        &self.entries[index].1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        log_pdf(self, x)
    }

    /// Errors naming the first unbounded marginal, if any.
    pub fn require_bounded(&self) -> Result<()> {
        match self.entries.iter().find(|(_, d)| !d.is_bounded()) {
            Some((name, _)) => Err(Error::UnboundedMarginal(name.clone())),
            None => Ok(()),
        }
    }
}

/// Builds a space from `(name, distribution)` pairs in declaration order.
pub fn build_space<I, S>(config: I) -> Result<ParameterSpace>
where
    I: IntoIterator<Item = (S, Distribution)>,
    S: Into<String>,
{
    let mut entries: Vec<(String, Distribution)> = Vec::new();
    for (name, dist) in config {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::param(name, "parameter names must be non-empty"));
        }
        if entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::DuplicateName(name));
        }
        dist.validate(&name)?;
        entries.push((name, dist));
    }
    if entries.is_empty() {
        return Err(Error::EmptyParameterBlock);
    }
    Ok(ParameterSpace { entries })
}

/// Draws `n` i.i.d. rows from the product of the marginals.
pub fn sample_space(space: &ParameterSpace, n: usize, rng: &mut RandomStream) -> Result<DesignMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let d = space.dim();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        for (_, dist) in &space.entries {
            values.push(dist.quantile(rng.uniform_open()));
        }
    }
    let provenance = Provenance::seeded("monte_carlo", rng);
    DesignMatrix::new(space.names(), values, provenance)
}

/// Sum of marginal log-densities; `-inf` outside the support.
pub fn log_pdf(space: &ParameterSpace, x: &[f64]) -> Result<f64> {
    if x.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: x.len(),
        });
    }
    Ok(space
        .entries
        .iter()
        .zip(x)
        .map(|((_, dist), &xi)| dist.ln_pdf(xi))
        .sum())
}

/// Componentwise inverse-CDF transform of unit-cube points (`unit` is
/// row-major `n × d`).
pub fn from_unit_cube(space: &ParameterSpace, unit: &[f64], provenance: Provenance) -> Result<DesignMatrix> {
    let d = space.dim();
    if unit.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: unit.len() % d,
        });
    }
    let mut values = Vec::with_capacity(unit.len());
    for (k, &u) in unit.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::UnitCubeViolation {
                row: k / d,
                column: k % d,
                value: u,
            });
        }
        values.push(space.entries[k % d].1.quantile(u));
    }
    DesignMatrix::new(space.names(), values, provenance)
}

/// Counter-based, splittable random stream: ChaCha8 keyed by the master
/// seed, with the stream index selecting an independent keystream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomStream { seed, stream, rng }
    }

    /// Fresh stream sharing this seed; the index is combined with the
    /// current one so nested splits stay distinct.
    pub fn substream(&self, index: u64) -> RandomStream {
        let mixed = self
            .stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
            ^ index.wrapping_add(1);
        RandomStream::with_stream(self.seed, mixed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        std_normal_quantile(self.uniform_open())
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
