//! Monte Carlo for `E f(X_n)` under a feedback policy, with per-path
//! counter-based random streams so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{time_grid, AdaptedPolicy};
use crate::error::{invalid, Error, Result};
use crate::model::{ModelSpec, NoiseDistribution, TerminalFunction};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub paths: usize,
    pub seed: u64,
    /// Pair each uniform `u` with `1 - u`; one sample is the pair average.
    pub antithetic: bool,
    /// Replace each `λ` by `√(λ² + ε²)`.
    pub epsilon: Option<f64>,
}

impl SimulationConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self { paths, seed, antithetic: false, epsilon: None }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn with_epsilon(mut self, eps: Option<f64>) -> Self {
        self.epsilon = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(invalid("path count must be at least 1"));
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(invalid(format!("epsilon must be finite and >= 0, got {e}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub policy: String,
    pub n: usize,
    pub paths: usize,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub antithetic: bool,
    pub mean: f64,
    pub std_dev: f64,
    pub standard_error: f64,
    pub ci99_half_width: f64,
}

impl EstimateReport {
    pub const CSV_HEADER: &'static str = "policy,n,paths,seed,epsilon,mean,se,ci99";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.policy,
            self.n,
            self.paths,
            self.seed,
            self.epsilon.unwrap_or(0.0),
            self.mean,
            self.standard_error,
            self.ci99_half_width
        )
    }
}

/// Inverse-CDF draw: the atoms, in stored order, partition `[0, 1)`.
pub fn sample_noise<R: Rng + ?Sized>(dist: &NoiseDistribution, rng: &mut R) -> f64 {
    atom_at(dist, rng.gen::<f64>())
}

fn atom_at(dist: &NoiseDistribution, u: f64) -> f64 {
    let atoms = dist.atoms();
    let mut acc = 0.0;
    for &(a, p) in atoms {
        acc += p;
        if u < acc {
            return a;
        }
    }
    atoms[atoms.len() - 1].0
}

/// Stream for path `i`: the master seed fixes the key, `i` the stream id.
fn path_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

struct PathModel<'a> {
    spec: &'a ModelSpec,
    policy: &'a AdaptedPolicy,
    f: &'a TerminalFunction,
    scaled_sigmas: Vec<f64>,
    times: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    epsilon: Option<f64>,
}

impl PathModel<'_> {
    fn run(&self, uniforms: &[f64]) -> Result<f64> {
        let mut x = 0.0;
        for (j, &u) in uniforms.iter().enumerate() {
            let lambda = self.policy.lambda(j, x, self.times[j])?;
            let (lo, hi) = self.bounds[j];
            if !(lambda >= lo && lambda <= hi) {
                return Err(Error::PolicyOutOfBand { step: j, lambda, lower: lo, upper: hi });
            }
            let lambda = match self.epsilon {
                Some(e) => (lambda * lambda + e * e).sqrt(),
                None => lambda,
            };
            x += lambda * self.scaled_sigmas[j] * atom_at(&self.spec.noise, u);
        }
        Ok(self.f.eval(x))
    }
}

/// `f(X_n)` for every path, in path order. Paths sharing a seed use the same
/// uniforms, so runs that differ only in policy, `ε` or `f` are paired.
pub fn simulate_paths(
    spec: &ModelSpec,
    policy: &AdaptedPolicy,
    f: &TerminalFunction,
    config: &SimulationConfig,
) -> Result<Vec<f64>> {
    spec.validate()?;
    config.validate()?;
    let n = spec.horizon;
    let (sigmas, s_n) = spec.sigmas_and_scale(n)?;
    let model = PathModel {
        spec,
        policy,
        f,
        scaled_sigmas: sigmas.iter().map(|s| s / s_n).collect(),
        times: time_grid(spec, n)?,
        bounds: (0..n).map(|j| spec.band.bounds(j)).collect::<Result<_>>()?,
        epsilon: config.epsilon,
    };
    (0..config.paths)
        .into_par_iter()
        .with_min_len(64)
        .map_init(
            || vec![0.0; n],
            |u, i| {
                let mut rng = path_rng(config.seed, i);
                u.iter_mut().for_each(|v| *v = rng.gen::<f64>());
                let value = model.run(u)?;
                if !config.antithetic {
                    return Ok(value);
                }
                u.iter_mut().for_each(|v| *v = 1.0 - *v);
                Ok(0.5 * (value + model.run(u)?))
            },
        )
        .collect()
}

pub fn simulate_value(
    spec: &ModelSpec,
    policy: &AdaptedPolicy,
    f: &TerminalFunction,
    config: &SimulationConfig,
) -> Result<EstimateReport> {
    let values = simulate_paths(spec, policy, f, config)?;
    let (mean, std_dev) = mean_and_std(&values);
    let standard_error = std_dev / (values.len() as f64).sqrt();
    Ok(EstimateReport {
        policy: policy.label().to_string(),
        n: spec.horizon,
        paths: config.paths,
        seed: config.seed,
        epsilon: config.epsilon,
        antithetic: config.antithetic,
        mean,
        std_dev,
        standard_error,
        ci99_half_width: Z99 * standard_error,
    })
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and standard deviation (divisor `P - 1`), computed about the
/// first value so a constant sample gives its value and zero exactly.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let p = values.len();
    if p == 0 {
        return (f64::NAN, f64::NAN);
    }
    let shift = values[0];
    let d: Vec<f64> = values.iter().map(|v| v - shift).collect();
    let dmean = pairwise_sum(&d) / p as f64;
    if p == 1 {
        return (shift + dmean, 0.0);
    }
    let sq: Vec<f64> = d.iter().map(|v| (v - dmean) * (v - dmean)).collect();
    (shift + dmean, (pairwise_sum(&sq) / (p - 1) as f64).sqrt())
}
