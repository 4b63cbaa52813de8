//! Stochastic model: noise laws, variance sequences, uncertainty bands,
//! terminal functions, and the hypothesis checkers.

mod conditions;
mod noise;
mod sequences;
mod terminal;

pub use conditions::{
    condition_report, condition_sweep, feller_ratio, hausdorff_band_distance, lindeberg_functional,
    moment_conditions, riesz_mean, stabilization_deficiency, ConditionReport, ConditionSweep,
    Verdicts, VerdictRule, DEFAULT_LINDEBERG_EPSILONS,
};
pub use noise::{NoiseDistribution, NoiseKind};
pub use sequences::{BandRule, Interval, UncertaintyBand, VarianceSequence};
pub use terminal::TerminalFunction;

use crate::error::{invalid, Result};

/// Full model: standardized noise, variances, bands and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub noise: NoiseDistribution,
    pub variances: VarianceSequence,
    pub band: UncertaintyBand,
    pub horizon: usize,
}

impl ModelSpec {
    pub fn new(
        noise: NoiseDistribution,
        variances: VarianceSequence,
        band: UncertaintyBand,
        horizon: usize,
    ) -> Result<Self> {
        let spec = Self { noise, variances, band, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        self.noise.validate()?;
        self.variances.validate(self.horizon)?;
        self.band.validate(self.horizon)?;
        Ok(())
    }

    /// Same model truncated or extended to horizon `n`.
    pub fn with_horizon(&self, n: usize) -> Result<Self> {
        Self::new(self.noise.clone(), self.variances.clone(), self.band.clone(), n)
    }

    pub(crate) fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        if n > self.horizon {
            return Err(invalid(format!("n = {n} exceeds model horizon {}", self.horizon)));
        }
        Ok(())
    }

    /// `σ_1, …, σ_n` and `s_n`.
    pub fn sigmas_and_scale(&self, n: usize) -> Result<(Vec<f64>, f64)> {
        let sigmas = self.variances.sigmas(n)?;
        let s2: f64 = sigmas.iter().map(|s| s * s).sum();
        Ok((sigmas, s2.sqrt()))
    }
}
