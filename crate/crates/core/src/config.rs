//! Shared TOML run configuration. Unknown keys are rejected, and every block
//! present is validated before any command computes anything.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::control::{CandidateRule, DpGrid};
use crate::error::{Error, Result};
use crate::gheat::{BoundaryMode, PdeGrid};
use crate::model::{ModelSpec, NoiseDistribution, TerminalFunction, UncertaintyBand, VarianceSequence};
use crate::mollify::MollifierConfig;
use crate::montecarlo::SimulationConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub terminal: Option<TerminalBlock>,
    pub pde: Option<PdeBlock>,
    pub dp: Option<DpBlock>,
    pub mc: Option<McBlock>,
    pub check: Option<CheckBlock>,
    pub mollify: Option<MollifyBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub horizon: usize,
    pub noise: NoiseBlock,
    pub variance: VarianceBlock,
    pub band: BandBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseBlock {
    Rademacher,
    ThreePoint,
    SkewedTwoPoint,
    DiscretizedGaussian { m: usize },
    Custom { atoms: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceBlock {
    Constant { value: f64 },
    Explicit { values: Vec<f64> },
    Power { exponent: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandBlock {
    Constant { lower: f64, upper: f64 },
    Explicit { lower: Vec<f64>, upper: Vec<f64>, limit_lower: f64, limit_upper: f64 },
    LimitPlusDecay { limit_lower: f64, limit_upper: f64, c_lower: f64, c_upper: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalBlock {
    Cos,
    GaussianBump,
    ClippedRamp,
    Square,
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryName {
    DirichletTerminal,
    LinearExtrapolation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeBlock {
    pub dx: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub half_width: Option<f64>,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryName,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Emit every spatial node of the `t = 0` slice.
    #[serde(default)]
    pub dump_slice: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateName {
    EndpointsOnly,
    LambdaGrid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpBlock {
    #[serde(default = "default_candidates")]
    pub candidates: CandidateName,
    #[serde(default = "default_k")]
    pub k: usize,
    pub n_list: Vec<usize>,
    pub dx: f64,
    pub half_width: Option<f64>,
    #[serde(default)]
    pub extrapolate: bool,
    /// Allowed increase of the converge gap between consecutive n.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Upper bound on the last converge gap under `--strict`.
    pub final_gap: Option<f64>,
    /// Emit the value slices of the largest n.
    #[serde(default)]
    pub dump_slices: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Constant,
    BangBang,
    DpArgmax,
}

impl std::str::FromStr for PolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(PolicyName::Constant),
            "bang_bang" => Ok(PolicyName::BangBang),
            "dp_argmax" => Ok(PolicyName::DpArgmax),
            _ => Err(Error::Configuration(format!("unknown policy {s:?}; expected constant, bang_bang or dp_argmax"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    pub epsilon: Option<f64>,
    #[serde(default = "default_policy")]
    pub policy: PolicyName,
    /// Multiplier for the constant policy; defaults to the band midpoint.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    pub n_list: Vec<usize>,
    pub epsilons: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyBlock {
    pub epsilon: f64,
    pub window: Option<f64>,
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Configuration(format!("unknown format {s:?}; expected csv or json"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn default_theta() -> f64 {
    0.5
}
fn default_boundary() -> BoundaryName {
    BoundaryName::DirichletTerminal
}
fn default_candidates() -> CandidateName {
    CandidateName::LambdaGrid
}
fn default_k() -> usize {
    21
}
fn default_slack() -> f64 {
    2e-3
}
fn default_policy() -> PolicyName {
    PolicyName::BangBang
}
fn default_delta() -> f64 {
    0.5
}

fn config_err(field: &str, e: Error) -> Error {
    let msg = match e {
        Error::InvalidArgument(m) | Error::Configuration(m) => m,
        other => other.to_string(),
    };
    Error::Configuration(format!("[{field}] {msg}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Configuration(format!("[{field}] must be positive and finite, got {v}")))
    }
}

fn n_list_ok(field: &str, list: &[usize], horizon: usize) -> Result<()> {
    if list.is_empty() {
        return Err(Error::Configuration(format!("[{field}] n_list is empty")));
    }
    if let Some(&n) = list.iter().find(|&&n| n == 0 || n > horizon) {
        return Err(Error::Configuration(format!("[{field}] n = {n} must lie in 1..={horizon} (model.horizon)")));
    }
    Ok(())
}

/// A parsed, validated config and the SHA-256 of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    pub spec: ModelSpec,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_named(&text, &path.display().to_string())
    }

    pub fn from_str_named(text: &str, name: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Configuration(format!("{name}: {e}")))?;
        let spec = config.validate()?;
        let sha256 = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { config, sha256, spec })
    }
}

impl RunConfig {
    /// Validates every present block; returns the model.
    pub fn validate(&self) -> Result<ModelSpec> {
        let spec = self.model.to_spec().map_err(|e| config_err("model", e))?;
        let horizon = spec.horizon;
        if let Some(p) = &self.pde {
            positive("pde.dx", p.dx)?;
            if !(p.theta > 0.0 && p.theta <= 1.0) {
                return Err(Error::Configuration(format!("[pde.theta] must lie in (0, 1], got {}", p.theta)));
            }
            if let Some(h) = p.half_width {
                positive("pde.half_width", h)?;
            }
            if let Some(e) = p.epsilons.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
                return Err(Error::Configuration(format!("[pde.epsilons] entries must be >= 0, got {e}")));
            }
        }
        if let Some(d) = &self.dp {
            positive("dp.dx", d.dx)?;
            if let Some(h) = d.half_width {
                positive("dp.half_width", h)?;
            }
            n_list_ok("dp", &d.n_list, horizon)?;
            self.candidate_rule().expect("dp block present").candidates(0.0, 1.0).map_err(|e| config_err("dp.k", e))?;
            if !(d.slack >= 0.0) {
                return Err(Error::Configuration(format!("[dp.slack] must be >= 0, got {}", d.slack)));
            }
        }
        if let Some(m) = &self.mc {
            self.simulation().expect("mc block present").validate().map_err(|e| config_err("mc", e))?;
            if let Some(l) = m.lambda {
                let (lo, hi) = spec.band.limits();
                if !(lo..=hi).contains(&l) {
                    return Err(Error::Configuration(format!("[mc.lambda] {l} lies outside the band limits [{lo}, {hi}]")));
                }
            }
        }
        if let Some(c) = &self.check {
            n_list_ok("check", &c.n_list, horizon)?;
            if let Some(e) = c.epsilons.as_ref().and_then(|es| es.iter().find(|e| !(**e > 0.0))) {
                return Err(Error::Configuration(format!("[check.epsilons] entries must be positive, got {e}")));
            }
            positive("check.delta", c.delta)?;
        }
        if self.mollify.is_some() {
            self.mollifier().expect("mollify block present").validate().map_err(|e| config_err("mollify", e))?;
        }
        Ok(spec)
    }

    fn block<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::Configuration(format!("missing [{name}] block")))
    }

    pub fn terminal_function(&self) -> Result<TerminalFunction> {
        Ok(self.block(&self.terminal, "terminal")?.build())
    }

    pub fn pde_block(&self) -> Result<&PdeBlock> {
        self.block(&self.pde, "pde")
    }

    pub fn dp_block(&self) -> Result<&DpBlock> {
        self.block(&self.dp, "dp")
    }

    pub fn mc_block(&self) -> Result<&McBlock> {
        self.block(&self.mc, "mc")
    }

    pub fn check_block(&self) -> Result<&CheckBlock> {
        self.block(&self.check, "check")
    }

    /// PDE grid for a problem with upper band edge `upper`, evaluated at `x = 0`.
    pub fn pde_grid(&self, upper: f64) -> Result<PdeGrid> {
        let p = self.pde_block()?;
        let half_width = p.half_width.unwrap_or_else(|| PdeGrid::default_half_width(upper, 0.0));
        let boundary = match p.boundary {
            BoundaryName::DirichletTerminal => BoundaryMode::DirichletTerminal,
            BoundaryName::LinearExtrapolation => BoundaryMode::LinearExtrapolation,
        };
        Ok(PdeGrid::new(half_width, p.dx).with_theta(p.theta).with_boundary(boundary))
    }

    pub fn candidate_rule(&self) -> Result<CandidateRule> {
        let d = self.dp_block()?;
        Ok(match d.candidates {
            CandidateName::EndpointsOnly => CandidateRule::EndpointsOnly,
            CandidateName::LambdaGrid => CandidateRule::LambdaGrid(d.k),
        })
    }

    pub fn dp_grid(&self) -> Result<DpGrid> {
        let d = self.dp_block()?;
        Ok(DpGrid { dx: d.dx, half_width: d.half_width, extrapolate: d.extrapolate })
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        let m = self.mc_block()?;
        Ok(SimulationConfig::new(m.paths, m.seed).with_antithetic(m.antithetic).with_epsilon(m.epsilon))
    }

    pub fn mollifier(&self) -> Result<MollifierConfig> {
        let m = self.block(&self.mollify, "mollify")?;
        let mut cfg = MollifierConfig::new(m.epsilon);
        if let Some(w) = m.window {
            cfg = cfg.with_window(w);
        }
        if let Some(n) = m.nodes {
            cfg = cfg.with_nodes(n);
        }
        Ok(cfg)
    }
}

impl ModelBlock {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let noise = match &self.noise {
            NoiseBlock::Rademacher => NoiseDistribution::rademacher(),
            NoiseBlock::ThreePoint => NoiseDistribution::three_point(),
            NoiseBlock::SkewedTwoPoint => NoiseDistribution::skewed_two_point(),
            NoiseBlock::DiscretizedGaussian { m } => NoiseDistribution::discretized_gaussian(*m)?,
            NoiseBlock::Custom { atoms } => NoiseDistribution::custom(atoms.clone())?,
        };
        let variances = match &self.variance {
            VarianceBlock::Constant { value } => VarianceSequence::Constant(*value),
            VarianceBlock::Explicit { values } => VarianceSequence::Explicit(values.clone()),
            VarianceBlock::Power { exponent } => VarianceSequence::Power(*exponent),
        };
        let band = match &self.band {
            BandBlock::Constant { lower, upper } => UncertaintyBand::constant(*lower, *upper)?,
            BandBlock::Explicit { lower, upper, limit_lower, limit_upper } => {
                UncertaintyBand::explicit(lower.clone(), upper.clone(), *limit_lower, *limit_upper)?
            }
            BandBlock::LimitPlusDecay { limit_lower, limit_upper, c_lower, c_upper } => {
                UncertaintyBand::limit_plus_decay(*limit_lower, *limit_upper, *c_lower, *c_upper)?
            }
        };
        ModelSpec::new(noise, variances, band, self.horizon)
    }
}

impl TerminalBlock {
    pub fn build(&self) -> TerminalFunction {
        match self {
            TerminalBlock::Cos => TerminalFunction::cos(),
            TerminalBlock::GaussianBump => TerminalFunction::gaussian_bump(),
            TerminalBlock::ClippedRamp => TerminalFunction::clipped_ramp(),
            TerminalBlock::Square => TerminalFunction::square(),
            TerminalBlock::Constant { value } => TerminalFunction::constant(*value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
horizon = 64
noise = { kind = "rademacher" }
variance = { kind = "constant", value = 1.0 }
band = { rule = "constant", lower = 0.8, upper = 1.2 }

[terminal]
kind = "cos"

[dp]
n_list = [16, 64]
dx = 0.0125
"#;

    #[test]
    fn parses_and_hashes() {
        let c = LoadedConfig::from_str_named(BASE, "base").unwrap();
        assert_eq!(c.spec.horizon, 64);
        assert_eq!(c.sha256.len(), 64);
        assert_eq!(c.config.candidate_rule().unwrap(), CandidateRule::LambdaGrid(21));
        assert_eq!(c.config.output.format, Format::Csv);
    }

    #[test]
    fn unknown_key_reports_location() {
        let text = BASE.replace("dx = 0.0125", "dx = 0.0125\nspeed = 3");
        let err = LoadedConfig::from_str_named(&text, "cfg").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("speed") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn missing_band_is_configuration_error() {
        let text = BASE.replace("band = { rule = \"constant\", lower = 0.8, upper = 1.2 }\n", "");
        let err = LoadedConfig::from_str_named(&text, "cfg").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("band"));
    }

    #[test]
    fn n_beyond_horizon_rejected() {
        let text = BASE.replace("[16, 64]", "[16, 128]");
        let err = LoadedConfig::from_str_named(&text, "cfg").unwrap_err();
        assert!(err.to_string().contains("128"));
    }

    #[test]
    fn invalid_band_rejected() {
        let text = BASE.replace("lower = 0.8", "lower = 1.8");
        let err = LoadedConfig::from_str_named(&text, "cfg").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("[model]"));
    }
}
