use crate::error::{invalid, Result};
use crate::quadrature::GaussHermite;

const MOMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    Rademacher,
    ThreePoint,
    SkewedTwoPoint,
    DiscretizedGaussian(usize),
    Custom,
    /// Probability-valid but not standardized; sampling only.
    Unstandardized,
}

/// Finite-atom law of the standardized innovation `ξ_j / σ_j`.
///
/// Atoms are kept in the order given; that order defines the CDF partition
/// used for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDistribution {
    atoms: Vec<(f64, f64)>,
    kind: NoiseKind,
}

impl NoiseDistribution {
    /// Validates zero mean, unit variance and positive probabilities.
    pub fn custom(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let dist = Self { atoms, kind: NoiseKind::Custom };
        dist.validate()?;
        Ok(dist)
    }

    /// Arbitrary atoms with valid probabilities but no moment constraints.
    /// Usable with [`crate::montecarlo::sample_noise`]; rejected by
    /// [`crate::model::ModelSpec`].
    pub fn unstandardized(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let dist = Self { atoms, kind: NoiseKind::Unstandardized };
        dist.validate_probabilities()?;
        Ok(dist)
    }

    /// ±1 with probability 1/2 each.
    pub fn rademacher() -> Self {
        Self { atoms: vec![(-1.0, 0.5), (1.0, 0.5)], kind: NoiseKind::Rademacher }
    }

    /// `-√3, 0, √3` with probabilities `1/6, 2/3, 1/6` (three-node Gauss–Hermite).
    pub fn three_point() -> Self {
        let a = 3f64.sqrt();
        Self {
            atoms: vec![(-a, 1.0 / 6.0), (0.0, 2.0 / 3.0), (a, 1.0 / 6.0)],
            kind: NoiseKind::ThreePoint,
        }
    }

    /// `2` with probability 0.2 and `-0.5` with probability 0.8.
    pub fn skewed_two_point() -> Self {
        Self { atoms: vec![(-0.5, 0.8), (2.0, 0.2)], kind: NoiseKind::SkewedTwoPoint }
    }

    /// `m`-node Gauss–Hermite discretization of the standard normal; matches
    /// moments up to order `2m - 1`.
    pub fn discretized_gaussian(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("discretized_gaussian needs m >= 2 for unit variance"));
        }
        let rule = GaussHermite::new(m)?;
        let atoms = rule.nodes.into_iter().zip(rule.weights).collect();
        let dist = Self { atoms, kind: NoiseKind::DiscretizedGaussian(m) };
        dist.validate()?;
        Ok(dist)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match self.kind {
            NoiseKind::Rademacher => "rademacher".into(),
            NoiseKind::ThreePoint => "three_point".into(),
            NoiseKind::SkewedTwoPoint => "skewed_two_point".into(),
            NoiseKind::DiscretizedGaussian(m) => format!("discretized_gaussian({m})"),
            NoiseKind::Custom => "custom".into(),
            NoiseKind::Unstandardized => "unstandardized".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_abs_atom(&self) -> f64 {
        self.atoms.iter().map(|(a, _)| a.abs()).fold(0.0, f64::max)
    }

    /// `E g(ξ/σ)` by atom enumeration.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(a, p)| p * g(a)).sum()
    }

    /// `E |ξ/σ|^q`.
    pub fn abs_moment(&self, q: f64) -> f64 {
        self.expect(|a| a.abs().powf(q))
    }

    pub fn validate_probabilities(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(invalid("noise distribution has no atoms"));
        }
        let mut total = 0.0;
        for &(a, p) in &self.atoms {
            if !a.is_finite() || !p.is_finite() || p <= 0.0 {
                return Err(invalid(format!("bad atom ({a}, {p}): need finite value and positive probability")));
            }
            total += p;
        }
        if (total - 1.0).abs() > MOMENT_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_probabilities()?;
        let mean = self.expect(|a| a);
        let second = self.expect(|a| a * a);
        if mean.abs() > MOMENT_TOL {
            return Err(invalid(format!("noise mean is {mean}, not 0")));
        }
        if (second - 1.0).abs() > MOMENT_TOL {
            return Err(invalid(format!("noise variance is {second}, not 1")));
        }
        Ok(())
    }
}
