use crate::error::{invalid, Result};

/// Standard deviations `σ_j`, indexed from `j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceSequence {
    Constant(f64),
    Explicit(Vec<f64>),
    /// `σ_j = j^a`.
    Power(f64),
}

impl VarianceSequence {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            VarianceSequence::Constant(s) => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(invalid(format!("constant sigma must be positive, got {s}")));
                }
            }
            VarianceSequence::Explicit(values) => {
                if values.len() < horizon {
                    return Err(invalid(format!(
                        "explicit variance list has {} entries, horizon is {horizon}",
                        values.len()
                    )));
                }
                if let Some((j, s)) = values.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
                    return Err(invalid(format!("sigma_{} = {s} must be positive", j + 1)));
                }
            }
            VarianceSequence::Power(a) => {
                if !a.is_finite() {
                    return Err(invalid("power exponent must be finite"));
                }
            }
        }
        Ok(())
    }

    /// `σ_j` for `j >= 1`.
    pub fn sigma(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Err(invalid("variance sequence is indexed from j = 1"));
        }
        match self {
            VarianceSequence::Constant(s) => Ok(*s),
            VarianceSequence::Explicit(values) => values
                .get(j - 1)
                .copied()
                .ok_or_else(|| invalid(format!("sigma_{j} not available ({} entries)", values.len()))),
            VarianceSequence::Power(a) => Ok((j as f64).powf(*a)),
        }
    }

    /// `σ_1, …, σ_n`.
    pub fn sigmas(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n).map(|j| self.sigma(j)).collect()
    }

    /// `s_n² = Σ_{j ≤ n} σ_j²`.
    pub fn cumulative(&self, n: usize) -> Result<f64> {
        Ok(self.sigmas(n)?.iter().map(|s| s * s).sum())
    }

    pub fn describe(&self) -> String {
        match self {
            VarianceSequence::Constant(s) => format!("constant({s})"),
            VarianceSequence::Explicit(v) => format!("explicit({} entries)", v.len()),
            VarianceSequence::Power(a) => format!("power({a})"),
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(invalid(format!("malformed interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Interval of squares of a nonnegative multiplier interval.
    pub fn squared(self) -> Self {
        Self { lo: self.lo * self.lo, hi: self.hi * self.hi }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandRule {
    Constant { lower: f64, upper: f64 },
    /// Entries indexed from `j = 0`.
    Explicit { lower: Vec<f64>, upper: Vec<f64> },
    /// `λ̄_j = λ̄ + c_upper/(j+1)`, `λ̲_j = max(0, λ̲ + c_lower/(j+1))`.
    LimitPlusDecay { c_upper: f64, c_lower: f64 },
}

/// Uncertainty intervals `[λ̲_j, λ̄_j]` for `j >= 0`; `λ_j` scales `ξ_{j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyBand {
    rule: BandRule,
    limit_lower: f64,
    limit_upper: f64,
}

impl UncertaintyBand {
    /// Constant band equal to its limits.
    pub fn constant(lower: f64, upper: f64) -> Result<Self> {
        let band = Self { rule: BandRule::Constant { lower, upper }, limit_lower: lower, limit_upper: upper };
        band.check_limits()?;
        Ok(band)
    }

    pub fn explicit(lower: Vec<f64>, upper: Vec<f64>, limit_lower: f64, limit_upper: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("explicit band lists differ in length"));
        }
        let band = Self { rule: BandRule::Explicit { lower, upper }, limit_lower, limit_upper };
        band.validate(band.explicit_len().unwrap_or(0))?;
        Ok(band)
    }

    pub fn limit_plus_decay(limit_lower: f64, limit_upper: f64, c_lower: f64, c_upper: f64) -> Result<Self> {
        let band = Self { rule: BandRule::LimitPlusDecay { c_upper, c_lower }, limit_lower, limit_upper };
        band.validate(0)?;
        Ok(band)
    }

    pub fn rule(&self) -> &BandRule {
        &self.rule
    }

    /// `(λ̲, λ̄)`.
    pub fn limits(&self) -> (f64, f64) {
        (self.limit_lower, self.limit_upper)
    }

    pub fn limit_interval(&self) -> Interval {
        Interval { lo: self.limit_lower, hi: self.limit_upper }
    }

    fn explicit_len(&self) -> Option<usize> {
        match &self.rule {
            BandRule::Explicit { lower, .. } => Some(lower.len()),
            _ => None,
        }
    }

    /// `(λ̲_j, λ̄_j)` for `j >= 0`.
    pub fn bounds(&self, j: usize) -> Result<(f64, f64)> {
        match &self.rule {
            BandRule::Constant { lower, upper } => Ok((*lower, *upper)),
            BandRule::Explicit { lower, upper } => match (lower.get(j), upper.get(j)) {
                (Some(&lo), Some(&hi)) => Ok((lo, hi)),
                _ => Err(invalid(format!("band entry j = {j} not available ({} entries)", lower.len()))),
            },
            BandRule::LimitPlusDecay { c_upper, c_lower } => {
                let w = 1.0 / (j as f64 + 1.0);
                Ok(((self.limit_lower + c_lower * w).max(0.0), self.limit_upper + c_upper * w))
            }
        }
    }

    pub fn interval(&self, j: usize) -> Result<Interval> {
        let (lo, hi) = self.bounds(j)?;
        Ok(Interval { lo, hi })
    }

    /// Uniform bound `Λ ≥ sup_j λ̄_j`.
    pub fn uniform_bound(&self) -> f64 {
        match &self.rule {
            BandRule::Constant { upper, .. } => *upper,
            BandRule::Explicit { upper, .. } => upper.iter().copied().fold(self.limit_upper, f64::max),
            BandRule::LimitPlusDecay { c_upper, .. } => self.limit_upper + c_upper.max(0.0),
        }
    }

    fn check_limits(&self) -> Result<()> {
        let (lo, hi) = self.limits();
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
            return Err(invalid(format!("band limits must satisfy 0 <= lower <= upper, got [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Checks `0 <= λ̲_j <= λ̄_j` for `j < horizon` (for the whole sequence
    /// when the rule is closed-form).
    pub fn validate(&self, horizon: usize) -> Result<()> {
        self.check_limits()?;
        match &self.rule {
            BandRule::Constant { .. } => self.check_entry(0)?,
            BandRule::Explicit { lower, .. } => {
                if lower.len() < horizon {
                    return Err(invalid(format!(
                        "explicit band has {} entries, horizon is {horizon}",
                        lower.len()
                    )));
                }
                for j in 0..lower.len() {
                    self.check_entry(j)?;
                }
            }
            BandRule::LimitPlusDecay { c_upper, c_lower } => {
                if !(c_upper.is_finite() && c_lower.is_finite()) {
                    return Err(invalid("decay coefficients must be finite"));
                }
                // Both hi_j and hi_j - lo_j are monotone in 1/(j+1), so j = 0 and
                // the limits cover every entry.
                self.check_entry(0)?;
            }
        }
        Ok(())
    }

    fn check_entry(&self, j: usize) -> Result<()> {
        let (lo, hi) = self.bounds(j)?;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
            return Err(invalid(format!("band entry j = {j} is [{lo}, {hi}]; need 0 <= lower <= upper")));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let (lo, hi) = self.limits();
        match &self.rule {
            BandRule::Constant { .. } => format!("constant[{lo},{hi}]"),
            BandRule::Explicit { lower, .. } => format!("explicit({} entries)->[{lo},{hi}]", lower.len()),
            BandRule::LimitPlusDecay { c_upper, c_lower } => {
                format!("decay[{lo}+{c_lower}/(j+1),{hi}+{c_upper}/(j+1)]")
            }
        }
    }
}
