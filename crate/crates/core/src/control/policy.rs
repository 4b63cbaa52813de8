use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::ValueSlices;
use crate::error::Result;
use crate::gheat::PdeSolution;
use crate::model::UncertaintyBand;

type Feedback = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PolicyKind {
    Constant(f64),
    DpArgmax(Arc<ValueSlices>),
    BangBang(Arc<PdeSolution>),
    /// Arbitrary feedback `(j, x, t) ↦ λ`.
    Custom(Feedback),
}

impl fmt::Debug for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Constant(l) => write!(f, "Constant({l})"),
            PolicyKind::DpArgmax(_) => f.write_str("DpArgmax"),
            PolicyKind::BangBang(_) => f.write_str("BangBang"),
            PolicyKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Markov feedback multiplier `λ_j = π(j, X_j, t_j)`, clipped to the step-`j`
/// band. Clips and off-grid queries are counted, not fatal.
#[derive(Debug, Clone)]
pub struct AdaptedPolicy {
    kind: PolicyKind,
    band: UncertaintyBand,
    label: String,
    clipped: Arc<AtomicUsize>,
    off_grid: Arc<AtomicUsize>,
}

impl AdaptedPolicy {
    pub fn new(kind: PolicyKind, band: UncertaintyBand, label: impl Into<String>) -> Self {
        Self {
            kind,
            band,
            label: label.into(),
            clipped: Arc::default(),
            off_grid: Arc::default(),
        }
    }

    pub fn constant(lambda: f64, band: UncertaintyBand) -> Self {
        Self::new(PolicyKind::Constant(lambda), band, format!("constant({lambda})"))
    }

    pub fn dp_argmax(slices: Arc<ValueSlices>, band: UncertaintyBand) -> Self {
        Self::new(PolicyKind::DpArgmax(slices), band, "dp_argmax")
    }

    pub fn custom(
        label: impl Into<String>,
        band: UncertaintyBand,
        feedback: impl Fn(usize, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(PolicyKind::Custom(Arc::new(feedback)), band, label)
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn band(&self) -> &UncertaintyBand {
        &self.band
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of queries whose raw multiplier left the band and was clipped.
    pub fn clipped_count(&self) -> usize {
        self.clipped.load(Ordering::Relaxed)
    }

    /// Number of queries outside the underlying grid.
    pub fn off_grid_count(&self) -> usize {
        self.off_grid.load(Ordering::Relaxed)
    }

    /// Unclipped multiplier.
    pub fn raw(&self, j: usize, x: f64, t: f64) -> Result<f64> {
        Ok(match &self.kind {
            PolicyKind::Constant(l) => *l,
            PolicyKind::DpArgmax(slices) => {
                let (lam, inside) = slices.argmax_lambda(j.min(slices.horizon() - 1), x);
                if !inside {
                    self.off_grid.fetch_add(1, Ordering::Relaxed);
                }
                lam
            }
            PolicyKind::BangBang(pde) => {
                if !pde.contains(x) {
                    self.off_grid.fetch_add(1, Ordering::Relaxed);
                }
                let (lo, hi) = self.band.bounds(j)?;
                if pde.second_difference(t, x) > 0.0 {
                    hi
                } else {
                    lo
                }
            }
            PolicyKind::Custom(g) => g(j, x, t),
        })
    }

    /// Multiplier for step `j` at state `x` and time `t`, inside `[λ̲_j, λ̄_j]`.
    /// A NaN from the underlying rule is passed through for the caller to reject.
    pub fn lambda(&self, j: usize, x: f64, t: f64) -> Result<f64> {
        let raw = self.raw(j, x, t)?;
        let (lo, hi) = self.band.bounds(j)?;
        if raw < lo || raw > hi {
            self.clipped.fetch_add(1, Ordering::Relaxed);
            return Ok(raw.clamp(lo, hi));
        }
        Ok(raw)
    }
}

/// `λ_j = λ̄_j` where the solved field is locally convex at `(t_j, X_j)`,
/// `λ̲_j` otherwise, applied from `j = 0`.
pub fn bang_bang_policy(pde: Arc<PdeSolution>, band: UncertaintyBand) -> AdaptedPolicy {
    AdaptedPolicy::new(PolicyKind::BangBang(pde), band, "bang_bang")
}
