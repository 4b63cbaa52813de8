use serde::Serialize;

use super::{Interval, ModelSpec};
use crate::error::{invalid, Result};

/// Lindeberg thresholds reported when the caller does not choose any.
pub const DEFAULT_LINDEBERG_EPSILONS: [f64; 3] = [0.5, 0.1, 0.02];

/// `L_n(ε) = s_n⁻² Σ_{j≤n} E(ξ_j² 1{|ξ_j| > ε s_n})`, exact over atoms.
pub fn lindeberg_functional(spec: &ModelSpec, n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid(format!("Lindeberg epsilon must be positive, got {eps}")));
    }
    spec.check_n(n)?;
    let (sigmas, s_n) = spec.sigmas_and_scale(n)?;
    let threshold = eps * s_n;
    let mut total = 0.0;
    for sigma in sigmas {
        total += spec.noise.expect(|a| {
            let xi = sigma * a;
            if xi.abs() > threshold {
                xi * xi
            } else {
                0.0
            }
        });
    }
    Ok((total / (s_n * s_n)).clamp(0.0, 1.0))
}

/// `max_{j≤n} σ_j / s_n`.
pub fn feller_ratio(spec: &ModelSpec, n: usize) -> Result<f64> {
    spec.check_n(n)?;
    let (sigmas, s_n) = spec.sigmas_and_scale(n)?;
    Ok(sigmas.iter().copied().fold(0.0, f64::max) / s_n)
}

/// Hausdorff distance of two intervals: the larger endpoint deviation.
pub fn hausdorff_band_distance(b_j: Interval, b: Interval) -> Result<f64> {
    let b_j = Interval::new(b_j.lo, b_j.hi)?;
    let b = Interval::new(b.lo, b.hi)?;
    Ok((b_j.hi - b.hi).abs().max((b_j.lo - b.lo).abs()))
}

/// Returns `(M_n, Σ_j w_j d_H(B_j, B))` with weights `w_j = σ_{j+1}²/s_n²`.
pub fn stabilization_deficiency(spec: &ModelSpec, n: usize) -> Result<(f64, f64)> {
    spec.check_n(n)?;
    let (sigmas, s_n) = spec.sigmas_and_scale(n)?;
    let limit = spec.band.limit_interval().squared();
    let s2 = s_n * s_n;
    let mut m_n = 0.0;
    let mut hausdorff = 0.0;
    for (j, sigma) in sigmas.iter().enumerate() {
        let w = sigma * sigma / s2;
        let b_j = spec.band.interval(j)?.squared();
        let (d_hi, d_lo) = ((b_j.hi - limit.hi).abs(), (b_j.lo - limit.lo).abs());
        m_n += w * (d_hi + d_lo);
        hausdorff += w * d_hi.max(d_lo);
    }
    Ok((m_n, hausdorff))
}

/// `Σ p_i a_i / Σ p_i`.
pub fn riesz_mean(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(invalid("Riesz mean needs equal-length, nonempty lists"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(invalid(format!("Riesz weights must be positive, got {w}")));
    }
    let num: f64 = values.iter().zip(weights).map(|(a, p)| a * p).sum();
    let den: f64 = weights.iter().sum();
    Ok(num / den)
}

/// Returns `(max_{i≤n} λ̄_{i-1}^{2+δ} E|ξ_i/σ_i|^{2+δ}, Σ_{j≤n} (σ_j/s_n)^{2+δ})`.
pub fn moment_conditions(spec: &ModelSpec, n: usize, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(invalid(format!("moment exponent delta must be positive, got {delta}")));
    }
    spec.check_n(n)?;
    let q = 2.0 + delta;
    let moment = spec.noise.abs_moment(q);
    let mut sup_moment: f64 = 0.0;
    for i in 1..=n {
        let (_, hi) = spec.band.bounds(i - 1)?;
        sup_moment = sup_moment.max(hi.powf(q) * moment);
    }
    let (sigmas, s_n) = spec.sigmas_and_scale(n)?;
    let tail_sum = sigmas.iter().map(|s| (s / s_n).powf(q)).sum();
    Ok((sup_moment, tail_sum))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    /// `(ε, L_n(ε))` pairs.
    pub lindeberg: Vec<(f64, f64)>,
    pub feller: f64,
    pub stabilization: f64,
    pub hausdorff_form: f64,
    pub moment_sup: f64,
    pub moment_sum: f64,
    pub uniform_bound: f64,
}

pub fn condition_report(spec: &ModelSpec, n: usize, epsilons: &[f64], delta: f64) -> Result<ConditionReport> {
    let lindeberg = epsilons
        .iter()
        .map(|&e| Ok((e, lindeberg_functional(spec, n, e)?)))
        .collect::<Result<Vec<_>>>()?;
    let (stabilization, hausdorff_form) = stabilization_deficiency(spec, n)?;
    let (moment_sup, moment_sum) = moment_conditions(spec, n, delta)?;
    Ok(ConditionReport {
        n,
        lindeberg,
        feller: feller_ratio(spec, n)?,
        stabilization,
        hausdorff_form,
        moment_sup,
        moment_sum,
        uniform_bound: spec.band.uniform_bound(),
    })
}

/// Thresholds for the verdict flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictRule {
    /// Number of trailing transitions that must decrease.
    pub window: usize,
    /// Values at or below this count as already converged.
    pub zero_tol: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self { window: 3, zero_tol: 1e-12 }
    }
}

impl VerdictRule {
    /// True when the trailing `window` transitions each decrease strictly or
    /// land at or below `zero_tol`.
    pub fn decreasing_tail(&self, values: &[f64]) -> bool {
        if values.len() < 2 {
            return values.last().is_some_and(|v| *v <= self.zero_tol);
        }
        let start = values.len().saturating_sub(self.window + 1);
        values[start..]
            .windows(2)
            .all(|w| w[1] <= self.zero_tol || w[1] < w[0])
    }
}

/// `true` means the sequence behaves as the assumption requires.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    /// One flag per Lindeberg epsilon.
    pub lindeberg: Vec<bool>,
    pub feller: bool,
    pub bounded: bool,
    pub stabilization: bool,
    pub moment_sum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSweep {
    pub reports: Vec<ConditionReport>,
    pub verdicts: Verdicts,
}

/// Evaluates all checkers over `n_list` (sorted ascending) and derives
/// verdict flags from the trailing behaviour of each sequence.
pub fn condition_sweep(
    spec: &ModelSpec,
    n_list: &[usize],
    epsilons: &[f64],
    delta: f64,
    rule: VerdictRule,
) -> Result<ConditionSweep> {
    if n_list.is_empty() {
        return Err(invalid("condition sweep needs at least one n"));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let reports = ns
        .iter()
        .map(|&n| condition_report(spec, n, epsilons, delta))
        .collect::<Result<Vec<_>>>()?;

    let column = |get: &dyn Fn(&ConditionReport) -> f64| reports.iter().map(get).collect::<Vec<_>>();
    let lindeberg = (0..epsilons.len())
        .map(|k| rule.decreasing_tail(&column(&|r| r.lindeberg[k].1)))
        .collect();
    let verdicts = Verdicts {
        lindeberg,
        feller: rule.decreasing_tail(&column(&|r| r.feller)),
        bounded: spec.band.uniform_bound().is_finite(),
        stabilization: rule.decreasing_tail(&column(&|r| r.stabilization)),
        moment_sum: rule.decreasing_tail(&column(&|r| r.moment_sum)),
    };
    Ok(ConditionSweep { reports, verdicts })
}
