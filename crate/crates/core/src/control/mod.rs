//! Finite-n worst case `sup_λ E f((1/s_n) Σ λ_j ξ_{j+1})` by backward
//! induction, exact small-instance oracles, and the policies fed to Monte
//! Carlo.
//!
//! Adaptedness is represented by Markov feedback in `(j, X_j)`. The
//! history-dependent brute force in [`enumerate_policies_value`] checks that
//! nothing is lost by this on small instances.

mod dp;
mod oracle;
mod policy;

pub use dp::{dp_value, DpGrid, DpProblem, DpSolution, ValueSlices};
pub use oracle::{
    enumerate_policies_value, tree_dp_value, DEFAULT_ENUMERATION_BUDGET, DEFAULT_TREE_BUDGET,
};
pub use policy::{bang_bang_policy, AdaptedPolicy, PolicyKind};

use crate::error::{invalid, Result};
use crate::model::ModelSpec;

/// Candidate multipliers searched at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateRule {
    EndpointsOnly,
    /// `K >= 2` equally spaced values including both endpoints.
    LambdaGrid(usize),
}

impl Default for CandidateRule {
    fn default() -> Self {
        CandidateRule::LambdaGrid(21)
    }
}

impl CandidateRule {
    /// Ascending candidates in `[lo, hi]`; a degenerate band yields one value.
    pub fn candidates(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if !(lo <= hi) {
            return Err(invalid(format!("empty multiplier band [{lo}, {hi}]")));
        }
        let k = match *self {
            CandidateRule::EndpointsOnly => 2,
            CandidateRule::LambdaGrid(k) if k >= 2 => k,
            CandidateRule::LambdaGrid(k) => {
                return Err(invalid(format!("lambda_grid needs K >= 2, got {k}")));
            }
        };
        if lo == hi {
            return Ok(vec![lo]);
        }
        let mut out: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
        out[k - 1] = hi;
        Ok(out)
    }

    pub fn describe(&self) -> String {
        match self {
            CandidateRule::EndpointsOnly => "endpoints_only".into(),
            CandidateRule::LambdaGrid(k) => format!("lambda_grid({k})"),
        }
    }
}

/// `t_0 = 0`, `t_j = Σ_{k≤j} σ_k² / s_n²` (taking `σ_0 = 0`), `t_n = 1`.
pub fn time_grid(spec: &ModelSpec, n: usize) -> Result<Vec<f64>> {
    spec.check_n(n)?;
    let (sigmas, s_n) = spec.sigmas_and_scale(n)?;
    let s2 = s_n * s_n;
    let mut times = Vec::with_capacity(n + 1);
    times.push(0.0);
    let mut acc = 0.0;
    for s in &sigmas {
        acc += s * s;
        times.push(acc / s2);
    }
    times[n] = 1.0;
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoiseDistribution, UncertaintyBand, VarianceSequence};

    #[test]
    fn time_grid_examples() {
        let equal = ModelSpec::new(
            NoiseDistribution::rademacher(),
            VarianceSequence::Constant(2.0),
            UncertaintyBand::constant(1.0, 1.0).unwrap(),
            4,
        )
        .unwrap();
        assert_eq!(time_grid(&equal, 4).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let explicit = ModelSpec::new(
            NoiseDistribution::rademacher(),
            VarianceSequence::Explicit(vec![3.0, 4.0]),
            UncertaintyBand::constant(1.0, 1.0).unwrap(),
            2,
        )
        .unwrap();
        assert_eq!(time_grid(&explicit, 2).unwrap(), vec![0.0, 9.0 / 25.0, 1.0]);

        let power = ModelSpec::new(
            NoiseDistribution::rademacher(),
            VarianceSequence::Power(0.7),
            UncertaintyBand::constant(1.0, 1.0).unwrap(),
            37,
        )
        .unwrap();
        let t = time_grid(&power, 37).unwrap();
        assert_eq!(t[37], 1.0);
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn candidate_rules() {
        assert_eq!(CandidateRule::LambdaGrid(3).candidates(0.5, 1.5).unwrap(), vec![0.5, 1.0, 1.5]);
        assert_eq!(CandidateRule::EndpointsOnly.candidates(0.2, 0.9).unwrap(), vec![0.2, 0.9]);
        assert_eq!(CandidateRule::LambdaGrid(5).candidates(1.0, 1.0).unwrap(), vec![1.0]);
        assert!(CandidateRule::LambdaGrid(1).candidates(0.0, 1.0).is_err());
        let c = CandidateRule::LambdaGrid(21).candidates(0.8, 1.2).unwrap();
        assert_eq!((c[0], c[20]), (0.8, 1.2));
    }
}
