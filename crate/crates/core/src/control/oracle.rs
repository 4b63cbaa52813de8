use rayon::prelude::*;

use super::DpProblem;
use crate::error::{Error, Result};

/// Default cap on the number of leaf evaluations in [`tree_dp_value`].
pub const DEFAULT_TREE_BUDGET: f64 = 1e5;
/// Default cap on the number of policies in [`enumerate_policies_value`].
pub const DEFAULT_ENUMERATION_BUDGET: f64 = 1e6;

struct Steps {
    /// Per step `j`, per candidate: `(shift, p)` for each atom.
    moves: Vec<Vec<Vec<(f64, f64)>>>,
}

fn steps(problem: &DpProblem) -> Result<Steps> {
    let spec = &problem.spec;
    spec.validate()?;
    let (sigmas, s_n) = spec.sigmas_and_scale(spec.horizon)?;
    let table = problem.candidate_table()?;
    let moves = table
        .iter()
        .enumerate()
        .map(|(j, cands)| {
            cands
                .iter()
                .map(|&lam| spec.noise.atoms().iter().map(|&(a, p)| (lam * sigmas[j] * a / s_n, p)).collect())
                .collect()
        })
        .collect();
    Ok(Steps { moves })
}

fn tree_value(problem: &DpProblem, steps: &Steps, j: usize, x: f64) -> f64 {
    if j == steps.moves.len() {
        return problem.terminal.eval(x);
    }
    let mut best = f64::NEG_INFINITY;
    for mv in &steps.moves[j] {
        let mut acc = 0.0;
        for &(shift, p) in mv {
            acc += p * tree_value(problem, steps, j + 1, x + shift);
        }
        if acc >= best {
            best = acc;
        }
    }
    best
}

/// Exact Markov-feedback optimum on the reachable-state tree, with no
/// spatial grid. `budget` caps `Π_j K_j m` leaf evaluations.
pub fn tree_dp_value(problem: &DpProblem, budget: f64) -> Result<f64> {
    let steps = steps(problem)?;
    let m = problem.spec.noise.len() as f64;
    let required: f64 = steps.moves.iter().map(|c| c.len() as f64 * m).product();
    if required > budget {
        return Err(Error::ResourceLimit { what: "tree evaluations", required, budget });
    }
    Ok(tree_value(problem, &steps, 0, 0.0))
}

/// Exact supremum over history-dependent policies on the candidate sets.
///
/// A policy assigns a candidate to every outcome prefix, so the count is
/// `Π_j K_j^{m^j}`; `budget` caps it.
pub fn enumerate_policies_value(problem: &DpProblem, budget: f64) -> Result<f64> {
    let steps = steps(problem)?;
    let n = steps.moves.len();
    let m = problem.spec.noise.len();

    // Decision nodes, depth-major: node (j, prefix) sits at offsets[j] + prefix.
    let mut offsets = Vec::with_capacity(n + 1);
    let mut radix = Vec::new();
    let mut width = 1usize;
    let mut required = 1.0f64;
    for mv in &steps.moves {
        offsets.push(radix.len());
        required *= (mv.len() as f64).powf(width as f64);
        if required > budget {
            return Err(Error::ResourceLimit { what: "policy enumeration", required, budget });
        }
        radix.extend(std::iter::repeat(mv.len()).take(width));
        width *= m;
    }
    let count = required as usize;

    let eval = |choice: &[usize]| {
        fn walk(steps: &Steps, f: &crate::model::TerminalFunction, offsets: &[usize], choice: &[usize], m: usize, j: usize, prefix: usize, x: f64) -> f64 {
            if j == steps.moves.len() {
                return f.eval(x);
            }
            let mut acc = 0.0;
            for (k, &(shift, p)) in steps.moves[j][choice[offsets[j] + prefix]].iter().enumerate() {
                acc += p * walk(steps, f, offsets, choice, m, j + 1, prefix * m + k, x + shift);
            }
            acc
        }
        walk(&steps, &problem.terminal, &offsets, choice, m, 0, 0, 0.0)
    };

    let best = (0..count)
        .into_par_iter()
        .with_min_len(1024)
        .map_init(
            || vec![0usize; radix.len()],
            |choice, mut idx| {
                for (c, &r) in choice.iter_mut().zip(&radix) {
                    *c = idx % r;
                    idx /= r;
                }
                eval(choice)
            },
        )
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best)
}
