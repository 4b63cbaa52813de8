//! Gauss–Hermite rules for the standard normal law.
//!
//! Nodes and weights come from the Golub–Welsch eigenproblem for the
//! probabilists' Hermite recurrence `He_{k+1} = x He_k - k He_{k-1}`, then
//! get one Newton polish each on the three-term recurrence. The rule with
//! `m` nodes integrates polynomials of degree `2m - 1` exactly against the
//! standard normal density.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

/// Node count used by [`crate::gheat::gaussian_expectation`].
pub const DEFAULT_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    /// Probability weights; they sum to one.
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("Gauss-Hermite rule needs at least one node"));
        }
        if m == 1 {
            return Ok(Self { nodes: vec![0.0], weights: vec![1.0] });
        }

        let mut jacobi = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut nodes: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        for x in nodes.iter_mut() {
            *x = newton_polish(*x, m);
        }
        // Symmetrize so odd moments vanish to rounding.
        for i in 0..m / 2 {
            let r = 0.5 * (nodes[m - 1 - i] - nodes[i]);
            nodes[i] = -r;
            nodes[m - 1 - i] = r;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }

        // w_i = 1 / sum_k He_k(x_i)^2 / k!, computed with normalized polynomials.
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let mut p_prev = 0.0;
                let mut p = 1.0;
                let mut sum = 1.0;
                for k in 1..m {
                    let kf = k as f64;
                    let next = (x * p - (kf - 1.0).sqrt() * p_prev) / kf.sqrt();
                    p_prev = p;
                    p = next;
                    sum += p * p;
                }
                1.0 / sum
            })
            .collect();
        for i in 0..m / 2 {
            let w = 0.5 * (weights[i] + weights[m - 1 - i]);
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        Ok(Self { nodes, weights })
    }

    /// Shared 64-node rule.
    pub fn standard() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_NODES).expect("64-node rule"))
    }

    /// `E g(Z)` for standard normal `Z`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

// Normalized recurrence: h_k = He_k / sqrt(k!), so h_m(x) = 0 at the nodes
// and h_m' = sqrt(m) h_{m-1}.
fn newton_polish(mut x: f64, m: usize) -> f64 {
    for _ in 0..2 {
        let mut p_prev = 0.0;
        let mut p = 1.0;
        for k in 1..=m {
            let kf = k as f64;
            let next = (x * p - (kf - 1.0).sqrt() * p_prev) / kf.sqrt();
            p_prev = p;
            p = next;
        }
        let deriv = (m as f64).sqrt() * p_prev;
        if deriv == 0.0 || !deriv.is_finite() {
            break;
        }
        let step = p / deriv;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}
