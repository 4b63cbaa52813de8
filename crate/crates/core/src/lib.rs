//! Numerical workbench for the central limit theorem under variance
//! uncertainty.
//!
//! The worst-case limit
//! `L = lim_n sup_λ E f((1/s_n) Σ λ_j ξ_{j+1})` is computed three ways:
//!
//! * [`control`]: backward-induction dynamic programming over adapted
//!   multiplier sequences, plus exact tree and brute-force oracles;
//! * [`montecarlo`]: simulation of the perturbed partial sums under explicit
//!   policies;
//! * [`gheat`]: a monotone explicit finite-difference solver for the G-heat
//!   (Barenblatt) equation `v_t + G(v_xx) = 0`, `v(1, ·) = f`.
//!
//! [`model`] holds the stochastic model and the hypothesis checkers,
//! [`mollify`] the smoothing and cutoff used to pass from smooth to merely
//! bounded continuous terminal data, and [`cli`] the experiment
//! orchestration behind the `gclt` binary.

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod gheat;
pub mod model;
pub mod mollify;
pub mod montecarlo;
pub mod quadrature;

pub use error::{Error, Result};
