//! Monotone explicit finite differences for the G-heat equation
//!
//! ```text
//! v_t + G(v_xx) = 0 on [0, 1) x R,   v(1, x) = f(x),
//! G(s) = (λ̄² s⁺ - λ̲² s⁻) / 2.
//! ```
//!
//! Marching backward from `t = 1`,
//! `v(t - Δt, x_i) = v(t, x_i) + Δt G(D²v(t, x_i))` with the central second
//! difference `D²`. Under `Δt λ̄² / Δx² <= 1` every update is a nondecreasing
//! function of the three stencil values, so the scheme is monotone, stable in
//! the sup norm and consistent, and converges to the viscosity solution.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::TerminalFunction;
use crate::quadrature::GaussHermite;

/// Spatial nodes per time step above which a step is split across workers.
const PARALLEL_MIN_NODES: usize = 4096;
const CHUNK: usize = 1024;

/// `G(s) = ½(λ̄² s⁺ − λ̲² s⁻)`.
#[inline]
pub fn g_function(s: f64, lower: f64, upper: f64) -> f64 {
    0.5 * (upper * upper * s.max(0.0) - lower * lower * (-s).max(0.0))
}

/// `ψ_ε(λ) = √(λ² + ε²) − λ`, evaluated without cancellation.
pub fn psi_epsilon(lambda: f64, eps: f64) -> f64 {
    let r = (lambda * lambda + eps * eps).sqrt();
    eps * eps / (r + lambda)
}

/// `E f(√variance · Z)` for standard normal `Z`, by the 64-node
/// Gauss–Hermite rule ([`crate::quadrature::DEFAULT_NODES`]).
pub fn gaussian_expectation(f: &TerminalFunction, variance: f64) -> Result<f64> {
    gaussian_expectation_with(GaussHermite::standard(), f, variance)
}

pub fn gaussian_expectation_with(rule: &GaussHermite, f: &TerminalFunction, variance: f64) -> Result<f64> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(invalid(format!("variance must be nonnegative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(f.eval(0.0));
    }
    let sd = variance.sqrt();
    Ok(rule.expect(|z| f.eval(sd * z)))
}

#[derive(Debug, Clone)]
pub struct GheatProblem {
    pub lower: f64,
    pub upper: f64,
    pub terminal: TerminalFunction,
}

impl GheatProblem {
    pub fn new(lower: f64, upper: f64, terminal: TerminalFunction) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 || lower > upper {
            return Err(invalid(format!("need 0 <= lower <= upper, got [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper, terminal })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Boundary columns keep the terminal value `f(±X)`.
    DirichletTerminal,
    /// Boundary columns are linearly extrapolated from the two nearest
    /// interior nodes after each step. Not monotone.
    LinearExtrapolation,
}

/// Which time slices a solve keeps. `t = 0` and `t = 1` are always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceRetention {
    Endpoints,
    All,
    /// Roughly this many evenly spaced slices.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeGrid {
    pub half_width: f64,
    pub dx: f64,
    /// CFL fraction `θ`; `Δt <= θ Δx² / λ̄²`.
    pub theta: f64,
    pub boundary: BoundaryMode,
    /// Forces the step count instead of deriving it from `θ`.
    pub time_steps: Option<usize>,
    pub retention: SliceRetention,
}

impl PdeGrid {
    pub fn new(half_width: f64, dx: f64) -> Self {
        Self {
            half_width,
            dx,
            theta: 0.5,
            boundary: BoundaryMode::DirichletTerminal,
            time_steps: None,
            retention: SliceRetention::Endpoints,
        }
    }

    /// Default truncation `X = |x_eval| + 6 λ̄ + 2`.
    pub fn default_half_width(upper: f64, x_eval: f64) -> f64 {
        x_eval.abs() + 6.0 * upper + 2.0
    }

    pub fn for_band(upper: f64, dx: f64) -> Self {
        Self::new(Self::default_half_width(upper, 0.0), dx)
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryMode) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_time_steps(mut self, steps: usize) -> Self {
        self.time_steps = Some(steps);
        self
    }

    pub fn with_retention(mut self, retention: SliceRetention) -> Self {
        self.retention = retention;
        self
    }

    /// Nodes on one side of zero; the grid is `x_i = (i - N) Δx`, `i = 0..=2N`.
    pub fn half_nodes(&self) -> Result<usize> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Configuration(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::Configuration(format!("half_width must be positive, got {}", self.half_width)));
        }
        let n = (self.half_width / self.dx - 1e-9).ceil().max(2.0);
        Ok(n as usize)
    }

    /// Number of time steps on `[0, 1]` for diffusion bound `upper`.
    pub fn time_steps_for(&self, upper: f64) -> Result<usize> {
        let steps = match self.time_steps {
            Some(0) => return Err(Error::Configuration("time_steps must be positive".into())),
            Some(k) => k,
            None => {
                if !(self.theta > 0.0 && self.theta <= 1.0) {
                    return Err(Error::Configuration(format!(
                        "CFL fraction theta must lie in (0, 1], got {}",
                        self.theta
                    )));
                }
                if upper == 0.0 {
                    1
                } else {
                    (upper * upper / (self.theta * self.dx * self.dx) - 1e-9).ceil().max(1.0) as usize
                }
            }
        };
        let dt = 1.0 / steps as f64;
        let ratio = dt * upper * upper / (self.dx * self.dx);
        if ratio > 1.0 + 1e-12 {
            return Err(Error::Configuration(format!(
                "CFL violated: dt * upper^2 / dx^2 = {ratio} > 1 (dt = {dt}, dx = {})",
                self.dx
            )));
        }
        Ok(steps)
    }
}

/// Coefficients of one explicit step.
#[derive(Debug, Clone, Copy)]
pub struct StepCoefficients {
    /// `Δt / Δx²`.
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

impl StepCoefficients {
    #[inline]
    fn update(&self, left: f64, mid: f64, right: f64) -> f64 {
        let d2 = right - 2.0 * mid + left;
        mid + self.ratio * g_function(d2, self.lower, self.upper)
    }

    /// `Δt λ̄² / Δx² <= 1`.
    pub fn is_monotone(&self) -> bool {
        self.ratio * self.upper * self.upper <= 1.0 + 1e-12
    }
}

/// One backward step from `current` into `next` (same length, at least 3).
///
/// Interior nodes are independent, so the result does not depend on how
/// the work is split.
pub fn explicit_step(current: &[f64], next: &mut [f64], coeffs: StepCoefficients, boundary: BoundaryMode) {
    let len = current.len();
    assert!(len >= 3 && next.len() == len, "explicit_step needs matching slices of length >= 3");
    let interior = &mut next[1..len - 1];
    if len >= PARALLEL_MIN_NODES {
        interior.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK + 1;
            for (k, out) in chunk.iter_mut().enumerate() {
                let i = base + k;
                *out = coeffs.update(current[i - 1], current[i], current[i + 1]);
            }
        });
    } else {
        for (k, out) in interior.iter_mut().enumerate() {
            let i = k + 1;
            *out = coeffs.update(current[i - 1], current[i], current[i + 1]);
        }
    }
    match boundary {
        BoundaryMode::DirichletTerminal => {
            next[0] = current[0];
            next[len - 1] = current[len - 1];
        }
        BoundaryMode::LinearExtrapolation => {
            next[0] = 2.0 * next[1] - next[2];
            next[len - 1] = 2.0 * next[len - 2] - next[len - 3];
        }
    }
}

/// Grid values of `v` at the retained times.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    half_nodes: usize,
    dx: f64,
    steps: usize,
    /// `(time index k, values)` with `t_k = k / steps`, ascending in `k`.
    slices: Vec<(usize, Vec<f64>)>,
    pub lower: f64,
    pub upper: f64,
    pub epsilon: Option<f64>,
    pub terminal_label: String,
    pub boundary: BoundaryMode,
}

impl PdeSolution {
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn half_width(&self) -> f64 {
        self.half_nodes as f64 * self.dx
    }

    pub fn time_steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn node_count(&self) -> usize {
        2 * self.half_nodes + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.half_nodes as f64) * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.node(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x.abs() <= self.half_width() + 1e-12
    }

    /// Retained times, ascending.
    pub fn slice_times(&self) -> Vec<f64> {
        self.slices.iter().map(|(k, _)| *k as f64 / self.steps as f64).collect()
    }

    /// The `t = 0` slice.
    pub fn initial_slice(&self) -> &[f64] {
        &self.slices[0].1
    }

    pub fn terminal_slice(&self) -> &[f64] {
        &self.slices[self.slices.len() - 1].1
    }

    /// `v(0, 0)`; the origin is a grid node.
    pub fn value_at_origin(&self) -> f64 {
        self.initial_slice()[self.half_nodes]
    }

    /// Nearest retained slice at or after `t`.
    pub fn slice_at(&self, t: f64) -> (f64, &[f64]) {
        let k_min = (t.clamp(0.0, 1.0) * self.steps as f64 - 1e-9).ceil().max(0.0) as usize;
        let idx = self.slices.partition_point(|(k, _)| *k < k_min).min(self.slices.len() - 1);
        let (k, values) = &self.slices[idx];
        (*k as f64 / self.steps as f64, values)
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let pos = (x / self.dx + self.half_nodes as f64).clamp(0.0, (self.node_count() - 1) as f64);
        let i = (pos.floor() as usize).min(self.node_count() - 2);
        (i, pos - i as f64)
    }

    /// `v(t, x)`: slice at or after `t`, linear in `x`, held constant
    /// beyond the grid edges.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        let (_, slice) = self.slice_at(t);
        let (i, w) = self.locate(x);
        (1.0 - w) * slice[i] + w * slice[i + 1]
    }

    /// Central second difference at node `i` of `slice`, zero on boundary columns.
    fn node_second_difference(&self, slice: &[f64], i: usize) -> f64 {
        if i == 0 || i + 1 >= slice.len() {
            0.0
        } else {
            (slice[i + 1] - 2.0 * slice[i] + slice[i - 1]) / (self.dx * self.dx)
        }
    }

    /// `D²v(t, x)` interpolated linearly between nodes; zero outside the
    /// grid and on the boundary columns.
    pub fn second_difference(&self, t: f64, x: f64) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let (_, slice) = self.slice_at(t);
        let (i, w) = self.locate(x);
        let a = self.node_second_difference(slice, i);
        let b = self.node_second_difference(slice, i + 1);
        (1.0 - w) * a + w * b
    }

    /// Rows `(t, x, v)` for every retained slice (or only `t = 0`).
    pub fn rows(&self, full_field: bool) -> Vec<(f64, f64, f64)> {
        let take = if full_field { self.slices.len() } else { 1 };
        let mut rows = Vec::with_capacity(take * self.node_count());
        for (k, values) in self.slices.iter().take(take) {
            let t = *k as f64 / self.steps as f64;
            for (i, v) in values.iter().enumerate() {
                rows.push((t, self.node(i), *v));
            }
        }
        rows
    }
}

fn retained(retention: SliceRetention, k: usize, steps: usize) -> bool {
    if k == 0 || k == steps {
        return true;
    }
    match retention {
        SliceRetention::Endpoints => false,
        SliceRetention::All => true,
        SliceRetention::Count(m) => {
            let stride = (steps / m.max(1)).max(1);
            k % stride == 0
        }
    }
}

/// Solves the terminal-value problem on `grid`.
pub fn solve(problem: &GheatProblem, grid: &PdeGrid) -> Result<PdeSolution> {
    let problem = GheatProblem::new(problem.lower, problem.upper, problem.terminal.clone())?;
    let half = grid.half_nodes()?;
    let steps = grid.time_steps_for(problem.upper)?;
    let dt = 1.0 / steps as f64;
    let coeffs = StepCoefficients { ratio: dt / (grid.dx * grid.dx), lower: problem.lower, upper: problem.upper };
    let len = 2 * half + 1;
    let node = |i: usize| (i as f64 - half as f64) * grid.dx;

    let mut current: Vec<f64> = (0..len).map(|i| problem.terminal.eval(node(i))).collect();
    check_finite(&current, 1.0, &node)?;
    let mut next = vec![0.0; len];
    let mut slices = Vec::new();
    if retained(grid.retention, steps, steps) {
        slices.push((steps, current.clone()));
    }
    for k in (0..steps).rev() {
        explicit_step(&current, &mut next, coeffs, grid.boundary);
        std::mem::swap(&mut current, &mut next);
        check_finite(&current, k as f64 * dt, &node)?;
        if retained(grid.retention, k, steps) {
            slices.push((k, current.clone()));
        }
    }
    slices.reverse();

    Ok(PdeSolution {
        half_nodes: half,
        dx: grid.dx,
        steps,
        slices,
        lower: problem.lower,
        upper: problem.upper,
        epsilon: None,
        terminal_label: problem.terminal.label().to_string(),
        boundary: grid.boundary,
    })
}

fn check_finite(values: &[f64], t: f64, node: &dyn Fn(usize) -> f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NumericalFailure { index, t, x: node(index), value: values[index] }),
        None => Ok(()),
    }
}

/// Solves the problem with band `[√(λ̲² + ε²), √(λ̄² + ε²)]` (for `λ̲ = 0`
/// this is `[ε, √(λ̄² + ε²)]`). `ε = 0` is plain [`solve`]. The time step is
/// recomputed for the enlarged upper bound unless the grid forces one.
pub fn vanishing_viscosity_solve(problem: &GheatProblem, eps: f64, grid: &PdeGrid) -> Result<PdeSolution> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(invalid(format!("viscosity epsilon must be nonnegative, got {eps}")));
    }
    if eps == 0.0 {
        return solve(problem, grid);
    }
    let lifted = GheatProblem::new(
        (problem.lower * problem.lower + eps * eps).sqrt(),
        (problem.upper * problem.upper + eps * eps).sqrt(),
        problem.terminal.clone(),
    )?;
    let mut solution = solve(&lifted, grid)?;
    solution.epsilon = Some(eps);
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g_function_examples() {
        assert_eq!(g_function(0.0, 1.0, 2.0), 0.0);
        assert_eq!(g_function(1.0, 0.0, 2.0), 2.0);
        assert_eq!(g_function(-2.0, 1.0, 2.0), -1.0);
    }

    proptest! {
        #[test]
        fn g_is_sublinear_and_homogeneous(a in -5.0..5.0f64, b in -5.0..5.0f64, c in 0.0..3.0f64,
                                          lo in 0.0..1.0f64, extra in 0.0..1.0f64) {
            let hi = lo + extra;
            prop_assert!(g_function(a + b, lo, hi) <= g_function(a, lo, hi) + g_function(b, lo, hi) + 1e-12);
            prop_assert!((g_function(c * a, lo, hi) - c * g_function(a, lo, hi)).abs() < 1e-12);
            if a <= b {
                prop_assert!(g_function(a, lo, hi) <= g_function(b, lo, hi));
            }
        }
    }

    #[test]
    fn psi_examples() {
        assert!((psi_epsilon(0.0, 0.3) - 0.3).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let v = psi_epsilon(k as f64 * 0.5, 1.0);
            assert!(v < prev && v > 0.0 && v <= 1.0);
            prev = v;
        }
        assert!((psi_epsilon(10.0, 0.1) - (100.01f64.sqrt() - 10.0)).abs() < 1e-15);
        assert!((psi_epsilon(10.0, 0.1) - 0.0005).abs() < 1e-7);
    }

    #[test]
    fn gaussian_expectation_cases() {
        let c = TerminalFunction::constant(0.37);
        assert!((gaussian_expectation(&c, 2.0).unwrap() - 0.37).abs() < 1e-15);
        let f = TerminalFunction::gaussian_bump();
        assert_eq!(gaussian_expectation(&f, 0.0).unwrap(), 1.0);
        // E exp(-Z²) = 1/√3
        assert!((gaussian_expectation(&f, 1.0).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(gaussian_expectation(&f, -1.0).is_err());
        let cos = TerminalFunction::cos();
        let a = gaussian_expectation(&cos, 1.0).unwrap();
        let b = gaussian_expectation_with(&GaussHermite::new(40).unwrap(), &cos, 1.0).unwrap();
        assert!((a - (-0.5f64).exp()).abs() < 1e-14 && (a - b).abs() < 1e-14);
    }

    #[test]
    fn grid_geometry() {
        let g = PdeGrid::new(8.0, 0.01);
        assert_eq!(g.half_nodes().unwrap(), 800);
        assert_eq!(g.time_steps_for(1.0).unwrap(), 20000);
        assert!(PdeGrid::new(8.0, 0.01).with_theta(1.5).time_steps_for(1.0).is_err());
        assert!(PdeGrid::new(8.0, 0.01).with_time_steps(100).time_steps_for(1.0).is_err());
        assert_eq!(PdeGrid::new(8.0, 0.1).time_steps_for(0.0).unwrap(), 1);
        assert!(PdeGrid::new(-1.0, 0.1).half_nodes().is_err());
    }

    #[test]
    fn constants_are_preserved() {
        let p = GheatProblem::new(0.3, 1.4, TerminalFunction::constant(0.25)).unwrap();
        let sol = solve(&p, &PdeGrid::new(4.0, 0.05)).unwrap();
        assert!(sol.initial_slice().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn degenerate_band_keeps_terminal() {
        let p = GheatProblem::new(0.0, 0.0, TerminalFunction::cos()).unwrap();
        let sol = solve(&p, &PdeGrid::new(4.0, 0.05)).unwrap();
        for (i, v) in sol.initial_slice().iter().enumerate() {
            assert_eq!(*v, sol.node(i).cos());
        }
    }

    #[test]
    fn classical_heat_matches_closed_form() {
        let p = GheatProblem::new(1.0, 1.0, TerminalFunction::cos()).unwrap();
        let sol = solve(&p, &PdeGrid::new(8.0, 0.02)).unwrap();
        assert!((sol.value_at_origin() - (-0.5f64).exp()).abs() < 1e-3);
        assert_eq!(sol.terminal_slice()[0], 8f64.cos());
    }

    #[test]
    fn nonfinite_terminal_is_reported() {
        let f = TerminalFunction::custom("blowup", None, None, |x| if x > 1.0 { f64::NAN } else { 0.0 });
        let p = GheatProblem::new(0.5, 1.0, f).unwrap();
        match solve(&p, &PdeGrid::new(2.0, 0.5)) {
            Err(Error::NumericalFailure { x, .. }) => assert!(x > 1.0),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn slice_selection_is_at_or_after() {
        let p = GheatProblem::new(0.5, 1.0, TerminalFunction::cos()).unwrap();
        let grid = PdeGrid::new(4.0, 0.1).with_retention(SliceRetention::Count(10));
        let sol = solve(&p, &grid).unwrap();
        let times = sol.slice_times();
        assert_eq!(times[0], 0.0);
        assert_eq!(*times.last().unwrap(), 1.0);
        for &t in &[0.0, 0.05, 0.33, 0.5, 0.99, 1.0] {
            let (ts, _) = sol.slice_at(t);
            assert!(ts >= t - 1e-12);
            assert!(times.iter().filter(|&&s| s >= t - 1e-12).all(|&s| s >= ts));
        }
    }

    #[test]
    fn second_difference_boundary_is_zero() {
        let p = GheatProblem::new(0.5, 1.0, TerminalFunction::cos()).unwrap();
        let sol = solve(&p, &PdeGrid::new(4.0, 0.1)).unwrap();
        assert_eq!(sol.second_difference(0.0, sol.half_width()), 0.0);
        assert_eq!(sol.second_difference(0.0, 100.0), 0.0);
        assert!(sol.second_difference(0.0, std::f64::consts::PI) > 0.0);
        assert!(sol.second_difference(0.0, 0.0) < 0.0);
    }

    #[test]
    fn viscosity_zero_is_plain_solve() {
        let p = GheatProblem::new(0.4, 1.0, TerminalFunction::cos()).unwrap();
        let grid = PdeGrid::new(6.0, 0.05);
        let a = solve(&p, &grid).unwrap();
        let b = vanishing_viscosity_solve(&p, 0.0, &grid).unwrap();
        assert_eq!(a.initial_slice(), b.initial_slice());
        assert!(vanishing_viscosity_solve(&p, -0.1, &grid).is_err());
    }

    #[test]
    fn viscosity_values_stay_in_range() {
        let p = GheatProblem::new(0.0, 1.0, TerminalFunction::cos()).unwrap();
        let grid = PdeGrid::new(8.0, 0.02);
        let a = vanishing_viscosity_solve(&p, 0.4, &grid).unwrap().value_at_origin();
        let b = vanishing_viscosity_solve(&p, 0.05, &grid).unwrap().value_at_origin();
        assert!((a - b).abs() > 0.0);
        for v in [a, b] {
            assert!((-1.0..=1.0).contains(&v));
        }
    }
}
