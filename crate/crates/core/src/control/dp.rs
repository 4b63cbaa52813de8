use rayon::prelude::*;

use super::{time_grid, CandidateRule};
use crate::error::{invalid, Error, Result};
use crate::model::{ModelSpec, TerminalFunction};

/// Spatial grid for the DP: nodes `x = m Δx` for integer `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpGrid {
    pub dx: f64,
    /// `None` sizes the grid to the reachable cone, so no query ever leaves it.
    pub half_width: Option<f64>,
    /// Linear extrapolation past a truncated grid instead of an error.
    pub extrapolate: bool,
}

impl DpGrid {
    pub fn new(dx: f64) -> Self {
        Self { dx, half_width: None, extrapolate: false }
    }
}

#[derive(Debug, Clone)]
pub struct DpProblem {
    pub spec: ModelSpec,
    pub terminal: TerminalFunction,
    pub candidates: CandidateRule,
    pub grid: DpGrid,
}

impl DpProblem {
    pub fn new(spec: ModelSpec, terminal: TerminalFunction, candidates: CandidateRule, grid: DpGrid) -> Self {
        Self { spec, terminal, candidates, grid }
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    /// Per-step candidate lists, `j = 0..n`.
    pub fn candidate_table(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.spec.horizon)
            .map(|j| {
                let (lo, hi) = self.spec.band.bounds(j)?;
                let c = self.candidates.candidates(lo, hi)?;
                if c.is_empty() {
                    return Err(invalid(format!("no multiplier candidates at step {j}")));
                }
                if c.len() > u16::MAX as usize {
                    return Err(invalid("too many multiplier candidates"));
                }
                Ok(c)
            })
            .collect()
    }
}

/// `V_j` on the grid for `j = n, …, 0`, with argmax multipliers.
///
/// Step `j` only stores the nodes `|m| <= r_j` that can influence `V_0(0)`.
#[derive(Debug, Clone)]
pub struct ValueSlices {
    dx: f64,
    times: Vec<f64>,
    radii: Vec<usize>,
    values: Vec<Vec<f64>>,
    argmax: Vec<Vec<u16>>,
    candidates: Vec<Vec<f64>>,
}

impl ValueSlices {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `t_0, …, t_n`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Half-width in nodes of the stored slice `j`.
    pub fn radius(&self, j: usize) -> usize {
        self.radii[j]
    }

    pub fn candidates(&self, j: usize) -> &[f64] {
        &self.candidates[j]
    }

    /// `(x, V_j(x))` at the stored nodes of step `j`.
    pub fn nodes(&self, j: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let r = self.radii[j] as f64;
        self.values[j].iter().enumerate().map(move |(i, v)| ((i as f64 - r) * self.dx, *v))
    }

    /// `V_j(x)` by linear interpolation, held constant past the stored range.
    pub fn value(&self, j: usize, x: f64) -> f64 {
        let slice = &self.values[j];
        let pos = (x / self.dx + self.radii[j] as f64).clamp(0.0, (slice.len() - 1) as f64);
        let i = pos.floor() as usize;
        if i + 1 >= slice.len() {
            return slice[slice.len() - 1];
        }
        let w = pos - i as f64;
        (1.0 - w) * slice[i] + w * slice[i + 1]
    }

    /// Argmax multiplier at the node nearest to `x` for step `j < n`, and
    /// whether `x` was inside the stored range.
    pub fn argmax_lambda(&self, j: usize, x: f64) -> (f64, bool) {
        let r = self.radii[j] as f64;
        let pos = (x / self.dx + r).round();
        let inside = pos >= 0.0 && pos <= 2.0 * r;
        let i = pos.clamp(0.0, 2.0 * r) as usize;
        (self.candidates[j][self.argmax[j][i] as usize], inside)
    }

    /// Rows `(j, t_j, x, V_j(x), λ*_j(x))`; `λ*` is `None` at `j = n`.
    pub fn rows(&self, steps: impl IntoIterator<Item = usize>) -> Vec<(usize, f64, f64, f64, Option<f64>)> {
        let mut out = Vec::new();
        let n = self.horizon();
        for j in steps.into_iter().filter(|&j| j <= n) {
            for (i, (x, v)) in self.nodes(j).enumerate() {
                let lambda = (j < n).then(|| self.candidates[j][self.argmax[j][i] as usize]);
                out.push((j, self.times[j], x, v, lambda));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DpSolution {
    /// `V_0(0)`.
    pub value: f64,
    pub slices: ValueSlices,
    /// Interpolation queries that fell outside a truncated grid and were
    /// linearly extrapolated.
    pub extrapolated_queries: usize,
}

struct Interp<'a> {
    values: &'a [f64],
    radius: f64,
    inv_dx: f64,
    extrapolate: bool,
}

impl Interp<'_> {
    /// Returns the value and whether it was extrapolated; `None` if outside
    /// without extrapolation.
    #[inline]
    fn at(&self, x: f64) -> Option<(f64, bool)> {
        let last = self.values.len() - 1;
        let pos = x * self.inv_dx + self.radius;
        let fl = pos.floor();
        if fl >= 0.0 && (fl as usize) < last {
            let i = fl as usize;
            let w = pos - fl;
            return Some(((1.0 - w) * self.values[i] + w * self.values[i + 1], false));
        }
        if (pos - last as f64).abs() <= 1e-9 {
            return Some((self.values[last], false));
        }
        if pos.abs() <= 1e-9 {
            return Some((self.values[0], false));
        }
        if !self.extrapolate || last == 0 {
            return None;
        }
        let (i, w) = if pos < 0.0 { (0, pos) } else { (last - 1, pos - (last - 1) as f64) };
        Some(((1.0 - w) * self.values[i] + w * self.values[i + 1], true))
    }
}

/// Backward induction
/// `V_j(x) = max_λ Σ_k p_k Ṽ_{j+1}(x + λ σ_{j+1} a_k / s_n)`, `V_n = f`,
/// with `Ṽ` the linear interpolant and ties going to the larger `λ`.
pub fn dp_value(problem: &DpProblem) -> Result<DpSolution> {
    let spec = &problem.spec;
    let n = spec.horizon;
    spec.validate()?;
    let dx = problem.grid.dx;
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::Configuration(format!("DP dx must be positive, got {dx}")));
    }
    let (sigmas, s_n) = spec.sigmas_and_scale(n)?;
    let candidates = problem.candidate_table()?;
    let amax = spec.noise.max_abs_atom();

    // Node radius needed at each step so every interpolation stays on stored nodes.
    let mut radii = vec![0usize; n + 1];
    for j in 0..n {
        let reach = candidates[j].iter().copied().fold(0.0, f64::max) * sigmas[j] * amax / s_n;
        radii[j + 1] = radii[j] + (reach / dx - 1e-9).ceil().max(0.0) as usize + 1;
    }
    if let Some(h) = problem.grid.half_width {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Configuration(format!("DP half_width must be positive, got {h}")));
        }
        let cap = (h / dx - 1e-9).ceil() as usize;
        if radii[n] > cap {
            if !problem.grid.extrapolate {
                return Err(Error::Configuration(format!(
                    "DP grid half-width {h} is narrower than the reachable range {} and extrapolation is off",
                    radii[n] as f64 * dx
                )));
            }
            for r in radii.iter_mut() {
                *r = (*r).min(cap);
            }
        }
    }

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut argmax: Vec<Vec<u16>> = vec![Vec::new(); n];
    let r_n = radii[n] as i64;
    values[n] = (-r_n..=r_n).map(|m| problem.terminal.eval(m as f64 * dx)).collect();
    if let Some(i) = values[n].iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure { index: i, t: 1.0, x: (i as f64 - r_n as f64) * dx, value: values[n][i] });
    }

    let mut extrapolated = 0usize;
    for j in (0..n).rev() {
        let next = Interp {
            values: &values[j + 1],
            radius: radii[j + 1] as f64,
            inv_dx: 1.0 / dx,
            extrapolate: problem.grid.extrapolate,
        };
        let moves: Vec<Vec<(f64, f64)>> = candidates[j]
            .iter()
            .map(|&lam| spec.noise.atoms().iter().map(|&(a, p)| (lam * sigmas[j] * a / s_n, p)).collect())
            .collect();
        let r = radii[j] as i64;
        let computed: Vec<Result<(f64, u16, usize)>> = (0..(2 * r + 1) as usize)
            .into_par_iter()
            .with_min_len(256)
            .map(|i| {
                let x = (i as i64 - r) as f64 * dx;
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0u16;
                let mut outside = 0usize;
                for (c, mv) in moves.iter().enumerate() {
                    let mut acc = 0.0;
                    for &(shift, p) in mv {
                        let (v, ext) = next.at(x + shift).ok_or_else(|| {
                            Error::Configuration(format!("DP query x = {} left the grid at step {}", x + shift, j + 1))
                        })?;
                        outside += ext as usize;
                        acc += p * v;
                    }
                    if acc >= best {
                        best = acc;
                        best_idx = c as u16;
                    }
                }
                Ok((best, best_idx, outside))
            })
            .collect();
        let mut vals = Vec::with_capacity(computed.len());
        let mut arg = Vec::with_capacity(computed.len());
        for item in computed {
            let (v, a, o) = item?;
            vals.push(v);
            arg.push(a);
            extrapolated += o;
        }
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure { index: i, t: j as f64, x: (i as f64 - r as f64) * dx, value: vals[i] });
        }
        values[j] = vals;
        argmax[j] = arg;
    }

    let value = values[0][radii[0]];
    Ok(DpSolution {
        value,
        slices: ValueSlices { dx, times: time_grid(spec, n)?, radii, values, argmax, candidates },
        extrapolated_queries: extrapolated,
    })
}
