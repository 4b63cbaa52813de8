//! Smooth approximation `f^ε` of a bounded continuous `f`, the smooth
//! cutoff `χ`, and the truncated payoff `g^ε(x) = χ(√ε x) f^ε(x)`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{ModelSpec, TerminalFunction};

/// Kernel support in bandwidths; `exp(-KERNEL_REACH²/2)` is below `f64` resolution.
const KERNEL_REACH: f64 = 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MollifierConfig {
    pub epsilon: f64,
    /// Deviation is controlled on `[-window, window]`.
    pub window: f64,
    /// Lattice points per kernel support.
    pub nodes: usize,
    pub bandwidth_range: (f64, f64),
    /// Points of the search grid; the audit grid is 10× finer.
    pub grid_points: usize,
    /// Search targets `ε (1 - margin)` to leave room for the audit.
    pub margin: f64,
}

impl MollifierConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            window: Self::default_window(epsilon),
            nodes: 129,
            bandwidth_range: (1e-4, 1.0),
            grid_points: 2001,
            margin: 0.1,
        }
    }

    pub fn default_window(epsilon: f64) -> f64 {
        2.0 / epsilon.sqrt() + 1.0
    }

    pub fn with_window(mut self, window: f64) -> Self {
        self.window = window;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.epsilon;
        if !(e > 0.0 && e.is_finite()) {
            return Err(invalid(format!("mollifier epsilon must be positive, got {e}")));
        }
        if !(self.window >= 2.0 / e.sqrt()) || !self.window.is_finite() {
            return Err(invalid(format!("window {} must be at least 2/sqrt(epsilon) = {}", self.window, 2.0 / e.sqrt())));
        }
        if self.nodes < 9 {
            return Err(invalid("mollifier needs at least 9 lattice nodes"));
        }
        let (lo, hi) = self.bandwidth_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(invalid(format!("bad bandwidth range ({lo}, {hi})")));
        }
        if self.grid_points < 3 {
            return Err(invalid("search grid needs at least 3 points"));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return Err(invalid("margin must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// `f^ε` together with the bandwidth used and its audited deviation.
#[derive(Debug, Clone)]
pub struct SmoothApproximation {
    pub function: TerminalFunction,
    pub bandwidth: f64,
    /// Max `|f - f^ε|` on the search grid.
    pub grid_deviation: f64,
    /// Max `|f - f^ε|` on the 10× finer audit grid.
    pub audit_deviation: f64,
}

/// Normalized Gaussian lattice sum `Σ w_k f(y_k) / Σ w_k`, `y_k = k δ`,
/// written about the nearest lattice value so constants are reproduced exactly.
fn lattice_smooth(f: &TerminalFunction, h: f64, nodes: usize, x: f64) -> f64 {
    let delta = 2.0 * KERNEL_REACH * h / (nodes - 1) as f64;
    let k_lo = ((x - KERNEL_REACH * h) / delta).ceil() as i64;
    let k_hi = ((x + KERNEL_REACH * h) / delta).floor() as i64;
    let anchor = f.eval((x / delta).round() * delta);
    let (mut num, mut den) = (0.0, 0.0);
    for k in k_lo..=k_hi {
        let y = k as f64 * delta;
        let z = (x - y) / h;
        let w = (-0.5 * z * z).exp();
        num += w * (f.eval(y) - anchor);
        den += w;
    }
    anchor + num / den
}

fn mollified(f: &TerminalFunction, h: f64, nodes: usize) -> TerminalFunction {
    let inner = f.clone();
    TerminalFunction::custom(format!("mollified({},h={h})", f.label()), f.sup_norm(), None, move |x| {
        lattice_smooth(&inner, h, nodes, x)
    })
}

fn max_deviation(f: &TerminalFunction, h: f64, cfg: &MollifierConfig, points: usize) -> f64 {
    let a = cfg.window;
    (0..points)
        .into_par_iter()
        .map(|i| {
            let x = -a + 2.0 * a * i as f64 / (points - 1) as f64;
            (f.eval(x) - lattice_smooth(f, h, cfg.nodes, x)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Smooth `f^ε` with `max |f - f^ε| <= ε` on the window, checked on a
/// 10× finer audit grid. The bandwidth is the largest found by bisection.
pub fn smooth_approx(f: &TerminalFunction, cfg: &MollifierConfig) -> Result<SmoothApproximation> {
    cfg.validate()?;
    if !f.is_bounded() {
        return Err(invalid(format!("mollification needs a bounded terminal function, got {}", f.label())));
    }
    let eps = cfg.epsilon;
    let target = eps * (1.0 - cfg.margin);
    let (h_min, h_max) = cfg.bandwidth_range;
    let dev = |h: f64| max_deviation(f, h, cfg, cfg.grid_points);

    let d_min = dev(h_min);
    if d_min > target {
        return Err(Error::ApproximationFailure { best_deviation: d_min, target: eps });
    }
    let mut h = h_max;
    let mut d = dev(h_max);
    if d > target {
        let (mut good, mut bad) = (h_min.ln(), h_max.ln());
        let mut d_good = d_min;
        for _ in 0..40 {
            let mid = 0.5 * (good + bad);
            let dm = dev(mid.exp());
            if dm <= target {
                good = mid;
                d_good = dm;
            } else {
                bad = mid;
            }
        }
        h = good.exp();
        d = d_good;
    }

    let audit_points = 10 * (cfg.grid_points - 1) + 1;
    let mut best = f64::INFINITY;
    while h >= h_min {
        let audit = max_deviation(f, h, cfg, audit_points);
        if audit <= eps {
            return Ok(SmoothApproximation {
                function: mollified(f, h, cfg.nodes),
                bandwidth: h,
                grid_deviation: d,
                audit_deviation: audit,
            });
        }
        best = best.min(audit);
        h *= 0.5;
        d = dev(h);
    }
    Err(Error::ApproximationFailure { best_deviation: best, target: eps })
}

/// `exp(-1/t)` for `t > 0`, else 0.
fn rho(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff: 1 on `|x| <= 1`, 0 on `|x| >= 2`, strictly decreasing in
/// `|x|` between.
pub fn cutoff_chi(x: f64) -> f64 {
    let t = x.abs() - 1.0;
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let (a, b) = (rho(t), rho(1.0 - t));
        b / (a + b)
    }
}

/// `g^ε(x) = χ(√ε x) f^ε(x)`; `ε = 0` returns `f^ε` unchanged.
pub fn truncate(f_eps: &TerminalFunction, eps: f64) -> Result<TerminalFunction> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(invalid(format!("truncation epsilon must be finite and >= 0, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(f_eps.clone());
    }
    let inner = f_eps.clone();
    let root = eps.sqrt();
    Ok(TerminalFunction::custom(format!("truncated({},eps={eps})", f_eps.label()), f_eps.sup_norm(), None, move |x| {
        let c = cutoff_chi(root * x);
        if c == 0.0 {
            0.0
        } else {
            c * inner.eval(x)
        }
    }))
}

/// `ε + 2‖f‖∞ ε Λ²` with `Λ = max_{j<n} λ̄_j`, a bound on
/// `|E f(X_n) - E g^ε(X_n)|` under any admissible policy.
pub fn truncation_error_bound(spec: &ModelSpec, f: &TerminalFunction, eps: f64, n: usize) -> Result<f64> {
    let sup = f
        .sup_norm()
        .ok_or_else(|| invalid(format!("terminal function {} has no declared sup norm", f.label())))?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(invalid(format!("epsilon must be finite and >= 0, got {eps}")));
    }
    spec.check_n(n)?;
    let mut lam = 0.0f64;
    for j in 0..n {
        lam = lam.max(spec.band.bounds(j)?.1);
    }
    Ok(eps + 2.0 * sup * eps * lam * lam)
}

/// Rows `(x, f, f^ε, g^ε)` on the search grid of the window.
pub fn mollify_table(f: &TerminalFunction, cfg: &MollifierConfig) -> Result<(SmoothApproximation, Vec<[f64; 4]>)> {
    let approx = smooth_approx(f, cfg)?;
    let g = truncate(&approx.function, cfg.epsilon)?;
    let a = cfg.window;
    let points = cfg.grid_points;
    let rows = (0..points)
        .map(|i| {
            let x = -a + 2.0 * a * i as f64 / (points - 1) as f64;
            [x, f.eval(x), approx.function.eval(x), g.eval(x)]
        })
        .collect();
    Ok((approx, rows))
}
