use std::sync::Arc;

use super::output::{Cell, Table};
use crate::config::{LoadedConfig, PolicyName};
use crate::control::{bang_bang_policy, dp_value, AdaptedPolicy, DpProblem, DpSolution};
use crate::error::Result;
use crate::gheat::{solve, vanishing_viscosity_solve, GheatProblem, PdeGrid, PdeSolution, SliceRetention};
use crate::model::{condition_sweep, ModelSpec, VerdictRule, DEFAULT_LINDEBERG_EPSILONS};
use crate::mollify::mollify_table;
use crate::montecarlo::{simulate_value, EstimateReport};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub epsilon: Option<f64>,
    pub policy: Option<PolicyName>,
}

/// Tables of one command plus any failed self-check (fatal under `--strict`).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub violation: Option<String>,
}

impl Outcome {
    fn ok(tables: Vec<Table>) -> Result<Self> {
        Ok(Self { tables, violation: None })
    }
}

pub struct Run<'a> {
    pub config: &'a LoadedConfig,
    pub overrides: Overrides,
}

impl Run<'_> {
    fn spec(&self) -> &ModelSpec {
        &self.config.spec
    }

    fn table(&self, name: &str, command: &str, columns: &[&str]) -> Table {
        let mut t = Table::new(name, columns);
        t.meta("tool", "gclt")
            .meta("version", env!("CARGO_PKG_VERSION"))
            .meta("command", command)
            .meta("config_sha256", &self.config.sha256)
            .meta("noise", self.spec().noise.name())
            .meta("variance", self.spec().variances.describe())
            .meta("band", self.spec().band.describe());
        t
    }

    fn pde_meta(t: &mut Table, grid: &PdeGrid, sol: &PdeSolution) {
        t.meta("pde_dx", grid.dx)
            .meta("pde_half_width", sol.half_width())
            .meta("pde_theta", grid.theta)
            .meta("pde_time_steps", sol.time_steps())
            .meta("pde_boundary", format!("{:?}", grid.boundary));
    }

    /// Limit problem `[λ̲, λ̄]` solved on the configured grid.
    fn limit_pde(&self, retention: SliceRetention) -> Result<(PdeGrid, PdeSolution)> {
        let (lo, hi) = self.spec().band.limits();
        let problem = GheatProblem::new(lo, hi, self.config.config.terminal_function()?)?;
        let grid = self.config.config.pde_grid(hi)?.with_retention(retention);
        let sol = solve(&problem, &grid)?;
        Ok((grid, sol))
    }

    fn dp_at(&self, n: usize) -> Result<DpSolution> {
        let cfg = &self.config.config;
        let problem = DpProblem::new(
            self.spec().with_horizon(n)?,
            cfg.terminal_function()?,
            cfg.candidate_rule()?,
            cfg.dp_grid()?,
        );
        dp_value(&problem)
    }

    fn dp_meta(&self, t: &mut Table) -> Result<()> {
        let cfg = &self.config.config;
        let d = cfg.dp_block()?;
        t.meta("dp_candidates", cfg.candidate_rule()?.describe())
            .meta("dp_dx", d.dx)
            .meta("dp_half_width", d.half_width.map_or("auto".to_string(), |h| h.to_string()))
            .meta("dp_extrapolate", d.extrapolate);
        Ok(())
    }

    pub fn check(&self) -> Result<Outcome> {
        let c = self.config.config.check_block()?;
        let eps = c.epsilons.clone().unwrap_or_else(|| DEFAULT_LINDEBERG_EPSILONS.to_vec());
        let rule = VerdictRule::default();
        let sweep = condition_sweep(self.spec(), &c.n_list, &eps, c.delta, rule)?;

        let mut columns = vec!["n".to_string()];
        columns.extend(eps.iter().map(|e| format!("lindeberg_{e}")));
        columns.extend(
            ["feller", "stabilization", "hausdorff_form", "moment_sup", "moment_sum", "uniform_bound"]
                .map(String::from),
        );
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut t = self.table("check", "check", &cols);
        let v = &sweep.verdicts;
        t.meta("moment_delta", c.delta)
            .meta("verdict_window", rule.window)
            .meta("verdict_zero_tol", rule.zero_tol)
            .meta("verdict_lindeberg", format!("{:?}", v.lindeberg))
            .meta("verdict_feller", v.feller)
            .meta("verdict_bounded", v.bounded)
            .meta("verdict_stabilization", v.stabilization)
            .meta("verdict_moment_sum", v.moment_sum);
        for r in &sweep.reports {
            let mut row: Vec<Cell> = vec![r.n.into()];
            row.extend(r.lindeberg.iter().map(|(_, l)| Cell::from(*l)));
            row.extend([r.feller, r.stabilization, r.hausdorff_form, r.moment_sup, r.moment_sum, r.uniform_bound].map(Cell::from));
            t.push(row);
        }
        let all = v.lindeberg.iter().all(|b| *b) && v.feller && v.bounded && v.stabilization && v.moment_sum;
        let violation = (!all).then(|| format!("condition verdicts not all satisfied: {v:?}"));
        Ok(Outcome { tables: vec![t], violation })
    }

    pub fn pde(&self) -> Result<Outcome> {
        let cfg = &self.config.config;
        let p = cfg.pde_block()?;
        let (lo, hi) = self.spec().band.limits();
        let problem = GheatProblem::new(lo, hi, cfg.terminal_function()?)?;
        let grid = cfg.pde_grid(hi)?;
        let sol = match self.overrides.epsilon {
            Some(e) => vanishing_viscosity_solve(&problem, e, &grid)?,
            None => solve(&problem, &grid)?,
        };
        let mut t = self.table("pde", "pde", &["t", "x", "v"]);
        Self::pde_meta(&mut t, &grid, &sol);
        t.meta("terminal", &sol.terminal_label)
            .meta("lower", sol.lower)
            .meta("upper", sol.upper)
            .meta("epsilon", sol.epsilon.unwrap_or(0.0))
            .meta("value_at_origin", sol.value_at_origin());
        if p.dump_slice {
            for (tt, x, v) in sol.rows(false) {
                t.push(vec![tt.into(), x.into(), v.into()]);
            }
        } else {
            t.push(vec![0.0.into(), 0.0.into(), sol.value_at_origin().into()]);
        }
        Outcome::ok(vec![t])
    }

    pub fn dp(&self) -> Result<Outcome> {
        let d = self.config.config.dp_block()?;
        let mut t = self.table("dp", "dp", &["n", "dp_value", "extrapolated_queries"]);
        self.dp_meta(&mut t)?;
        t.meta("terminal", self.config.config.terminal_function()?.label());
        let mut last = None;
        for &n in &d.n_list {
            let sol = self.dp_at(n)?;
            t.push(vec![n.into(), sol.value.into(), sol.extrapolated_queries.into()]);
            last = Some((n, sol));
        }
        let mut tables = vec![t];
        if d.dump_slices {
            if let Some((n, sol)) = last {
                let mut s = self.table("dp_slices", "dp", &["j", "t_j", "x", "V", "lambda_star"]);
                self.dp_meta(&mut s)?;
                s.meta("n", n);
                for (j, tj, x, v, lam) in sol.slices.rows(0..=n) {
                    s.push(vec![j.into(), tj.into(), x.into(), v.into(), lam.into()]);
                }
                tables.push(s);
            }
        }
        Outcome::ok(tables)
    }

    pub fn simulate(&self) -> Result<Outcome> {
        let cfg = &self.config.config;
        let m = cfg.mc_block()?;
        let mut sim = cfg.simulation()?;
        if let Some(s) = self.overrides.seed {
            sim.seed = s;
        }
        if let Some(p) = self.overrides.paths {
            sim.paths = p;
        }
        if let Some(e) = self.overrides.epsilon {
            sim.epsilon = Some(e);
        }
        sim.validate()?;
        let spec = self.spec();
        let n = spec.horizon;
        let band = spec.band.clone();
        let policy_name = self.overrides.policy.unwrap_or(m.policy);

        let mut t = self.table("simulate", "simulate", &["policy", "n", "paths", "seed", "epsilon", "mean", "se", "ci99"]);
        let policy = match policy_name {
            PolicyName::Constant => {
                let (lo, hi) = band.limits();
                AdaptedPolicy::constant(m.lambda.unwrap_or(0.5 * (lo + hi)), band)
            }
            PolicyName::BangBang => {
                let (grid, pde) = self.limit_pde(SliceRetention::Count(4 * n))?;
                Self::pde_meta(&mut t, &grid, &pde);
                bang_bang_policy(Arc::new(pde), band)
            }
            PolicyName::DpArgmax => {
                self.dp_meta(&mut t)?;
                let sol = self.dp_at(n)?;
                t.meta("dp_value", sol.value);
                AdaptedPolicy::dp_argmax(Arc::new(sol.slices), band)
            }
        };
        let f = cfg.terminal_function()?;
        let report: EstimateReport = simulate_value(spec, &policy, &f, &sim)?;
        t.meta("terminal", f.label())
            .meta("seed", sim.seed)
            .meta("antithetic", sim.antithetic)
            .meta("std_dev", report.std_dev)
            .meta("clipped_queries", policy.clipped_count())
            .meta("off_grid_queries", policy.off_grid_count());
        t.push(vec![
            report.policy.clone().into(),
            report.n.into(),
            report.paths.into(),
            report.seed.into(),
            report.epsilon.unwrap_or(0.0).into(),
            report.mean.into(),
            report.standard_error.into(),
            report.ci99_half_width.into(),
        ]);
        Outcome::ok(vec![t])
    }

    pub fn converge(&self) -> Result<Outcome> {
        let d = self.config.config.dp_block()?;
        let (grid, pde) = self.limit_pde(SliceRetention::Endpoints)?;
        let v = pde.value_at_origin();
        let mut t = self.table("converge", "converge", &["n", "dp_value", "pde_value", "gap"]);
        Self::pde_meta(&mut t, &grid, &pde);
        self.dp_meta(&mut t)?;
        t.meta("terminal", &pde.terminal_label).meta("slack", d.slack);
        if let Some(g) = d.final_gap {
            t.meta("final_gap_bound", g);
        }
        let mut ns = d.n_list.clone();
        ns.sort_unstable();
        ns.dedup();
        let mut gaps = Vec::new();
        for n in ns {
            let sol = self.dp_at(n)?;
            let gap = (sol.value - v).abs();
            gaps.push(gap);
            t.push(vec![n.into(), sol.value.into(), v.into(), gap.into()]);
        }
        let mut violation = gaps
            .windows(2)
            .find(|w| w[1] > w[0] + d.slack)
            .map(|w| format!("gap increased from {} to {} (slack {})", w[0], w[1], d.slack));
        if let (Some(bound), Some(&last)) = (d.final_gap, gaps.last()) {
            if last > bound && violation.is_none() {
                violation = Some(format!("final gap {last} exceeds {bound}"));
            }
        }
        Ok(Outcome { tables: vec![t], violation })
    }

    pub fn viscosity(&self) -> Result<Outcome> {
        let cfg = &self.config.config;
        let p = cfg.pde_block()?;
        let (lo, hi) = self.spec().band.limits();
        let problem = GheatProblem::new(lo, hi, cfg.terminal_function()?)?;
        let mut eps = p.epsilons.clone();
        let added_zero = !eps.contains(&0.0);
        if added_zero {
            eps.push(0.0);
        }
        let was_sorted = eps.windows(2).all(|w| w[0] >= w[1]);
        eps.sort_by(|a, b| b.total_cmp(a));
        eps.dedup();

        // One spatial grid for the whole sweep, wide enough for the largest ε.
        let top = (hi * hi + eps[0] * eps[0]).sqrt();
        let grid = cfg.pde_grid(hi)?;
        let grid = PdeGrid { half_width: p.half_width.unwrap_or_else(|| PdeGrid::default_half_width(top, 0.0)), ..grid };

        let values = eps
            .iter()
            .map(|&e| Ok(vanishing_viscosity_solve(&problem, e, &grid)?.value_at_origin()))
            .collect::<Result<Vec<f64>>>()?;
        let base = *values.last().expect("epsilon list contains 0");

        let mut t = self.table("viscosity", "viscosity", &["epsilon", "value", "diff"]);
        t.meta("terminal", problem.terminal.label())
            .meta("lower", lo)
            .meta("upper", hi)
            .meta("pde_dx", grid.dx)
            .meta("pde_half_width", grid.half_width)
            .meta("pde_theta", grid.theta)
            .meta("rows", if was_sorted { "descending epsilon" } else { "descending epsilon (input reordered)" })
            .meta("zero_added", added_zero);
        let diffs: Vec<f64> = values.iter().map(|v| (v - base).abs()).collect();
        for ((e, v), d) in eps.iter().zip(&values).zip(&diffs) {
            t.push(vec![(*e).into(), (*v).into(), (*d).into()]);
        }
        let violation = diffs
            .windows(2)
            .find(|w| !(w[1] < w[0]))
            .map(|w| format!("difference column not strictly decreasing: {} then {}", w[0], w[1]));
        Ok(Outcome { tables: vec![t], violation })
    }

    pub fn mollify_demo(&self) -> Result<Outcome> {
        let cfg = &self.config.config;
        let mut m = cfg.mollifier()?;
        if let Some(e) = self.overrides.epsilon {
            m.epsilon = e;
            if cfg.mollify.as_ref().and_then(|b| b.window).is_none() {
                m.window = crate::mollify::MollifierConfig::default_window(e);
            }
        }
        let f = cfg.terminal_function()?;
        let (approx, rows) = mollify_table(&f, &m)?;
        let mut t = self.table("mollify", "mollify-demo", &["x", "f", "f_eps", "g_eps"]);
        t.meta("terminal", f.label())
            .meta("epsilon", m.epsilon)
            .meta("window", m.window)
            .meta("lattice_nodes", m.nodes)
            .meta("bandwidth", approx.bandwidth)
            .meta("grid_deviation", approx.grid_deviation)
            .meta("audit_deviation", approx.audit_deviation)
            .meta("cutoff", "chi(x)=1-s(|x|-1), s(t)=r(t)/(r(t)+r(1-t)), r(t)=exp(-1/t)");
        for r in rows {
            t.push(r.iter().map(|v| Cell::from(*v)).collect());
        }
        Outcome::ok(vec![t])
    }
}
