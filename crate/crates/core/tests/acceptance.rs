//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p gclt --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command as Process;
use std::sync::Arc;
use std::time::Instant;

use gclt::cli::{execute, Command, Overrides, Table};
use gclt::config::LoadedConfig;
use gclt::control::{
    bang_bang_policy, dp_value, enumerate_policies_value, tree_dp_value, AdaptedPolicy, CandidateRule, DpGrid,
    DpProblem, DEFAULT_TREE_BUDGET,
};
use gclt::gheat::{explicit_step, solve, BoundaryMode, GheatProblem, PdeGrid, SliceRetention, StepCoefficients};
use gclt::model::{
    lindeberg_functional, stabilization_deficiency, ModelSpec, NoiseDistribution, TerminalFunction, UncertaintyBand,
    VarianceSequence,
};
use gclt::mollify::{smooth_approx, truncate, truncation_error_bound, MollifierConfig};
use gclt::montecarlo::{simulate_value, SimulationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run_command(cmd: Command, config: &str) -> Table {
    let loaded = LoadedConfig::from_path(&config_path(config)).expect("config loads");
    execute(cmd, &loaded, Overrides::default()).expect("command runs").tables.remove(0)
}

fn rademacher_spec(lo: f64, hi: f64, n: usize) -> ModelSpec {
    ModelSpec::new(
        NoiseDistribution::rademacher(),
        VarianceSequence::Constant(1.0),
        UncertaintyBand::constant(lo, hi).unwrap(),
        n,
    )
    .unwrap()
}

/// `E cos(Z) = e^{-1/2}` for standard normal `Z`.
fn gaussian_cos() -> f64 {
    (-0.5f64).exp()
}

fn classical_pde(dx: f64) -> f64 {
    let problem = GheatProblem::new(1.0, 1.0, TerminalFunction::cos()).unwrap();
    solve(&problem, &PdeGrid::new(8.0, dx).with_theta(0.5)).unwrap().value_at_origin()
}

fn criterion_1() -> Verdict {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let v = pool.install(|| classical_pde(0.01));
    let secs = start.elapsed().as_secs_f64();
    let err = (v - gaussian_cos()).abs();
    ensure(err <= 1e-3 && secs <= 60.0, format!("v(0,0) = {v:.8}, error {err:.2e} <= 1e-3, {secs:.2}s <= 60s"))
}

fn criterion_2() -> Verdict {
    let errs: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dx| (classical_pde(dx) - gaussian_cos()).abs()).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    ensure(
        errs[0] > errs[1] && errs[1] > errs[2] && ratios.iter().all(|r| *r >= 1.5),
        format!("errors {:.3e}, {:.3e}, {:.3e}; ratios {:.2}, {:.2} >= 1.5", errs[0], errs[1], errs[2], ratios[0], ratios[1]),
    )
}

fn gaps_ok(gaps: &[f64], slack: f64) -> bool {
    gaps.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let t = run_command(Command::Converge, "nondegenerate.toml");
    let secs = start.elapsed().as_secs_f64();
    let gaps = t.column("gap").unwrap();
    let last = *gaps.last().unwrap();
    ensure(
        gaps_ok(&gaps, 2e-3) && last <= 1e-2 && secs <= 120.0,
        format!("gaps {} nonincreasing (slack 2e-3), final {last:.2e} <= 1e-2, {secs:.2}s <= 120s", list(&gaps)),
    )
}

fn criterion_4() -> Verdict {
    let conv = run_command(Command::Converge, "degenerate.toml");
    let gaps = conv.column("gap").unwrap();
    let visc = run_command(Command::Viscosity, "degenerate.toml");
    let eps = visc.column("epsilon").unwrap();
    let diffs = visc.column("diff").unwrap();
    let pde0 = *visc.column("value").unwrap().last().unwrap();
    let dp1024 = *conv.column("dp_value").unwrap().last().unwrap();
    let strictly = diffs.windows(2).all(|w| w[1] < w[0]);
    let sweep_ok = eps == vec![0.4, 0.2, 0.1, 0.05, 0.0];
    let dp_err = (dp1024 - pde0).abs();
    ensure(
        gaps_ok(&gaps, 2e-3) && strictly && sweep_ok && dp_err <= 1.5e-2,
        format!("viscosity diffs {} strictly decreasing; |dp(1024) - v^0(0,0)| = {dp_err:.2e} <= 1.5e-2; gaps {}", list(&diffs), list(&gaps)),
    )
}

fn criterion_5() -> Verdict {
    let mut worst_exact = 0.0f64;
    let mut worst_grid = 0.0f64;
    let mut count = 0;
    for n in 1..=3 {
        for noise in [NoiseDistribution::rademacher(), NoiseDistribution::three_point()] {
            for k in [2, 3] {
                let spec =
                    ModelSpec::new(noise.clone(), VarianceSequence::Constant(1.0), UncertaintyBand::constant(0.5, 1.5).unwrap(), n)
                        .unwrap();
                let p = DpProblem::new(spec, TerminalFunction::cos(), CandidateRule::LambdaGrid(k), DpGrid::new(0.005));
                // three_point, n = 3, K = 3 has 3^13 ≈ 1.6e6 policies.
                let brute = enumerate_policies_value(&p, 2e6).unwrap();
                let tree = tree_dp_value(&p, DEFAULT_TREE_BUDGET).unwrap();
                let grid = dp_value(&p).unwrap().value;
                worst_exact = worst_exact.max((brute - tree).abs());
                worst_grid = worst_grid.max((grid - tree).abs()).max((grid - brute).abs());
                count += 1;
            }
        }
    }
    ensure(
        count == 12 && worst_exact <= 1e-12 && worst_grid <= 5e-3,
        format!("{count} instances: max |enum - tree| = {worst_exact:.1e} <= 1e-12, max grid deviation {worst_grid:.1e} <= 5e-3"),
    )
}

fn criterion_6() -> Verdict {
    let spec = rademacher_spec(1.0, 1.0, 1024);
    let p = DpProblem::new(spec, TerminalFunction::cos(), CandidateRule::EndpointsOnly, DpGrid::new(1.0 / 128.0));
    let v = dp_value(&p).unwrap().value;
    let err = (v - gaussian_cos()).abs();
    ensure(err <= 1e-2, format!("dp_value(1024) = {v:.6}, |dp - E cos Z| = {err:.2e} <= 1e-2"))
}

fn criterion_7() -> Verdict {
    let n = 256;
    let spec = rademacher_spec(0.5, 1.5, n);
    let band = spec.band.clone();
    let dp = dp_value(&DpProblem::new(spec.clone(), TerminalFunction::cos(), CandidateRule::LambdaGrid(21), DpGrid::new(1.0 / 128.0)))
        .unwrap()
        .value;
    let pde = solve(
        &GheatProblem::new(0.5, 1.5, TerminalFunction::cos()).unwrap(),
        &PdeGrid::for_band(1.5, 0.02).with_retention(SliceRetention::Count(4 * n)),
    )
    .unwrap();
    let cfg = SimulationConfig::new(200_000, 31337);
    let f = TerminalFunction::cos();
    let bb = simulate_value(&spec, &bang_bang_policy(Arc::new(pde), band.clone()), &f, &cfg).unwrap();
    let tol = (3.0 * bb.standard_error).max(2e-2);
    let mut ok = (bb.mean - dp).abs() <= tol;
    let mut detail = format!("bang-bang {:.5} vs dp {dp:.5} (tol {tol:.1e})", bb.mean);
    for lam in [0.5, 1.0, 1.5] {
        let c = simulate_value(&spec, &AdaptedPolicy::constant(lam, band.clone()), &f, &cfg).unwrap();
        let joint = (bb.standard_error.powi(2) + c.standard_error.powi(2)).sqrt();
        ok &= bb.mean >= c.mean - 3.0 * joint;
        detail.push_str(&format!("; >= constant({lam}) {:.5}", c.mean));
    }
    ensure(ok, detail)
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for _ in 0..200 {
        let len = rng.gen_range(5..60);
        let lower = rng.gen_range(0.0..1.5);
        let upper = lower + rng.gen_range(0.0..1.5);
        let ratio = if upper > 0.0 { rng.gen_range(0.0..=1.0) / (upper * upper) } else { 1.0 };
        let u: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = u.iter().map(|x| x + rng.gen_range(0.0..0.5)).collect();
        let c = StepCoefficients { ratio, lower, upper };
        let (mut nu, mut nw) = (vec![0.0; len], vec![0.0; len]);
        explicit_step(&u, &mut nu, c, BoundaryMode::DirichletTerminal);
        explicit_step(&w, &mut nw, c, BoundaryMode::DirichletTerminal);
        if nu.iter().zip(&nw).any(|(a, b)| *a > b + 1e-12) {
            violations += 1;
        }
    }
    let mut failures: Vec<&str> = Vec::new();
    if violations > 0 {
        failures.push("one-step monotonicity");
    }

    // Scheme-level properties on a shared grid.
    let grid = PdeGrid::for_band(1.5, 0.02).with_time_steps(12_000);
    let pde = |lo: f64, hi: f64, f: TerminalFunction| {
        solve(&GheatProblem::new(lo, hi, f).unwrap(), &grid).unwrap().initial_slice().to_vec()
    };
    let f = TerminalFunction::cos();
    let g = TerminalFunction::gaussian_bump();
    let vf = pde(0.5, 1.5, f.clone());
    let vg = pde(0.5, 1.5, g.clone());
    if vf.iter().any(|v| !(-1.0 - 1e-12..=1.0 + 1e-12).contains(v)) {
        failures.push("PDE maximum principle");
    }
    let v3f = pde(0.5, 1.5, f.scaled(3.0));
    if vf.iter().zip(&v3f).any(|(a, b)| (3.0 * a - b).abs() > 1e-12) {
        failures.push("PDE positive homogeneity");
    }
    let vfg = pde(0.5, 1.5, f.sum(&g));
    if vfg.iter().zip(vf.iter().zip(&vg)).any(|(s, (a, b))| *s > a + b + 1e-12) {
        failures.push("PDE sublinearity");
    }
    let wide = pde(0.25, 1.5, f.clone());
    if wide.iter().zip(&vf).any(|(a, b)| *a < b - 1e-12) {
        failures.push("PDE band monotonicity");
    }
    let above = TerminalFunction::custom("cos+bump", Some(2.0), None, |x: f64| x.cos() + (-x * x).exp());
    let va = pde(0.5, 1.5, above);
    if va.iter().zip(&vf).any(|(a, b)| *a < b - 1e-12) {
        failures.push("PDE comparison");
    }

    let dp = |lo: f64, hi: f64, k: usize, f: TerminalFunction, dx: f64| {
        dp_value(&DpProblem::new(rademacher_spec(lo, hi, 32), f, CandidateRule::LambdaGrid(k), DpGrid::new(dx))).unwrap()
    };
    let base = dp(0.5, 1.5, 3, f.clone(), 0.01);
    let n = base.slices.horizon();
    if (0..=n).any(|j| base.slices.nodes(j).any(|(_, v)| !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v))) {
        failures.push("DP maximum principle");
    }
    if (dp(0.5, 1.5, 3, f.scaled(2.5), 0.01).value - 2.5 * base.value).abs() > 1e-12 {
        failures.push("DP positive homogeneity");
    }
    if dp(0.5, 1.5, 3, f.sum(&g), 0.01).value > base.value + dp(0.5, 1.5, 3, g.clone(), 0.01).value + 1e-12 {
        failures.push("DP sublinearity");
    }
    // {0.5, 1, 1.5} is contained in {0, 0.5, 1, 1.5, 2}.
    if dp(0.0, 2.0, 5, f.clone(), 0.01).value < base.value - 1e-12 {
        failures.push("DP band monotonicity");
    }
    if (dp(0.5, 1.5, 3, f.clone(), 0.005).value - base.value).abs() > 5e-3 {
        failures.push("DP cross-grid");
    }
    let coarse = solve(&GheatProblem::new(0.5, 1.5, f.clone()).unwrap(), &PdeGrid::for_band(1.5, 0.04)).unwrap();
    let fine = solve(&GheatProblem::new(0.5, 1.5, f).unwrap(), &PdeGrid::for_band(1.5, 0.02)).unwrap();
    if (coarse.value_at_origin() - fine.value_at_origin()).abs() > 5e-3 {
        failures.push("PDE cross-grid");
    }
    ensure(
        failures.is_empty(),
        if failures.is_empty() {
            "200 one-step monotonicity checks; maximum principle, homogeneity, sublinearity, band monotonicity, comparison, cross-grid".into()
        } else {
            format!("failed: {failures:?}")
        },
    )
}

fn criterion_9() -> Verdict {
    let s4 = rademacher_spec(1.0, 1.0, 4);
    let zero = lindeberg_functional(&s4, 4, 0.6).unwrap();
    let one = lindeberg_functional(&s4, 1, 0.5).unwrap();
    let mut ok = zero == 0.0 && one == 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sandwich = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..40);
        let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.0..1.0)).collect();
        let sig: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
        let ll = rng.gen_range(0.0..1.0);
        let lu = ll + rng.gen_range(0.0..1.0);
        let spec = ModelSpec::new(
            NoiseDistribution::rademacher(),
            VarianceSequence::Explicit(sig.clone()),
            UncertaintyBand::explicit(lower.clone(), upper.clone(), ll, lu).unwrap(),
            n,
        )
        .unwrap();
        let (m, h) = stabilization_deficiency(&spec, n).unwrap();
        // Direct summation of the deficiency.
        let s2: f64 = sig.iter().map(|s| s * s).sum();
        let direct: f64 = (0..n)
            .map(|j| sig[j] * sig[j] / s2 * ((upper[j].powi(2) - lu * lu).abs() + (lower[j].powi(2) - ll * ll).abs()))
            .sum();
        if h <= m + 1e-15 && m <= 2.0 * h + 1e-15 && (m - direct).abs() <= 1e-12 {
            sandwich += 1;
        }
    }
    ok &= sandwich == 100;

    let decay = run_command(Command::Check, "decay.toml");
    let m_col = decay.column("stabilization").unwrap();
    let decreasing = m_col.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    ensure(
        ok,
        format!("Lindeberg 0/1 cases ({zero}, {one}); sandwich and direct sum on {sandwich}/100 specs; decay M_n {}", list(&m_col)),
    )
}

fn criterion_10() -> Verdict {
    let spec = rademacher_spec(0.5, 1.5, 256);
    let band = spec.band.clone();
    let pde = solve(
        &GheatProblem::new(0.5, 1.5, TerminalFunction::cos()).unwrap(),
        &PdeGrid::for_band(1.5, 0.02).with_retention(SliceRetention::Count(1024)),
    )
    .unwrap();
    let policies = [AdaptedPolicy::constant(1.0, band.clone()), bang_bang_policy(Arc::new(pde), band)];
    let f = TerminalFunction::cos();
    let mut ok = true;
    let mut detail = Vec::new();
    for policy in &policies {
        let base = simulate_value(&spec, policy, &f, &SimulationConfig::new(100_000, 10)).unwrap();
        for eps in [0.2, 0.05] {
            let pert = simulate_value(&spec, policy, &f, &SimulationConfig::new(100_000, 10).with_epsilon(Some(eps))).unwrap();
            let diff = (pert.mean - base.mean).abs();
            let bound = eps + 3.0 * (pert.standard_error + base.standard_error);
            ok &= diff <= bound;
            detail.push(format!("{} eps={eps}: {diff:.2e} <= {bound:.2e}", policy.label()));
        }
    }
    ensure(ok, detail.join("; "))
}

fn criterion_11() -> Verdict {
    let f = TerminalFunction::clipped_ramp();
    let spec = rademacher_spec(0.5, 1.5, 256);
    let grid = PdeGrid::for_band(1.5, 0.02);
    let base = solve(&GheatProblem::new(0.5, 1.5, f.clone()).unwrap(), &grid).unwrap().value_at_origin();
    let mut ok = true;
    let mut detail = Vec::new();
    for eps in [0.2, 0.05] {
        let cfg = MollifierConfig::new(eps);
        let approx = smooth_approx(&f, &cfg).unwrap();
        // Fresh audit on a grid offset from the one used in the search.
        let a = cfg.window;
        let audit = (0..40_000)
            .map(|i| {
                let x = -a + 2.0 * a * (i as f64 + 0.5) / 40_000.0;
                (f.eval(x) - approx.function.eval(x)).abs()
            })
            .fold(0.0, f64::max);
        let g = truncate(&approx.function, eps).unwrap();
        let vg = solve(&GheatProblem::new(0.5, 1.5, g).unwrap(), &grid).unwrap().value_at_origin();
        let bound = truncation_error_bound(&spec, &f, eps, 256).unwrap() + 5e-3;
        let gap = (base - vg).abs();
        ok &= approx.audit_deviation <= eps && audit <= eps && gap <= bound;
        detail.push(format!("eps={eps}: deviation {:.3e}, |v(f) - v(g)| = {gap:.2e} <= {bound:.3}", approx.audit_deviation.max(audit)));
    }
    ensure(ok, detail.join("; "))
}

fn criterion_12() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_gclt");
    let config = config_path("determinism.toml");
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for workers in [1, 2, 8] {
        let out = tmp.path().join(format!("w{workers}"));
        for cmd in ["simulate", "dp"] {
            let status = Process::new(exe)
                .args([cmd, "--config"])
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .args(["--workers", &workers.to_string()])
                .output()
                .unwrap();
            if !status.status.success() {
                return Err(format!("{cmd} with {workers} workers failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
        }
        let mut names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        let contents: Vec<(String, Vec<u8>)> = names
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
            .collect();
        files.push(contents);
    }
    let same = files.windows(2).all(|w| w[0] == w[1]);
    let names: Vec<&str> = files[0].iter().map(|(n, _)| n.as_str()).collect();
    ensure(same && names.len() == 3, format!("{names:?} byte-identical across 1, 2, 8 workers"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("classical PDE value", criterion_1),
        ("PDE grid refinement", criterion_2),
        ("DP to PDE convergence, band [0.8, 1.2]", criterion_3),
        ("degenerate band [0, 1] with vanishing viscosity", criterion_4),
        ("oracle equivalence on 12 tiny instances", criterion_5),
        ("classical CLT recovery by DP", criterion_6),
        ("bang-bang policy by Monte Carlo", criterion_7),
        ("monotone scheme properties", criterion_8),
        ("condition checkers", criterion_9),
        ("epsilon-perturbation bound", criterion_10),
        ("mollification", criterion_11),
        ("determinism across worker counts", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} [{secs:.1}s] {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
