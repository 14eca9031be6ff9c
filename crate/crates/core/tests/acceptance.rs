//! Acceptance criteria, one line each.
//!
//!     cargo test --release --test acceptance
//!
//! A failing criterion is printed as FAIL without failing the test run;
//! set `ACCEPTANCE_STRICT=1` to turn failures into a test failure and
//! `ACCEPTANCE_FULL=1` to run the solver and simulation criteria at full scale.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use learning_egm::analysis::{
    asymptotic_mpc, brute_force_policy, default_probes, diagnose, euler_residuals,
    geometric_probes, min_consumption_gap,
};
use learning_egm::belief::{
    bayes_update, build_simplex_grid, mixture_prob, project_to_grid, Belief,
};
use learning_egm::config::RunConfig;
use learning_egm::io::write_paired_statistics;
use learning_egm::model::{
    CandidateSet, CrraUtility, Matrix, ShockAtom, StateOrder, StateShockMap,
};
use learning_egm::simulate::{compare_learning_benchmark, default_initial_wealth, PairedStatistics};
use learning_egm::solver::{
    build_savings_grid, iterate, solve, ConsumptionRule, PolicyTable, Problem,
};
use learning_egm::stability::{consumption_lower_bound_certificate, stability_report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn full_scale() -> bool {
    std::env::var("ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

fn preset() -> RunConfig {
    let cfg = RunConfig::paper_2026();
    if full_scale() {
        cfg
    } else {
        cfg.reduced()
    }
}

fn small_config() -> RunConfig {
    RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small.json")).unwrap()
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as u64
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let l = build_simplex_grid(3, 20).unwrap().len();
    let mut bad = Vec::new();
    for n in 1..=5usize {
        for h in 1..=30usize {
            let got = build_simplex_grid(n, h).unwrap().len() as u64;
            if got != binomial((h + n - 1) as u64, (n - 1) as u64) {
                bad.push((n, h));
            }
        }
    }
    let dt = t.elapsed();
    outcome(
        l == 231 && bad.is_empty() && dt < Duration::from_secs(1),
        format!("L(3,20) = {l}, {} count mismatches, {:.3}s", bad.len(), dt.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let cfg = RunConfig::paper_2026();
    let cands = cfg.candidate_set().unwrap();
    let shocks = cfg.shocks().unwrap();
    let r = stability_report(&cands, &shocks, None).unwrap();
    let expected = [[0.9855, 0.0145], [0.3, 0.7]];
    let envelope = (0..2).all(|i| (0..2).all(|j| r.p_star.get(i, j) == expected[i][j]));
    let positive = r.perron_vector.iter().all(|x| x.iter().all(|v| *v > 0.0));
    let ratios = r.candidate_ratios.iter().all(|v| v.iter().all(|q| *q < 1.0));
    let radii = r.spectral_radius.iter().all(|v| *v < 1.0);
    let dt = t.elapsed();
    outcome(
        envelope && r.checks.all_pass() && radii && positive && ratios && dt < Duration::from_secs(1),
        format!(
            "envelope exact {envelope}, checks {}, r = [{:.10}, {:.10}], Perron positive {positive}, K_i x < x {ratios}, {:.3}s",
            r.checks.all_pass(),
            r.spectral_radius[0],
            r.spectral_radius[1],
            dt.as_secs_f64()
        ),
    )
}

struct Solved {
    cfg: RunConfig,
    problem: Problem,
    learning: PolicyTable,
    full_problem: Problem,
    full: PolicyTable,
}

fn criterion_3(s: &Solved, elapsed: Duration) -> Outcome {
    let probes = default_probes(&s.learning, 300);
    let res = euler_residuals(&s.problem, &s.learning, &probes);
    // where the residual falls below the bound for good
    let mut worst_w = 0.0;
    for &w in &probes {
        let one = euler_residuals(&s.problem, &s.learning, &[w]);
        if one.max_abs >= 1e-3 {
            worst_w = w;
        }
    }
    outcome(
        res.max_abs < 1e-3 && elapsed < Duration::from_secs(300),
        format!(
            "max residual {:.3e}, mean {:.3e} over {} interior probes, above 1e-3 up to w = {worst_w:.3}, solve {:.1}s",
            res.max_abs,
            res.mean_abs,
            res.n_interior,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4(s: &Solved) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, problem, policy) in [
        ("learning", &s.problem, &s.learning),
        ("full-info", &s.full_problem, &s.full),
    ] {
        let sbar = consumption_lower_bound_certificate(problem.candidates(), problem.shocks(), problem.utility()).unwrap();
        let probes = default_probes(policy, 100);
        let d = diagnose(problem, policy, None, sbar, &probes);
        let (richer, _) = solve(
            &problem.with_scaled_income(1.1).unwrap(),
            s.cfg.solver.tol,
            s.cfg.solver.max_iter,
            None,
        )
        .unwrap();
        let income_gap = min_consumption_gap(&richer, policy, &probes);
        let bound_ok = match (sbar, d.lower_bound_margin) {
            (Some(_), Some(m)) => m >= 0.0,
            (None, _) => true,
            _ => false,
        };
        let ok = d.wealth_monotone
            && d.savings_monotone
            && d.concave
            && d.threshold_exact
            && d.threshold_gap <= 1e-10
            && income_gap >= -1e-6
            && bound_ok;
        pass &= ok;
        lines.push(format!(
            "{name}: monotone {}/{}, concave {}, threshold exact {} gap {:.1e}, +10% income min gap {:.2e}, lower bound {}",
            d.wealth_monotone,
            d.savings_monotone,
            d.concave,
            d.threshold_exact,
            d.threshold_gap,
            income_gap,
            if bound_ok { "holds" } else { "violated" }
        ));
    }
    outcome(pass, lines.join("; "))
}

fn three_atom_problem() -> Problem {
    let atom = |prob, ret, income| ShockAtom { prob, beta: 0.95, ret, income };
    let shocks = StateShockMap::new(vec![
        vec![atom(0.25, 1.01, 0.8), atom(0.5, 1.03, 1.0), atom(0.25, 1.05, 1.2)],
        vec![atom(0.25, 0.99, 0.4), atom(0.5, 1.01, 0.5), atom(0.25, 1.03, 0.6)],
    ])
    .unwrap();
    let p = Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    Problem::new(
        CrraUtility::new(2.0).unwrap(),
        CandidateSet::new(vec![p], StateOrder::natural(2)).unwrap(),
        shocks,
        build_savings_grid(400, 40.0, 4.0).unwrap(),
        build_simplex_grid(1, 1).unwrap(),
    )
    .unwrap()
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let problem = three_atom_problem();
    let (egm, _) = solve(&problem, 1e-10, 10_000, None).unwrap();
    let grid = geometric_probes(0.4, 12.0, 50);
    let oracle = brute_force_policy(&problem, &grid, 200, 1e-10, 10_000).unwrap();
    let mut steps = 0.0_f64;
    for z in 0..2 {
        for (i, &w) in grid.iter().enumerate() {
            let gap = (egm.consumption(w, z, 0) - oracle.curve(z, 0)[i]).abs();
            steps = steps.max(gap / oracle.consumption_step[i]);
        }
    }
    let re = euler_residuals(&problem, &egm, &grid).max_abs;
    let ro = euler_residuals(&problem, &oracle, &grid).max_abs;
    let dt = t.elapsed();
    outcome(
        steps <= 2.0 && re <= ro && dt < Duration::from_secs(60),
        format!(
            "largest gap {steps:.3} oracle steps, residuals {re:.2e} (EGM) vs {ro:.2e} (oracle), {:.1}s",
            dt.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let (beta, r, gamma) = (0.95_f64, 1.02_f64, 2.0_f64);
    let problem = Problem::new(
        CrraUtility::new(gamma).unwrap(),
        CandidateSet::new(vec![Matrix::identity(1)], StateOrder::natural(1)).unwrap(),
        StateShockMap::deterministic(&[(beta, r, 1.0)]).unwrap(),
        build_savings_grid(1000, 10_000.0, 500.0).unwrap(),
        build_simplex_grid(1, 1).unwrap(),
    )
    .unwrap();
    let (policy, _) = solve(&problem, 1e-10, 100_000, None).unwrap();
    let expected = 1.0 - (beta * r).powf(1.0 / gamma) / r;
    let mpc = asymptotic_mpc(&policy, 0, 0);
    let err = (mpc.top_segment - expected).abs();
    outcome(
        err < 1e-3,
        format!(
            "high-wealth MPC {:.6} (top decile {:.6}) vs 1 - (beta R)^(1/gamma)/R = {expected:.6}, error {err:.2e}",
            mpc.top_segment, mpc.top_decile
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut cfg = small_config();
    cfg.solver.tol = 1e-10;
    let truth = cfg.simulation.true_kernel;
    let problem = cfg.problem().unwrap();
    let (learning, report) = solve(&problem, cfg.solver.tol, cfg.solver.max_iter, None).unwrap();
    let vertex = problem
        .beliefs()
        .index_of(&Belief::vertex(2, truth))
        .expect("vertex on grid");
    let full_problem = cfg.full_info_problem().unwrap();
    let (converged, _) = solve(&full_problem, cfg.solver.tol, cfg.solver.max_iter, None).unwrap();
    let mut gap = 0.0_f64;
    for z in 0..problem.n_states() {
        let (a, b) = (learning.knots(z, vertex), converged.knots(z, 0));
        let (ca, cb) = (learning.consumption_at_knots(z, vertex), converged.consumption_at_knots(z, 0));
        for g in 0..a.len() {
            gap = gap.max((a[g] - b[g]).abs()).max((ca[g] - cb[g]).abs());
        }
    }

    // same number of sweeps on both sides for bit-exact comparison
    let matched = iterate(&full_problem, report.iterations, None).unwrap();
    cfg.simulation.prior = Belief::vertex(2, truth);
    cfg.simulation.n_paths = 1000;
    let p = compare_learning_benchmark(
        &learning,
        &cfg.economy().unwrap(),
        &matched,
        &cfg.full_info_economy().unwrap(),
        &cfg.simulation,
    )
    .unwrap();
    let exact = p.learning.mean_consumption == p.full_info.mean_consumption
        && p.learning.mean_savings == p.full_info.mean_savings
        && p.learning.consumption_volatility == p.full_info.consumption_volatility
        && p.diff_consumption.iter().all(|d| *d == 0.0);
    outcome(
        gap <= 1e-6 && exact,
        format!("max knot gap {gap:.2e}, vertex-prior panel identical to benchmark: {exact}"),
    )
}

fn criterion_8(s: &Solved) -> Outcome {
    let t = Instant::now();
    let base = default_initial_wealth(&[&s.learning, &s.full]);
    let learning_econ = s.cfg.economy().unwrap();
    let full_econ = s.cfg.full_info_economy().unwrap();
    let mut pass = true;
    let mut detail = format!("K = {}, base w0 = {base:.4}", s.cfg.simulation.n_paths);
    for mult in [1.0, 2.0, 5.0] {
        let mut sim = s.cfg.simulation.clone();
        sim.initial_wealth = Some(mult * base);
        let p = compare_learning_benchmark(&s.learning, &learning_econ, &s.full, &full_econ, &sim).unwrap();
        let (ok, line) = qualitative(&p);
        pass &= ok;
        write!(detail, "; x{mult}: {line}").ok();
    }
    let dt = t.elapsed();
    pass &= full_scale() || dt < Duration::from_secs(600);
    write!(detail, "; {:.1}s", dt.as_secs_f64()).ok();
    outcome(pass, detail)
}

fn qualitative(p: &PairedStatistics) -> (bool, String) {
    let dc = &p.diff_consumption;
    let sc = &p.se_diff_consumption;
    let last = dc.len() - 1;
    let a = dc[0] <= -3.0 * sc[0];
    let b = dc[120].abs() < dc[0].abs();
    let zs = (12..=120)
        .map(|t| p.diff_savings[t] / p.se_diff_savings[t])
        .fold(f64::INFINITY, f64::min);
    let c = zs >= 2.0;
    let overtake = (0..=last).find(|&t| dc[t] > 2.0 * sc[t]);
    let d = overtake.is_some();
    let tail = last.saturating_sub(119)..=last;
    let n = tail.clone().count() as f64;
    let vl = tail.clone().map(|t| p.learning.consumption_volatility[t]).sum::<f64>() / n;
    let vf = tail.map(|t| p.full_info.consumption_volatility[t]).sum::<f64>() / n;
    let e = vl < vf;
    let th = &p.learning.mean_posterior;
    let rise = th[last][1] - th[0][1];
    let f = rise >= 5.0 * p.learning.se_posterior[last][1];
    let flag = |b: bool| if b { "ok" } else { "FAIL" };
    (
        a && b && c && d && e && f,
        format!(
            "(a) {} dc0 {:.4}/{:.1}se (b) {} |dc120| {:.4} (c) {} min z {zs:.1} (d) {} t={} (e) {} vol {vl:.4} vs {vf:.4} (f) {} theta2 {:.4}",
            flag(a),
            dc[0],
            dc[0] / sc[0],
            flag(b),
            dc[120].abs(),
            flag(c),
            flag(d),
            overtake.map_or("-".to_string(), |t| t.to_string()),
            flag(e),
            flag(f),
            th[last][1]
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = small_config();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let (learn, _) = solve(&cfg.problem().unwrap(), cfg.solver.tol, cfg.solver.max_iter, None).unwrap();
            let (full, _) = solve(&cfg.full_info_problem().unwrap(), cfg.solver.tol, cfg.solver.max_iter, None).unwrap();
            let p = compare_learning_benchmark(
                &learn,
                &cfg.economy().unwrap(),
                &full,
                &cfg.full_info_economy().unwrap(),
                &cfg.simulation,
            )
            .unwrap();
            let dir = tempfile::tempdir().unwrap();
            let file = dir.path().join("paired.csv");
            write_paired_statistics(&file, &p, &cfg.hash()).unwrap();
            (learn, std::fs::read(file).unwrap())
        })
    };
    let (p1, b1) = run(1);
    let (p4, b4) = run(4);
    let (p4b, b4b) = run(4);
    let same = p1 == p4 && p4 == p4b && b1 == b4 && b4 == b4b;
    outcome(
        same,
        format!("policies and paired CSV ({} bytes) identical across 1, 4, 4 threads: {same}", b1.len()),
    )
}

fn random_stochastic(rng: &mut ChaCha8Rng, m: usize) -> Matrix {
    let rows = (0..m)
        .map(|_| {
            let r: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Matrix::from_rows(rows).unwrap()
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut simplex_err = 0.0_f64;
    let mut martingale_err = 0.0_f64;
    let mut negative = false;
    for _ in 0..100_000 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(2..=4);
        let cands = CandidateSet::new(
            (0..n).map(|_| random_stochastic(&mut rng, m)).collect(),
            StateOrder::natural(m),
        )
        .unwrap();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let theta = Belief::new(raw.iter().map(|v| v / total).collect()).unwrap();
        let z = rng.random_range(0..m);
        let zn = rng.random_range(0..m);
        let post = bayes_update(&cands, &theta, z, zn).unwrap();
        simplex_err = simplex_err.max((post.weights().iter().sum::<f64>() - 1.0).abs());
        negative |= post.weights().iter().any(|w| *w < 0.0);
        // E[theta' | z] = theta
        let mut mean = vec![0.0; n];
        for next in 0..m {
            let q = mixture_prob(&cands, &theta, z, next);
            let p = bayes_update(&cands, &theta, z, next).unwrap();
            for (acc, w) in mean.iter_mut().zip(p.weights()) {
                *acc += q * w;
            }
        }
        for (a, b) in mean.iter().zip(theta.weights()) {
            martingale_err = martingale_err.max((a - b).abs());
        }
    }
    let mut identity = true;
    for n in 1..=4 {
        for h in 1..=12 {
            let g = build_simplex_grid(n, h).unwrap();
            identity &= (0..g.len()).all(|ell| project_to_grid(&g, g.point(ell)) == ell);
        }
    }
    outcome(
        simplex_err <= 1e-12 && !negative && martingale_err <= 1e-10 && identity,
        format!(
            "simplex error {simplex_err:.1e}, martingale error {martingale_err:.1e}, projection identity {identity}"
        ),
    )
}

/// Written straight to the stderr handle so the lines show up without
/// `--nocapture`.
fn emit(line: &str) {
    use std::io::Write;
    let mut err = std::io::stderr().lock();
    writeln!(err, "{line}").ok();
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |k, name, o: Outcome| {
        emit(&format!("criterion {k:2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail));
        results.push((k, name, o));
    };
    report(1, "simplex combinatorics", criterion_1());
    report(2, "stability certificate", criterion_2());

    let cfg = preset();
    let t = Instant::now();
    let problem = cfg.problem().unwrap();
    let solved = solve(&problem, cfg.solver.tol, cfg.solver.max_iter, None);
    let elapsed = t.elapsed();
    let solved = match solved {
        Ok((learning, _)) => {
            let full_problem = cfg.full_info_problem().unwrap();
            let (full, _) = solve(&full_problem, cfg.solver.tol, cfg.solver.max_iter, None).unwrap();
            Some(Solved { cfg, problem, learning, full_problem, full })
        }
        Err(e) => {
            report(3, "solver convergence", outcome(false, format!("{e}")));
            None
        }
    };
    if let Some(s) = &solved {
        report(3, "solver convergence", criterion_3(s, elapsed));
        report(4, "structural properties", criterion_4(s));
    }
    report(5, "oracle equivalence", criterion_5());
    report(6, "analytical MPC limit", criterion_6());
    report(7, "degenerate learning", criterion_7());
    if let Some(s) = &solved {
        report(8, "simulation qualitative", criterion_8(s));
    }
    report(9, "determinism", criterion_9());
    report(10, "belief layer", criterion_10());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    emit(&format!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len()));
    if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        assert!(failed.is_empty(), "failing criteria: {failed:?}");
    }
}
