//! Command line driver shared by the `learning-egm` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{
    brute_force_policy, compare_policies, default_probes, diagnose, euler_residuals,
    geometric_probes,
};
use crate::belief::Belief;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::simulate::{compare_learning_benchmark, simulate_panel};
use crate::solver::{curvature, solve, ConsumptionRule, PolicyTable, Problem};
use crate::stability::{consumption_lower_bound_certificate, stability_report};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "LEARNING_EGM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "learning-egm", version, about = "Consumption-savings under transition uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration (`paper-2026`).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Saved policy CSV.
    #[arg(long, global = true)]
    pub policy: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// G = 200, H = 20, K = 5000.
    #[arg(long, global = true)]
    pub reduced: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize the savings and belief grids.
    GridInfo,
    /// Run the stability certificate.
    Check,
    /// Solve for the optimal policy.
    Solve {
        /// Solve the known-kernel benchmark under the true candidate.
        #[arg(long)]
        full_info: bool,
    },
    /// Structural checks and Euler residuals of a saved policy.
    Analyze {
        /// Fail with exit code 3 when a check does not pass.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 300)]
        probes: usize,
    },
    /// Simulate a panel; with `--benchmark`, compare against it.
    Simulate {
        /// Known-kernel policy for a paired comparison.
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
    /// Cross-check the solver against value iteration on a small model.
    OracleCompare {
        #[arg(long, default_value_t = 50)]
        wealth_points: usize,
        #[arg(long, default_value_t = 200)]
        consumption_points: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
    },
}

impl Cli {
    pub fn load_config(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => {
                return Err(Error::config("--config", "pass either --config or --preset, not both"))
            }
            (Some(path), None) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => return Err(Error::config("--config", "pass --config PATH or --preset NAME")),
        };
        if self.reduced {
            cfg = cfg.reduced();
        }
        if let Some(seed) = self.seed {
            cfg.simulation.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn policy_path(&self) -> Result<&Path> {
        self.policy
            .as_deref()
            .ok_or_else(|| Error::config("--policy", "this subcommand needs a saved policy"))
    }
}

/// Runs one subcommand, writing a human-readable summary to `stdout`.
pub fn run(cli: &Cli, stdout: &mut String) -> Result<()> {
    let cfg = cli.load_config()?;
    let out = cli.out_dir(&cfg);
    match &cli.command {
        Command::GridInfo => grid_info(&cfg, &out, stdout),
        Command::Check => check(&cfg, &out, stdout),
        Command::Solve { full_info } => solve_cmd(&cfg, &out, *full_info, stdout),
        Command::Analyze { strict, probes } => {
            analyze(&cfg, &out, cli.policy_path()?, *strict, *probes, stdout)
        }
        Command::Simulate { benchmark } => {
            simulate_cmd(&cfg, &out, cli.policy_path()?, benchmark.as_deref(), stdout)
        }
        Command::OracleCompare {
            wealth_points,
            consumption_points,
            tol,
            max_iter,
        } => oracle_compare(&cfg, &out, *wealth_points, *consumption_points, *tol, *max_iter, stdout),
    }
}

fn grid_info(cfg: &RunConfig, out: &Path, o: &mut String) -> Result<()> {
    let s = cfg.savings_grid()?;
    let b = cfg.belief_grid()?;
    let p = s.points();
    let g = &cfg.grids;
    writeln!(o, "savings grid: G = {}, s_max = {}, s_median = {}", p.len(), g.s_max, g.s_median).ok();
    writeln!(o, "  curvature {:.6}", curvature(g.s_max, g.s_median)).ok();
    writeln!(o, "  s[0..3] = {:?}", &p[..p.len().min(3)]).ok();
    writeln!(o, "  s[{}] = {} (midpoint)", p.len() / 2, p[p.len() / 2]).ok();
    writeln!(o, "belief grid: N = {}, H = {}, L = {}", b.n_candidates(), b.resolution(), b.len()).ok();
    writeln!(
        o,
        "quadrature: {} x {} nodes, {} atoms per state",
        g.quadrature_return,
        g.quadrature_income,
        g.quadrature_return * g.quadrature_income
    )
    .ok();
    std::fs::create_dir_all(out)?;
    let mut text = format!("# learning-egm {}\n# config_hash={}\ng,s\n", io::VERSION, cfg.hash());
    for (i, v) in p.iter().enumerate() {
        writeln!(text, "{i},{v}").ok();
    }
    std::fs::write(out.join("savings_grid.csv"), text)?;
    let mut text = format!("# learning-egm {}\n# config_hash={}\nell", io::VERSION, cfg.hash());
    for i in 1..=b.n_candidates() {
        write!(text, ",theta_{i}").ok();
    }
    text.push('\n');
    for (ell, pt) in b.points().iter().enumerate() {
        write!(text, "{ell}").ok();
        for w in pt.weights() {
            write!(text, ",{w}").ok();
        }
        text.push('\n');
    }
    std::fs::write(out.join("belief_grid.csv"), text)?;
    Ok(())
}

fn check(cfg: &RunConfig, out: &Path, o: &mut String) -> Result<()> {
    let cands = cfg.candidate_set()?;
    let shocks = cfg.shocks()?;
    let report = stability_report(&cands, &shocks, cfg.p_star()?.as_ref())?;
    writeln!(o, "{report}").ok();
    let sbar = consumption_lower_bound_certificate(&cands, &shocks, &cfg.model.utility()?)?;
    match sbar {
        Some(s) => writeln!(o, "consumption lower bound: c >= {:.6} w", 1.0 - s).ok(),
        None => writeln!(o, "consumption lower bound: not certified").ok(),
    };
    std::fs::create_dir_all(out)?;
    let json = serde_json::json!({
        "version": io::VERSION,
        "config_hash": cfg.hash(),
        "report": report,
        "s_bar": sbar,
    });
    std::fs::write(out.join("stability.json"), serde_json::to_string_pretty(&json)? + "\n")?;
    report.verdict()?;
    writeln!(o, "certified").ok();
    Ok(())
}

fn policy_file(out: &Path, full_info: bool) -> PathBuf {
    out.join(if full_info { "policy_full_info.csv" } else { "policy.csv" })
}

fn problem_for(cfg: &RunConfig, full_info: bool) -> Result<Problem> {
    if full_info {
        cfg.full_info_problem()
    } else {
        cfg.problem()
    }
}

fn solve_cmd(cfg: &RunConfig, out: &Path, full_info: bool, o: &mut String) -> Result<()> {
    let problem = problem_for(cfg, full_info)?;
    let (policy, report) = solve(&problem, cfg.solver.tol, cfg.solver.max_iter, None)?;
    log::info!("solved in {:.2}s", report.wall_time);
    let path = policy_file(out, full_info);
    io::save_policy(&path, &policy, &cfg.hash(), &cfg.solve_hash(full_info), Some(&report))?;
    writeln!(
        o,
        "converged in {} iterations: max consumption change {:e}, marginal-utility change {:e}",
        report.iterations, report.final_delta, report.rho_delta
    )
    .ok();
    writeln!(o, "wrote {}", path.display()).ok();
    Ok(())
}

/// Loads a policy and works out which of the configuration's problems it
/// solves.
fn load_matching(cfg: &RunConfig, path: &Path) -> Result<(PolicyTable, bool)> {
    let (policy, side) = io::load_policy(path)?;
    for full_info in [false, true] {
        if side.solve_hash == cfg.solve_hash(full_info) {
            return Ok((policy, full_info));
        }
    }
    Err(Error::config(
        path.display().to_string(),
        "policy was solved for a different configuration",
    ))
}

fn analyze(cfg: &RunConfig, out: &Path, path: &Path, strict: bool, n_probes: usize, o: &mut String) -> Result<()> {
    let (policy, full_info) = load_matching(cfg, path)?;
    let problem = problem_for(cfg, full_info)?;
    let sbar = consumption_lower_bound_certificate(problem.candidates(), problem.shocks(), problem.utility())?;
    let probes = default_probes(&policy, n_probes);
    let d = diagnose(&problem, &policy, None, sbar, &probes);
    writeln!(o, "curves: {}", d.curves.len()).ok();
    writeln!(o, "consumption monotone in wealth: {}", d.wealth_monotone).ok();
    writeln!(o, "savings monotone in wealth: {}", d.savings_monotone).ok();
    writeln!(o, "concave: {}", d.concave).ok();
    writeln!(o, "c(w) = w below first knot: {}", d.threshold_exact).ok();
    writeln!(o, "threshold gap: {:e}", d.threshold_gap).ok();
    if let Some(m) = d.lower_bound_margin {
        writeln!(o, "lower bound margin: {m:e}").ok();
    }
    writeln!(
        o,
        "Euler residuals: max {:e}, mean {:e} over {} interior probes",
        d.residuals.max_abs, d.residuals.mean_abs, d.residuals.n_interior
    )
    .ok();
    let hash = cfg.hash();
    io::write_diagnostics(&out.join("diagnostics.csv"), &d, &hash)?;
    std::fs::write(
        out.join("diagnostics.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "version": io::VERSION,
            "config_hash": hash,
            "diagnostics": d,
        }))? + "\n",
    )?;
    let violations = d.violations(1e-3, 1e-10);
    for v in &violations {
        writeln!(o, "check failed: {v}").ok();
    }
    if strict && !violations.is_empty() {
        return Err(Error::Certification(violations.join("; ")));
    }
    Ok(())
}

fn simulate_cmd(cfg: &RunConfig, out: &Path, path: &Path, benchmark: Option<&Path>, o: &mut String) -> Result<()> {
    let (policy, full_info) = load_matching(cfg, path)?;
    let hash = cfg.hash();
    match benchmark {
        Some(bpath) => {
            let (bench, b_full) = load_matching(cfg, bpath)?;
            if full_info || !b_full {
                return Err(Error::config(
                    "--benchmark",
                    "expects --policy to be the learning policy and --benchmark the known-kernel one",
                ));
            }
            let paired = compare_learning_benchmark(
                &policy,
                &cfg.economy()?,
                &bench,
                &cfg.full_info_economy()?,
                &cfg.simulation,
            )?;
            let file = out.join("paired.csv");
            io::write_paired_statistics(&file, &paired, &hash)?;
            writeln!(o, "initial wealth {}", paired.learning.initial_wealth).ok();
            writeln!(
                o,
                "t = 0 consumption difference {:.6} (se {:.6})",
                paired.diff_consumption[0], paired.se_diff_consumption[0]
            )
            .ok();
            writeln!(o, "wrote {}", file.display()).ok();
        }
        None => {
            let (econ, sim) = if full_info {
                let mut sim = cfg.simulation.clone();
                sim.prior = Belief::vertex(1, 0);
                sim.true_kernel = 0;
                (cfg.full_info_economy()?, sim)
            } else {
                (cfg.economy()?, cfg.simulation.clone())
            };
            let st = simulate_panel(&policy, &sim, &econ)?;
            let file = out.join("paths.csv");
            io::write_path_statistics(&file, &st, &hash)?;
            let last = st.n_periods() - 1;
            writeln!(o, "initial wealth {}", st.initial_wealth).ok();
            writeln!(
                o,
                "mean consumption at t = 0: {:.6}, at t = {last}: {:.6}",
                st.mean_consumption[0], st.mean_consumption[last]
            )
            .ok();
            writeln!(o, "wrote {}", file.display()).ok();
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn oracle_compare(
    cfg: &RunConfig,
    out: &Path,
    wealth_points: usize,
    consumption_points: usize,
    tol: f64,
    max_iter: usize,
    o: &mut String,
) -> Result<()> {
    let problem = cfg.problem()?;
    let (egm, report) = solve(&problem, cfg.solver.tol, cfg.solver.max_iter, None)?;
    writeln!(o, "time iteration: {} iterations", report.iterations).ok();
    let incomes = (0..problem.n_states())
        .flat_map(|z| problem.shocks().atoms(z).iter().map(|a| a.income))
        .collect::<Vec<_>>();
    let lo = incomes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = 10.0 * incomes.iter().copied().fold(0.0, f64::max);
    let grid = geometric_probes(lo, hi, wealth_points);
    let oracle = brute_force_policy(&problem, &grid, consumption_points, tol, max_iter)?;
    writeln!(o, "value iteration: {} iterations", oracle.iterations).ok();
    let mut worst_steps = 0.0_f64;
    let mut probes = Vec::new();
    let mut text = format!(
        "# learning-egm {}\n# config_hash={}\nz,ell,w,c_egm,c_oracle,step\n",
        io::VERSION,
        cfg.hash()
    );
    for z in 0..problem.n_states() {
        for ell in 0..problem.beliefs().len() {
            for (i, &w) in grid.iter().enumerate() {
                let ce = egm.consumption(w, z, ell);
                let co = oracle.curve(z, ell)[i];
                let step = oracle.consumption_step[i];
                worst_steps = worst_steps.max((ce - co).abs() / step);
                writeln!(text, "{z},{ell},{w},{ce},{co},{step}").ok();
                probes.push((w, z, ell));
            }
        }
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("oracle.csv"), text)?;
    let (gc, gm) = compare_policies(&egm, &oracle, &probes, problem.utility());
    let re = euler_residuals(&problem, &egm, &grid);
    let ro = euler_residuals(&problem, &oracle, &grid);
    writeln!(o, "sup consumption gap {gc:e}, sup marginal-utility gap {gm:e}").ok();
    writeln!(o, "largest gap in oracle consumption steps: {worst_steps:.3}").ok();
    writeln!(o, "max Euler residual: time iteration {:e}, value iteration {:e}", re.max_abs, ro.max_abs).ok();
    if worst_steps > 2.0 || re.max_abs > ro.max_abs {
        return Err(Error::Certification(format!(
            "oracle disagreement: {worst_steps:.3} steps, residuals {:e} vs {:e}",
            re.max_abs, ro.max_abs
        )));
    }
    writeln!(o, "agreement within 2 consumption steps").ok();
    Ok(())
}
