//! Structural checks, Euler residuals and the high-wealth MPC.
//!
//!     cargo run --release --example analyze_policy

use learning_egm::analysis::{asymptotic_mpc, default_probes, diagnose};
use learning_egm::config::RunConfig;
use learning_egm::solver::solve;
use learning_egm::stability::consumption_lower_bound_certificate;

fn main() -> learning_egm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small.json");
    let cfg = RunConfig::load(path)?;
    let problem = cfg.problem()?;
    let (policy, _) = solve(&problem, cfg.solver.tol, cfg.solver.max_iter, None)?;
    let sbar = consumption_lower_bound_certificate(problem.candidates(), problem.shocks(), problem.utility())?;

    let d = diagnose(&problem, &policy, None, sbar, &default_probes(&policy, 300));
    println!("monotone: c {} s {}, concave {}", d.wealth_monotone, d.savings_monotone, d.concave);
    println!("binding region exact: {} (gap {:e})", d.threshold_exact, d.threshold_gap);
    println!("Euler residual: max {:e}, mean {:e}", d.residuals.max_abs, d.residuals.mean_abs);
    if let Some(m) = d.lower_bound_margin {
        println!("lower bound slack {m:.4}");
    }
    for z in 0..problem.n_states() {
        let m = asymptotic_mpc(&policy, z, 0);
        println!("z={z}: MPC top decile {:.4}, last segment {:.4}", m.top_decile, m.top_segment);
    }
    let bad = d.violations(1e-3, 1e-10);
    if bad.is_empty() {
        println!("all checks pass");
    } else {
        println!("failed: {bad:?}");
    }
    Ok(())
}
