//! Learning household against the known-kernel benchmark, on common shocks.
//!
//!     cargo run --release --example learning_vs_full_info [-- --calibrated]
//!
//! `--calibrated` uses the reduced calibrated preset (a few seconds in release).

use learning_egm::config::RunConfig;
use learning_egm::simulate::compare_learning_benchmark;
use learning_egm::solver::solve;

fn main() -> learning_egm::Result<()> {
    let cfg = if std::env::args().any(|a| a == "--calibrated") {
        RunConfig::paper_2026().reduced()
    } else {
        RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small.json"))?
    };
    let (learn, _) = solve(&cfg.problem()?, cfg.solver.tol, cfg.solver.max_iter, None)?;
    let (full, _) = solve(&cfg.full_info_problem()?, cfg.solver.tol, cfg.solver.max_iter, None)?;
    let p = compare_learning_benchmark(&learn, &cfg.economy()?, &full, &cfg.full_info_economy()?, &cfg.simulation)?;

    println!("   t  c learn   c full     diff      se   s diff");
    let last = p.diff_consumption.len() - 1;
    for t in (0..=last).step_by((last / 10).max(1)) {
        println!(
            "{t:4} {:8.4} {:8.4} {:8.4} {:7.4} {:8.4}",
            p.learning.mean_consumption[t],
            p.full_info.mean_consumption[t],
            p.diff_consumption[t],
            p.se_diff_consumption[t],
            p.diff_savings[t]
        );
    }
    Ok(())
}
