//! Solve the small configuration and save the policy.
//!
//!     cargo run --release --example solve_policy [-- OUT_DIR]

use learning_egm::config::RunConfig;
use learning_egm::io::{load_policy, save_policy};
use learning_egm::solver::{solve, ConsumptionRule};

fn main() -> learning_egm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small.json");
    let cfg = RunConfig::load(path)?;
    let problem = cfg.problem()?;
    let (policy, report) = solve(&problem, cfg.solver.tol, cfg.solver.max_iter, None)?;
    println!(
        "{} iterations, last change {:e}, {:.2}s",
        report.iterations, report.final_delta, report.wall_time
    );

    let beliefs = problem.beliefs();
    for z in 0..problem.n_states() {
        for ell in [0, beliefs.len() - 1] {
            let th = beliefs.point(ell).weights();
            print!("z={z} theta={th:?}:");
            for w in [0.5, 1.0, 2.0, 5.0, 10.0] {
                print!("  c({w})={:.4}", policy.consumption(w, z, ell));
            }
            println!("  first knot {:.4}", policy.first_knot(z, ell));
        }
    }

    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("learning-egm").display().to_string());
    let file = std::path::Path::new(&out).join("policy.csv");
    save_policy(&file, &policy, &cfg.hash(), &cfg.solve_hash(false), Some(&report))?;
    let (back, side) = load_policy(&file)?;
    assert_eq!(back, policy);
    println!("saved {} (solve hash {})", file.display(), &side.solve_hash[..12]);
    Ok(())
}
