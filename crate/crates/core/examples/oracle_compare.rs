//! Time iteration against brute-force value iteration on a small model.
//!
//!     cargo run --release --example oracle_compare

use learning_egm::analysis::{brute_force_policy, compare_policies, euler_residuals, geometric_probes};
use learning_egm::belief::build_simplex_grid;
use learning_egm::model::{CandidateSet, CrraUtility, Matrix, ShockAtom, StateOrder, StateShockMap};
use learning_egm::solver::{build_savings_grid, solve, ConsumptionRule, Problem};

fn main() -> learning_egm::Result<()> {
    let atom = |prob, ret, income| ShockAtom { prob, beta: 0.95, ret, income };
    let shocks = StateShockMap::new(vec![
        vec![atom(0.25, 1.01, 0.8), atom(0.5, 1.03, 1.0), atom(0.25, 1.05, 1.2)],
        vec![atom(0.25, 0.99, 0.4), atom(0.5, 1.01, 0.5), atom(0.25, 1.03, 0.6)],
    ])?;
    let p = Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]])?;
    let cands = CandidateSet::new(vec![p], StateOrder::natural(2))?;
    let problem = Problem::new(
        CrraUtility::new(2.0)?,
        cands,
        shocks,
        build_savings_grid(400, 40.0, 4.0)?,
        build_simplex_grid(1, 1)?,
    )?;

    let (egm, report) = solve(&problem, 1e-10, 10_000, None)?;
    let grid = geometric_probes(0.4, 12.0, 50);
    let vfi = brute_force_policy(&problem, &grid, 200, 1e-10, 10_000)?;
    println!("time iteration {} steps, value iteration {} steps", report.iterations, vfi.iterations);

    let probes: Vec<_> = (0..2).flat_map(|z| grid.iter().map(move |&w| (w, z, 0))).collect();
    let (gc, gm) = compare_policies(&egm, &vfi, &probes, problem.utility());
    let steps = probes
        .iter()
        .enumerate()
        .map(|(i, &(w, z, _))| (egm.consumption(w, z, 0) - vfi.consumption(w, z, 0)).abs() / vfi.consumption_step[i % grid.len()])
        .fold(0.0, f64::max);
    println!("sup |dc| = {gc:.5}, sup |du'| = {gm:.5}, {steps:.2} oracle steps");
    println!(
        "max Euler residual: time iteration {:e}, value iteration {:e}",
        euler_residuals(&problem, &egm, &grid).max_abs,
        euler_residuals(&problem, &vfi, &grid).max_abs
    );
    Ok(())
}
