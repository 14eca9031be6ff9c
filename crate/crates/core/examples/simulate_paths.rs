//! Monte Carlo panel under learning.
//!
//!     cargo run --release --example simulate_paths

use learning_egm::config::RunConfig;
use learning_egm::simulate::simulate_panel;
use learning_egm::solver::solve;

fn main() -> learning_egm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small.json");
    let cfg = RunConfig::load(path)?;
    let (policy, _) = solve(&cfg.problem()?, cfg.solver.tol, cfg.solver.max_iter, None)?;
    let st = simulate_panel(&policy, &cfg.simulation, &cfg.economy()?)?;

    println!("{} paths from w0 = {:.4}", st.n_paths, st.initial_wealth);
    println!("   t   mean c    se c   mean s   vol c  theta_2  P(z=0)");
    for t in (0..st.n_periods()).step_by(12) {
        println!(
            "{t:4} {:8.4} {:7.4} {:8.4} {:7.4} {:8.4} {:7.4}",
            st.mean_consumption[t],
            st.se_consumption[t],
            st.mean_savings[t],
            st.consumption_volatility[t],
            st.mean_posterior[t][1],
            st.state_frequency[t][0]
        );
    }
    Ok(())
}
