//! Savings grid, belief simplex and quadrature for the small configuration.
//!
//!     cargo run --release --example grid_info

use learning_egm::belief::{build_simplex_grid, project_to_grid, Belief};
use learning_egm::config::RunConfig;
use learning_egm::quadrature::gauss_hermite_normal;
use learning_egm::solver::build_savings_grid;

fn main() -> learning_egm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small.json");
    let cfg = RunConfig::load(path)?;

    let s = build_savings_grid(cfg.grids.savings_points, cfg.grids.s_max, cfg.grids.s_median)?;
    let p = s.points();
    println!("savings: {} points, s[1] = {:.4}, s[mid] = {:.4}, s[last] = {}", p.len(), p[1], p[p.len() / 2], p[p.len() - 1]);

    // three candidates at resolution 20
    let grid = build_simplex_grid(3, 20)?;
    println!("simplex N=3 H=20: L = {}", grid.len());
    let theta = Belief::new(vec![0.31, 0.52, 0.17])?;
    let ell = project_to_grid(&grid, &theta);
    println!("{:?} projects to {:?}", theta.weights(), grid.point(ell).weights());

    let rule = gauss_hermite_normal(7)?;
    let m2 = rule.expect(|x| x * x);
    let m4 = rule.expect(|x| x.powi(4));
    println!("7-node Gauss-Hermite: E[x^2] = {m2:.12}, E[x^4] = {m4:.12}");

    let shocks = cfg.shocks()?;
    for z in 0..shocks.n_states() {
        let er = shocks.expect(z, |a| a.ret);
        let ey = shocks.expect(z, |a| a.income);
        println!("state {z}: {} atoms, E[R] = {er:.6}, E[Y] = {ey:.6}", shocks.atoms(z).len());
    }
    Ok(())
}
