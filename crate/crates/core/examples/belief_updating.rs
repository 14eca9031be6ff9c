//! Bayes updating along a simulated chain: the posterior concentrates on the
//! kernel that generated the data.
//!
//!     cargo run --release --example belief_updating

use learning_egm::belief::{bayes_update, mixture_kernel, Belief};
use learning_egm::config::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> learning_egm::Result<()> {
    let cfg = RunConfig::paper_2026();
    let cands = cfg.candidate_set()?;
    let truth = cands.get(1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut theta = Belief::uniform(cands.len());
    let mut z = 0;
    for t in 1..=600 {
        let u: f64 = rng.random();
        let z_next = if u < truth.get(z, 0) { 0 } else { 1 };
        theta = bayes_update(&cands, &theta, z, z_next)?;
        z = z_next;
        if t % 60 == 0 {
            println!("t = {t:3}  state {z}  theta = [{:.4}, {:.4}]", theta.weights()[0], theta.weights()[1]);
        }
    }

    let mix = mixture_kernel(&cands, &Belief::uniform(2));
    println!("mixture kernel at the uniform prior: {:?}", mix.rows());
    Ok(())
}
