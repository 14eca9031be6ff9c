//! Stability certificate for the calibrated two-state economy.
//!
//!     cargo run --release --example stability_check

use learning_egm::config::RunConfig;
use learning_egm::stability::{consumption_lower_bound_certificate, stability_report};

fn main() -> learning_egm::Result<()> {
    let cfg = RunConfig::paper_2026();
    let cands = cfg.candidate_set()?;
    let shocks = cfg.shocks()?;
    let report = stability_report(&cands, &shocks, None)?;
    println!("{report}");

    // how many periods until the discounted return product is below 1%
    for alpha in 0..cands.n_states() {
        let t = (1..100_000).find(|&t| report.discount_product_bound(alpha, t) < 0.01);
        println!("alpha = {alpha}: bound below 0.01 after {t:?} periods");
    }

    match consumption_lower_bound_certificate(&cands, &shocks, &cfg.model.utility()?)? {
        Some(s) => println!("consumption is at least {:.5} of wealth", 1.0 - s),
        None => println!("no linear lower bound"),
    }
    report.verdict()
}
