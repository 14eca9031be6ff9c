//! Time iteration on the Euler equation with endogenous wealth grids.
//!
//! For every savings node `s_g`, state `z` and belief grid point `theta_l`
//! one sweep computes
//!
//! ```text
//! c~ = (u')^{-1}( min{ sum_zn P_theta(z, zn) E_zn[beta R u'(c(R s_g + Y, zn, proj(theta')))], u'(0) } )
//! ```
//!
//! and places the new knot at `w = s_g + c~`. The inner expectation depends
//! on `(zn, proj(theta'), g)` only, so it is computed once per reachable
//! next-period belief index and shared by every `(z, theta_l)` that leads
//! there.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SavingsGrid;
use super::policy::{eval_curve, ConsumptionRule, PolicyTable};
use crate::belief::{bayes_update, mixture_prob, Belief, SimplexGrid};
use crate::error::{Error, Result};
use crate::model::{CandidateSet, CrraUtility, StateShockMap};
use crate::stability::stability_report;

/// A possible next state with its subjective probability and the grid
/// index of the projected posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub prob: f64,
    pub next_belief: usize,
}

/// Everything the solver needs about the environment, with the
/// iteration-invariant Bayes updates precomputed.
#[derive(Debug, Clone)]
pub struct Problem {
    utility: CrraUtility,
    candidates: CandidateSet,
    shocks: StateShockMap,
    savings: Arc<SavingsGrid>,
    beliefs: Arc<SimplexGrid>,
    transitions: Vec<Vec<Transition>>,
    model_hash: String,
}

impl Problem {
    pub fn new(
        utility: CrraUtility,
        candidates: CandidateSet,
        shocks: StateShockMap,
        savings: SavingsGrid,
        beliefs: SimplexGrid,
    ) -> Result<Self> {
        let m = candidates.n_states();
        if shocks.n_states() != m {
            return Err(Error::Domain(format!(
                "shock map has {} states, candidates have {m}",
                shocks.n_states()
            )));
        }
        if beliefs.n_candidates() != candidates.len() {
            return Err(Error::Domain(format!(
                "belief grid is over {} candidates, candidate set has {}",
                beliefs.n_candidates(),
                candidates.len()
            )));
        }
        shocks.check_finite_moments(&utility)?;
        let l = beliefs.len();
        let mut transitions = Vec::with_capacity(m * l);
        for z in 0..m {
            for ell in 0..l {
                let theta = beliefs.point(ell);
                let mut row = Vec::with_capacity(m);
                for zn in 0..m {
                    let prob = mixture_prob(&candidates, theta, z, zn);
                    // zero subjective probability is exactly the zero-denominator case
                    if prob > 0.0 {
                        let post = bayes_update(&candidates, theta, z, zn)?;
                        row.push(Transition {
                            next_state: zn,
                            prob,
                            next_belief: beliefs.project(&post),
                        });
                    }
                }
                transitions.push(row);
            }
        }
        Ok(Self {
            utility,
            candidates,
            shocks,
            savings: Arc::new(savings),
            beliefs: Arc::new(beliefs),
            transitions,
            model_hash: String::new(),
        })
    }

    /// Tags policies produced for this problem with an environment hash.
    pub fn with_model_hash(mut self, hash: impl Into<String>) -> Self {
        self.model_hash = hash.into();
        self
    }

    pub fn utility(&self) -> &CrraUtility {
        &self.utility
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn shocks(&self) -> &StateShockMap {
        &self.shocks
    }

    pub fn savings(&self) -> &Arc<SavingsGrid> {
        &self.savings
    }

    pub fn beliefs(&self) -> &Arc<SimplexGrid> {
        &self.beliefs
    }

    pub fn n_states(&self) -> usize {
        self.candidates.n_states()
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    /// Reachable next states from `(z, theta_ell)`.
    pub fn transitions(&self, z: usize, ell: usize) -> &[Transition] {
        &self.transitions[z * self.beliefs.len() + ell]
    }

    /// Same problem with every income atom scaled by `factor`.
    pub fn with_scaled_income(&self, factor: f64) -> Result<Self> {
        let mut p = self.clone();
        p.shocks = self.shocks.scale_income(factor)?;
        p.shocks.check_finite_moments(&p.utility)?;
        Ok(p)
    }

    /// The consume-everything starting policy.
    pub fn initial_policy(&self) -> PolicyTable {
        PolicyTable::identity(
            self.savings.clone(),
            self.beliefs.clone(),
            self.n_states(),
            self.model_hash.clone(),
        )
    }

    /// `E_zn[beta R u'(c(R s + Y, zn, ell_n))]` for one savings value.
    pub fn expected_marginal_value<P: ConsumptionRule + ?Sized>(
        &self,
        prev: &P,
        s: f64,
        zn: usize,
        ell_n: usize,
    ) -> f64 {
        self.shocks.expect(zn, |a| {
            let w = a.ret * s + a.income;
            a.beta * a.ret * self.utility.mu(prev.consumption(w, zn, ell_n))
        })
    }
}

/// Right side of the Euler equation at savings `s` in state `z` under an
/// arbitrary belief `theta`, which is updated and projected per next state.
pub fn euler_rhs<P: ConsumptionRule + ?Sized>(
    problem: &Problem,
    prev: &P,
    s: f64,
    z: usize,
    theta: &Belief,
) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("savings must be nonnegative, got {s}")));
    }
    let cands = &problem.candidates;
    let mut total = 0.0;
    for zn in 0..problem.n_states() {
        let prob = mixture_prob(cands, theta, z, zn);
        if prob == 0.0 {
            continue;
        }
        let post = bayes_update(cands, theta, z, zn)?;
        let ell_n = problem.beliefs.project(&post);
        total += prob * problem.expected_marginal_value(prev, s, zn, ell_n);
    }
    Ok(total)
}

/// Same as [`euler_rhs`] for a belief grid point, using the precomputed
/// transitions.
pub fn euler_rhs_on_grid<P: ConsumptionRule + ?Sized>(
    problem: &Problem,
    prev: &P,
    s: f64,
    z: usize,
    ell: usize,
) -> f64 {
    problem
        .transitions(z, ell)
        .iter()
        .map(|t| t.prob * problem.expected_marginal_value(prev, s, t.next_state, t.next_belief))
        .sum()
}

/// Inner expectation over the savings grid for one `(zn, ell_n)` pair,
/// walking each atom's increasing wealth sequence with a segment hint.
fn expected_marginal_on_grid(problem: &Problem, prev: &PolicyTable, zn: usize, ell_n: usize) -> Vec<f64> {
    let s = problem.savings.points();
    let knots = prev.knots(zn, ell_n);
    let cons = prev.consumption_at_knots(zn, ell_n);
    let u = &problem.utility;
    let mut acc = vec![0.0; s.len()];
    for a in problem.shocks.atoms(zn) {
        let scale = a.prob * a.beta * a.ret;
        let mut hint = 0;
        for (g, &sg) in s.iter().enumerate() {
            let w = a.ret * sg + a.income;
            acc[g] += scale * u.mu(eval_curve(knots, cons, w, &mut hint));
        }
    }
    acc
}

/// One policy update over every `(s_g, z, theta_l)`.
pub fn egm_step(prev: &PolicyTable, problem: &Problem) -> Result<PolicyTable> {
    let m = problem.n_states();
    let l = problem.beliefs.len();
    let g_len = problem.savings.len();

    let mut needed = vec![false; m * l];
    for row in &problem.transitions {
        for t in row {
            needed[t.next_state * l + t.next_belief] = true;
        }
    }
    let expectations: Vec<Option<Vec<f64>>> = (0..m * l)
        .into_par_iter()
        .map(|k| needed[k].then(|| expected_marginal_on_grid(problem, prev, k / l, k % l)))
        .collect();

    let u = &problem.utility;
    let cap = u.marginal_at_zero();
    let s = problem.savings.points();
    let mut knots = vec![0.0; m * l * g_len];
    let mut consumption = vec![0.0; m * l * g_len];
    for z in 0..m {
        for ell in 0..l {
            let base = (z * l + ell) * g_len;
            let trans = problem.transitions(z, ell);
            for g in 0..g_len {
                let mut rhs = 0.0;
                for t in trans {
                    let q = expectations[t.next_state * l + t.next_belief]
                        .as_ref()
                        .expect("reachable pair computed");
                    rhs += t.prob * q[g];
                }
                let target = if cap.is_finite() { rhs.min(cap) } else { rhs };
                let c = u.inverse_marginal_utility(target);
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::Numerical(format!(
                        "non-finite consumption {c} at (g={g}, z={z}, ell={ell})"
                    )));
                }
                consumption[base + g] = c;
                knots[base + g] = s[g] + c;
            }
        }
    }
    PolicyTable::from_parts(
        problem.savings.clone(),
        problem.beliefs.clone(),
        m,
        knots,
        consumption,
        problem.model_hash.clone(),
    )
}

/// Outcome of a time-iteration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// Largest absolute consumption change at fixed `(g, z, ell)`.
    pub final_delta: f64,
    /// Largest absolute marginal-utility change at fixed indices.
    pub rho_delta: f64,
    pub converged: bool,
    /// Seconds; not serialized so that artifacts are reproducible.
    #[serde(skip, default)]
    pub wall_time: f64,
    pub tolerance: f64,
    pub delta_history: Vec<f64>,
    pub rho_history: Vec<f64>,
}

/// `(max |c1 - c0|, max |u'(c1) - u'(c0)|)` at matching indices. Entries with
/// zero consumption (the starting policy's corner) are left out of the
/// marginal-utility distance.
pub fn policy_deltas(a: &PolicyTable, b: &PolicyTable, u: &CrraUtility) -> (f64, f64) {
    let mut dc = 0.0_f64;
    let mut dm = 0.0_f64;
    for (x, y) in a.all_consumption().iter().zip(b.all_consumption()) {
        dc = dc.max((x - y).abs());
        if *x > 0.0 && *y > 0.0 {
            dm = dm.max((u.mu(*x) - u.mu(*y)).abs());
        }
    }
    (dc, dm)
}

/// Iterates [`egm_step`] until the largest consumption change at fixed
/// indices drops below `tol`.
pub fn solve(
    problem: &Problem,
    tol: f64,
    max_iter: usize,
    initial: Option<PolicyTable>,
) -> Result<(PolicyTable, ConvergenceReport)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    match stability_report(&problem.candidates, &problem.shocks, None) {
        Ok(r) if r.certified() => {}
        Ok(r) => log::warn!(
            "solving without a stability certificate: {}",
            r.verdict().unwrap_err()
        ),
        Err(e) => log::warn!("stability report unavailable: {e}"),
    }
    let start = Instant::now();
    let mut current = initial.unwrap_or_else(|| problem.initial_policy());
    let mut deltas = Vec::new();
    let mut rhos = Vec::new();
    for it in 1..=max_iter {
        let next = egm_step(&current, problem)?;
        let (dc, dm) = policy_deltas(&next, &current, &problem.utility);
        deltas.push(dc);
        rhos.push(dm);
        current = next;
        if it % 500 == 0 {
            log::debug!("iteration {it}: delta {dc:e}, rho {dm:e}");
        }
        if dc < tol {
            let report = ConvergenceReport {
                iterations: it,
                final_delta: dc,
                rho_delta: dm,
                converged: true,
                wall_time: start.elapsed().as_secs_f64(),
                tolerance: tol,
                delta_history: deltas,
                rho_history: rhos,
            };
            return Ok((current, report));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last_delta: deltas.last().copied().unwrap_or(f64::NAN),
        history: deltas,
    })
}

/// Applies [`egm_step`] exactly `n` times.
pub fn iterate(problem: &Problem, n: usize, initial: Option<PolicyTable>) -> Result<PolicyTable> {
    let mut current = initial.unwrap_or_else(|| problem.initial_policy());
    for _ in 0..n {
        current = egm_step(&current, problem)?;
    }
    Ok(current)
}
