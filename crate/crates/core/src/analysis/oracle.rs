//! Value function iteration on a wealth grid, used as an independent check
//! of the time-iteration fixed point on small problems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CrraUtility;
use crate::solver::{ConsumptionRule, Problem};

const MAX_NODES: usize = 1_000_000;

/// Consumption tabulated on a fixed wealth grid per `(z, ell)`.
///
/// Between nodes it is linear, below the first node it runs to the origin
/// and above the last node it extends the final segment. It never exceeds
/// wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPolicy {
    pub wealth: Vec<f64>,
    /// `[z][ell][i]`
    pub consumption: Vec<f64>,
    pub n_states: usize,
    pub n_beliefs: usize,
    pub iterations: usize,
    pub final_delta: f64,
    /// Spacing of the consumption grid at each wealth node.
    pub consumption_step: Vec<f64>,
}

impl TabulatedPolicy {
    pub fn curve(&self, z: usize, ell: usize) -> &[f64] {
        let n = self.wealth.len();
        let o = (z * self.n_beliefs + ell) * n;
        &self.consumption[o..o + n]
    }
}

impl ConsumptionRule for TabulatedPolicy {
    fn consumption(&self, w: f64, z: usize, ell: usize) -> f64 {
        interpolate_through_origin(&self.wealth, self.curve(z, ell), w).min(w)
    }
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_beliefs(&self) -> usize {
        self.n_beliefs
    }
}

fn interpolate_through_origin(x: &[f64], y: &[f64], w: f64) -> f64 {
    if w <= x[0] {
        return y[0] / x[0] * w;
    }
    linear(x, y, w)
}

/// Piecewise-linear interpolation, extended linearly past both ends.
fn linear(x: &[f64], y: &[f64], w: f64) -> f64 {
    let n = x.len();
    let j = x.partition_point(|v| *v <= w).clamp(1, n - 1);
    let (a, b) = (j - 1, j);
    y[a] + (y[b] - y[a]) / (x[b] - x[a]) * (w - x[a])
}

fn certainty_equivalent(u: &CrraUtility, v: f64) -> f64 {
    if u.is_log() {
        v.exp()
    } else {
        let g = u.gamma();
        ((1.0 - g) * v).powf(1.0 / (1.0 - g))
    }
}

/// Solves the Bellman equation on `wealth_grid` by value iteration, with
/// consumption chosen from `c_k = w k / n_consumption`, `k = 1..n`.
///
/// Continuation values are interpolated linearly in certainty-equivalent
/// units `u^{-1}(V)`, which are close to linear in wealth under CRRA.
/// Returns the maximizing consumption at every node.
pub fn brute_force_policy(
    problem: &Problem,
    wealth_grid: &[f64],
    n_consumption: usize,
    tol: f64,
    max_iter: usize,
) -> Result<TabulatedPolicy> {
    let m = problem.n_states();
    let l = problem.beliefs().len();
    let n = wealth_grid.len();
    if n < 2 || wealth_grid[0] <= 0.0 || wealth_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain(
            "oracle wealth grid must be positive and strictly increasing".into(),
        ));
    }
    if n_consumption == 0 {
        return Err(Error::Domain("oracle needs at least one consumption choice".into()));
    }
    if n * m * l > MAX_NODES {
        return Err(Error::Resource(format!(
            "oracle state space {} exceeds {MAX_NODES}",
            n * m * l
        )));
    }
    let u = problem.utility();
    let idx = |z: usize, ell: usize| (z * l + ell) * n;
    let mut v: Vec<f64> = (0..m * l).flat_map(|_| wealth_grid.iter().map(|w| u.utility(*w))).collect();
    let mut policy = vec![0.0; m * l * n];
    let mut delta = f64::INFINITY;
    for it in 1..=max_iter {
        let ce: Vec<f64> = v.iter().map(|x| certainty_equivalent(u, *x)).collect();
        let mut next = vec![0.0; m * l * n];
        for z in 0..m {
            for ell in 0..l {
                let trans = problem.transitions(z, ell);
                for (i, &w) in wealth_grid.iter().enumerate() {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = w;
                    for k in 1..=n_consumption {
                        let c = w * k as f64 / n_consumption as f64;
                        let s = w - c;
                        let mut cont = 0.0;
                        for t in trans {
                            let cn = &ce[idx(t.next_state, t.next_belief)..][..n];
                            let e = problem.shocks().expect(t.next_state, |a| {
                                let x = linear(wealth_grid, cn, a.ret * s + a.income);
                                a.beta * u.utility(x.max(f64::MIN_POSITIVE))
                            });
                            cont += t.prob * e;
                        }
                        let val = u.utility(c) + cont;
                        if val > best {
                            best = val;
                            arg = c;
                        }
                    }
                    next[idx(z, ell) + i] = best;
                    policy[idx(z, ell) + i] = arg;
                }
            }
        }
        delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if !delta.is_finite() {
            return Err(Error::Numerical(format!(
                "value iteration produced a non-finite update at iteration {it}"
            )));
        }
        if delta < tol {
            return Ok(TabulatedPolicy {
                wealth: wealth_grid.to_vec(),
                consumption: policy,
                n_states: m,
                n_beliefs: l,
                iterations: it,
                final_delta: delta,
                consumption_step: wealth_grid
                    .iter()
                    .map(|w| w / n_consumption as f64)
                    .collect(),
            });
        }
    }
    Err(Error::Numerical(format!(
        "value iteration did not reach {tol:e} in {max_iter} iterations (last delta {delta:e})"
    )))
}

/// Sup distance between two rules over `(w, z, ell)` probes, in consumption
/// and in marginal-utility units.
pub fn compare_policies<A, B>(a: &A, b: &B, probes: &[(f64, usize, usize)], u: &CrraUtility) -> (f64, f64)
where
    A: ConsumptionRule + ?Sized,
    B: ConsumptionRule + ?Sized,
{
    let mut gc = 0.0_f64;
    let mut gm = 0.0_f64;
    for &(w, z, ell) in probes {
        let (ca, cb) = (a.consumption(w, z, ell), b.consumption(w, z, ell));
        gc = gc.max((ca - cb).abs());
        gm = gm.max((u.mu(ca) - u.mu(cb)).abs());
    }
    (gc, gm)
}
