use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use super::grid::SavingsGrid;
use crate::belief::SimplexGrid;
use crate::error::{Error, Result};

static CLAMP_REPORTED: AtomicBool = AtomicBool::new(false);

/// Anything that maps `(w, z, belief index)` to consumption.
pub trait ConsumptionRule: Sync {
    fn consumption(&self, w: f64, z: usize, ell: usize) -> f64;
    fn n_states(&self) -> usize;
    fn n_beliefs(&self) -> usize;
}

/// Piecewise-linear consumption policy on endogenous wealth knots, one
/// curve per `(state, belief grid point)`.
///
/// Below the first knot the household consumes its wealth; above the last
/// knot the final segment is extended linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    savings: Arc<SavingsGrid>,
    beliefs: Arc<SimplexGrid>,
    n_states: usize,
    knots: Vec<f64>,
    consumption: Vec<f64>,
    model_hash: String,
}

impl PolicyTable {
    /// Assembles a table from flat `[z][ell][g]` arrays.
    pub fn from_parts(
        savings: Arc<SavingsGrid>,
        beliefs: Arc<SimplexGrid>,
        n_states: usize,
        knots: Vec<f64>,
        consumption: Vec<f64>,
        model_hash: String,
    ) -> Result<Self> {
        let expected = n_states * beliefs.len() * savings.len();
        if knots.len() != expected || consumption.len() != expected {
            return Err(Error::Domain(format!(
                "policy table needs {expected} entries, got {} knots and {} consumption values",
                knots.len(),
                consumption.len()
            )));
        }
        Ok(Self {
            savings,
            beliefs,
            n_states,
            knots,
            consumption,
            model_hash,
        })
    }

    /// The consume-everything policy `c(w) = w`, with knots on the savings
    /// grid. Its first knot sits at zero wealth with zero consumption.
    pub fn identity(
        savings: Arc<SavingsGrid>,
        beliefs: Arc<SimplexGrid>,
        n_states: usize,
        model_hash: String,
    ) -> Self {
        let per = savings.points().to_vec();
        let copies = n_states * beliefs.len();
        let knots: Vec<f64> = per.iter().copied().cycle().take(per.len() * copies).collect();
        Self {
            consumption: knots.clone(),
            knots,
            savings,
            beliefs,
            n_states,
            model_hash,
        }
    }

    pub fn savings(&self) -> &Arc<SavingsGrid> {
        &self.savings
    }

    pub fn beliefs(&self) -> &Arc<SimplexGrid> {
        &self.beliefs
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_savings(&self) -> usize {
        self.savings.len()
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn set_model_hash(&mut self, hash: String) {
        self.model_hash = hash;
    }

    #[inline]
    fn offset(&self, z: usize, ell: usize) -> usize {
        (z * self.beliefs.len() + ell) * self.savings.len()
    }

    pub fn knots(&self, z: usize, ell: usize) -> &[f64] {
        let o = self.offset(z, ell);
        &self.knots[o..o + self.savings.len()]
    }

    pub fn consumption_at_knots(&self, z: usize, ell: usize) -> &[f64] {
        let o = self.offset(z, ell);
        &self.consumption[o..o + self.savings.len()]
    }

    pub fn all_knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn all_consumption(&self) -> &[f64] {
        &self.consumption
    }

    /// First endogenous knot: the wealth below which the household
    /// consumes everything.
    pub fn first_knot(&self, z: usize, ell: usize) -> f64 {
        self.knots(z, ell)[0]
    }

    /// Consumption at wealth `w`.
    pub fn evaluate(&self, w: f64, z: usize, ell: usize) -> f64 {
        let knots = self.knots(z, ell);
        let mut hint = knots.partition_point(|k| *k <= w).saturating_sub(1);
        eval_curve(knots, self.consumption_at_knots(z, ell), w, &mut hint)
    }

    /// Checks the table invariants: increasing knots, `0 < c <= w`,
    /// nondecreasing consumption and `w_g = s_g + c_g`.
    pub fn validate(&self) -> Result<()> {
        let s = self.savings.points();
        for z in 0..self.n_states {
            for ell in 0..self.beliefs.len() {
                let w = self.knots(z, ell);
                let c = self.consumption_at_knots(z, ell);
                let at = |g: usize, what: &str| {
                    Err(Error::Numerical(format!(
                        "policy invariant violated at (g={g}, z={z}, ell={ell}): {what}"
                    )))
                };
                for g in 0..w.len() {
                    if !(c[g] > 0.0) || c[g] > w[g] || !w[g].is_finite() {
                        return at(g, "consumption outside (0, w]");
                    }
                    if (w[g] - s[g] - c[g]).abs() > 1e-12 * w[g].max(1.0) {
                        return at(g, "knot differs from savings plus consumption");
                    }
                    if g > 0 && !(w[g] > w[g - 1]) {
                        return at(g, "knots not strictly increasing");
                    }
                    if g > 0 && c[g] < c[g - 1] {
                        return at(g, "consumption decreasing");
                    }
                }
            }
        }
        Ok(())
    }
}

impl ConsumptionRule for PolicyTable {
    fn consumption(&self, w: f64, z: usize, ell: usize) -> f64 {
        self.evaluate(w, z, ell)
    }
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_beliefs(&self) -> usize {
        self.beliefs.len()
    }
}

/// Evaluates one policy curve at `w`. `hint` carries the last segment index
/// so that increasing sequences of `w` cost amortized constant time.
#[inline]
pub(crate) fn eval_curve(knots: &[f64], cons: &[f64], w: f64, hint: &mut usize) -> f64 {
    let g = knots.len();
    if w <= knots[0] {
        return w;
    }
    let mut j = (*hint).min(g - 1);
    if knots[j] > w {
        j = knots.partition_point(|k| *k <= w) - 1;
    }
    while j + 1 < g && knots[j + 1] <= w {
        j += 1;
    }
    *hint = j;
    if knots[j] == w {
        return cons[j].min(w);
    }
    let extrapolating = j + 1 == g;
    let (a, b) = if extrapolating { (g - 2, g - 1) } else { (j, j + 1) };
    let c = cons[a] + (cons[b] - cons[a]) / (knots[b] - knots[a]) * (w - knots[a]);
    if c > w {
        if extrapolating && !CLAMP_REPORTED.swap(true, Ordering::Relaxed) {
            log::warn!("extrapolated consumption {c} exceeds wealth {w}; clamped");
        }
        return w;
    }
    c
}
