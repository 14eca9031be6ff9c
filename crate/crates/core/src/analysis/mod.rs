//! Post-solve diagnostics: Euler residuals, binding thresholds, asymptotic
//! marginal propensities and the structural property checks.

mod oracle;

pub use oracle::{brute_force_policy, compare_policies, TabulatedPolicy};

use serde::{Deserialize, Serialize};

use crate::solver::{euler_rhs_on_grid, ConsumptionRule, PolicyTable, Problem};

/// Summary of Euler equation errors over a probe set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    /// Largest relative residual in consumption units.
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Largest residual in marginal-utility units.
    pub max_marginal: f64,
    pub n_interior: usize,
    pub n_probes: usize,
}

/// Relative Euler residual `1 - c_implied / c` at one node, where
/// `c_implied` inverts the right-hand side clamped to `[u'(w), u'(0)]`.
/// Also returns the residual in marginal-utility units.
pub fn euler_residual<P: ConsumptionRule + ?Sized>(
    problem: &Problem,
    rule: &P,
    w: f64,
    z: usize,
    ell: usize,
) -> (f64, f64) {
    let u = problem.utility();
    let c = rule.consumption(w, z, ell);
    let rhs = euler_rhs_on_grid(problem, rule, (w - c).max(0.0), z, ell);
    let clamped = rhs.max(u.mu(w)).min(u.marginal_at_zero());
    let implied = u.inverse_marginal_utility(clamped);
    (1.0 - implied / c, (u.mu(c) - clamped).abs())
}

/// Residuals at every `(w, z, ell)` with `w` drawn from `probe_wealths`.
/// Interior nodes are those where the rule leaves positive savings.
pub fn euler_residuals<P: ConsumptionRule + ?Sized>(
    problem: &Problem,
    rule: &P,
    probe_wealths: &[f64],
) -> ResidualStats {
    let mut st = ResidualStats {
        max_abs: 0.0,
        mean_abs: 0.0,
        max_marginal: 0.0,
        n_interior: 0,
        n_probes: 0,
    };
    let mut total = 0.0;
    for z in 0..rule.n_states() {
        for ell in 0..rule.n_beliefs() {
            for &w in probe_wealths {
                st.n_probes += 1;
                if rule.consumption(w, z, ell) >= w {
                    continue;
                }
                let (r, rm) = euler_residual(problem, rule, w, z, ell);
                st.n_interior += 1;
                st.max_abs = st.max_abs.max(r.abs());
                st.max_marginal = st.max_marginal.max(rm);
                total += r.abs();
            }
        }
    }
    if st.n_interior > 0 {
        st.mean_abs = total / st.n_interior as f64;
    }
    st
}

/// `n` wealth levels spaced geometrically from `lo` to `hi`.
pub fn geometric_probes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Probe wealths between the smallest first knot and half the savings
/// grid's upper end, kept away from the extrapolation region.
pub fn default_probes(p: &PolicyTable, n: usize) -> Vec<f64> {
    let s = p.savings().points();
    let lo = (0..p.n_states())
        .flat_map(|z| (0..p.n_beliefs()).map(move |ell| (z, ell)))
        .map(|(z, ell)| p.first_knot(z, ell))
        .fold(f64::INFINITY, f64::min);
    geometric_probes(0.5 * lo, 0.5 * s[s.len() - 1], n)
}

/// Wealth below which the household consumes everything:
/// `(u')^{-1}(min{rhs at s = 0, u'(0)})`, with the right-hand side built
/// from `prev`.
pub fn binding_threshold<P: ConsumptionRule + ?Sized>(
    problem: &Problem,
    prev: &P,
    z: usize,
    ell: usize,
) -> f64 {
    let u = problem.utility();
    let rhs = euler_rhs_on_grid(problem, prev, 0.0, z, ell);
    u.inverse_marginal_utility(rhs.min(u.marginal_at_zero()))
}

/// Slope estimates of consumption at high wealth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcEstimate {
    /// Secant over the top decile of knots.
    pub top_decile: f64,
    /// Slope of the last segment.
    pub top_segment: f64,
}

pub fn asymptotic_mpc(p: &PolicyTable, z: usize, ell: usize) -> MpcEstimate {
    let w = p.knots(z, ell);
    let c = p.consumption_at_knots(z, ell);
    let g = w.len();
    let span = (g / 10).max(1);
    let slope = |a: usize, b: usize| ((c[b] - c[a]) / (w[b] - w[a])).clamp(0.0, 1.0);
    MpcEstimate {
        top_decile: slope(g - 1 - span, g - 1),
        top_segment: slope(g - 2, g - 1),
    }
}

/// Per-curve diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDiagnostics {
    pub z: usize,
    pub ell: usize,
    pub binding_threshold: f64,
    pub first_knot: f64,
    pub mpc: MpcEstimate,
    pub max_residual: f64,
    pub monotone: bool,
    pub concave: bool,
}

/// Outcome of the structural checks on a converged policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDiagnostics {
    pub curves: Vec<CurveDiagnostics>,
    pub residuals: ResidualStats,
    /// Consumption and savings nondecreasing in wealth (slack `1e-10`).
    pub wealth_monotone: bool,
    pub savings_monotone: bool,
    /// Secant slopes in `[0, 1]` and nonincreasing (slack `1e-8`).
    pub concave: bool,
    /// `c(w) = w` exactly at and below the first knot and `c < w` above it.
    pub threshold_exact: bool,
    /// Largest gap between the first knot and the threshold formula.
    pub threshold_gap: f64,
    /// `min_knots (c - (1 - s_bar) w)` when a certificate exists.
    pub lower_bound_margin: Option<f64>,
}

impl PolicyDiagnostics {
    pub fn violations(&self, residual_bound: f64, threshold_tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !self.wealth_monotone {
            out.push("consumption decreasing in wealth".to_string());
        }
        if !self.savings_monotone {
            out.push("savings decreasing in wealth".to_string());
        }
        if !self.concave {
            out.push("consumption not concave".to_string());
        }
        if !self.threshold_exact {
            out.push("c(w) = w does not hold exactly below the first knot".to_string());
        }
        if !(self.threshold_gap <= threshold_tol) {
            out.push(format!(
                "first knot differs from the threshold formula by {:e}",
                self.threshold_gap
            ));
        }
        if let Some(m) = self.lower_bound_margin {
            if m < -1e-8 {
                out.push(format!("consumption lower bound violated by {:e}", -m));
            }
        }
        if !(self.residuals.max_abs < residual_bound) {
            out.push(format!(
                "max Euler residual {:e} exceeds {residual_bound:e}",
                self.residuals.max_abs
            ));
        }
        out
    }
}

const MONO_SLACK: f64 = 1e-10;
const CONCAVE_SLACK: f64 = 1e-8;

/// Runs every structural check on `policy`.
///
/// `prev` is the iterate `policy` was computed from, when known: the
/// threshold formula evaluated on it reproduces the first knot to rounding.
/// Otherwise `policy` is used and the gap is of the order of the solver
/// tolerance.
pub fn diagnose(
    problem: &Problem,
    policy: &PolicyTable,
    prev: Option<&PolicyTable>,
    lower_bound: Option<f64>,
    probes: &[f64],
) -> PolicyDiagnostics {
    let mut d = PolicyDiagnostics {
        curves: Vec::new(),
        residuals: euler_residuals(problem, policy, probes),
        wealth_monotone: true,
        savings_monotone: true,
        concave: true,
        threshold_exact: true,
        threshold_gap: 0.0,
        lower_bound_margin: None,
    };
    let s = policy.savings().points();
    let base = prev.unwrap_or(policy);
    let mut margin = f64::INFINITY;
    for z in 0..policy.n_states() {
        for ell in 0..policy.n_beliefs() {
            let w = policy.knots(z, ell);
            let c = policy.consumption_at_knots(z, ell);
            let mut monotone = true;
            let mut concave = true;
            // the constrained region contributes a virtual node at the origin
            let mut last_slope = 1.0;
            let (mut pw, mut pc) = (0.0, 0.0);
            for g in 0..w.len() {
                if g > 0 {
                    monotone &= c[g] >= c[g - 1] - MONO_SLACK;
                    d.savings_monotone &= (w[g] - c[g]) >= (w[g - 1] - c[g - 1]) - MONO_SLACK;
                }
                let slope = (c[g] - pc) / (w[g] - pw);
                concave &= slope <= last_slope + CONCAVE_SLACK && slope >= -MONO_SLACK;
                last_slope = slope;
                pw = w[g];
                pc = c[g];
                if let Some(sb) = lower_bound {
                    margin = margin.min(c[g] - (1.0 - sb) * w[g]);
                }
            }
            let first = w[0];
            for f in [0.25, 0.5, 1.0] {
                let x = f * first;
                d.threshold_exact &= policy.evaluate(x, z, ell) == x;
            }
            d.threshold_exact &= s.len() < 2 || policy.evaluate(w[1], z, ell) < w[1];
            let thr = binding_threshold(problem, base, z, ell);
            d.threshold_gap = d.threshold_gap.max((thr - first).abs());
            let own = euler_residuals_curve(problem, policy, probes, z, ell);
            d.wealth_monotone &= monotone;
            d.concave &= concave;
            d.curves.push(CurveDiagnostics {
                z,
                ell,
                binding_threshold: thr,
                first_knot: first,
                mpc: asymptotic_mpc(policy, z, ell),
                max_residual: own,
                monotone,
                concave,
            });
        }
    }
    if lower_bound.is_some() {
        d.lower_bound_margin = Some(margin);
    }
    d
}

fn euler_residuals_curve(problem: &Problem, p: &PolicyTable, probes: &[f64], z: usize, ell: usize) -> f64 {
    probes
        .iter()
        .filter(|&&w| p.evaluate(w, z, ell) < w)
        .map(|&w| euler_residual(problem, p, w, z, ell).0.abs())
        .fold(0.0, f64::max)
}

/// Smallest gap `c_hi - c_lo` between two policies on a probe set, per
/// `(z, ell)`; nonnegative when `hi` consumes weakly more everywhere.
pub fn min_consumption_gap<A, B>(hi: &A, lo: &B, probes: &[f64]) -> f64
where
    A: ConsumptionRule + ?Sized,
    B: ConsumptionRule + ?Sized,
{
    let mut gap = f64::INFINITY;
    for z in 0..hi.n_states() {
        for ell in 0..hi.n_beliefs() {
            for &w in probes {
                gap = gap.min(hi.consumption(w, z, ell) - lo.consumption(w, z, ell));
            }
        }
    }
    gap
}
