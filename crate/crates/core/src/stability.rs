//! Stability certificates for the learning problem.
//!
//! The solver's fixed point is well defined when some irreducible, monotone
//! kernel `P*` dominates every candidate in the first-order stochastic sense
//! and `r(P* D_a) < 1` for `a` in `{0, 1}`, where `D_a` is the diagonal of
//! expected discounted returns `E_z[beta R^a]`. This module checks those
//! hypotheses, constructs `P*` when it is not given, and derives the common
//! upper eigenvector `x_a` with its contraction factor
//! `eta_a = max_i max_z (P_i D_a x_a)(z) / x_a(z)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{CandidateSet, CrraUtility, Matrix, StateOrder, StateShockMap};
use serde::{Deserialize, Serialize};

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 1_000_000;
/// Iterations before a non-settling power iteration is treated as periodic.
const OSCILLATION_PATIENCE: usize = 10_000;
const ORDER_TOL: f64 = 1e-12;

/// Diagonals of `D_0` and `D_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedReturnDiagonal {
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
}

impl DiscountedReturnDiagonal {
    pub fn get(&self, alpha: usize) -> &[f64] {
        match alpha {
            0 => &self.d0,
            _ => &self.d1,
        }
    }
}

pub fn compute_discount_diagonal(shocks: &StateShockMap) -> DiscountedReturnDiagonal {
    let m = shocks.n_states();
    DiscountedReturnDiagonal {
        d0: (0..m).map(|z| shocks.expect(z, |a| a.beta)).collect(),
        d1: (0..m).map(|z| shocks.expect(z, |a| a.beta * a.ret)).collect(),
    }
}

/// Dominant eigenvalue and eigenvector of a nonnegative matrix by power
/// iteration from the all-ones vector. The vector is scaled to unit maximum.
///
/// When the estimate keeps oscillating (periodic matrices), iteration
/// switches to `(A + r I) / (1 + r)`, which has the same Perron vector and a
/// strictly dominant root.
pub fn perron_pair(a: &Matrix) -> Result<(f64, Vec<f64>)> {
    if !a.is_nonnegative() {
        return Err(Error::Domain("power iteration needs a nonnegative matrix".into()));
    }
    let n = a.dim();
    let shift = (0..n)
        .map(|i| a.row(i).iter().sum::<f64>())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let mut x = vec![1.0; n];
    let mut lambda_prev = f64::NAN;
    let mut shifted = false;
    for it in 0..POWER_MAX_ITER {
        if !shifted && it == OSCILLATION_PATIENCE {
            shifted = true;
            lambda_prev = f64::NAN;
        }
        let mut y = a.mul_vec(&x);
        if shifted {
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = (*yi + shift * xi) / (1.0 + shift);
            }
        }
        let norm = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            return Ok((0.0, x));
        }
        // x has unit maximum, so the max-norm of y estimates the root
        let lambda = norm;
        for v in &mut y {
            *v /= norm;
        }
        let dx = y
            .iter()
            .zip(&x)
            .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        x = y;
        if (lambda - lambda_prev).abs() <= POWER_TOL * lambda && dx <= 1e-10 {
            let y = a.mul_vec(&x);
            let root = y.iter().fold(0.0_f64, |m, v| m.max(*v));
            return Ok((root, x));
        }
        lambda_prev = lambda;
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {POWER_MAX_ITER} iterations"
    )))
}

/// Spectral radius of a nonnegative matrix.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    perron_pair(a).map(|(r, _)| r)
}

/// Cumulative row mass over states listed worst first.
fn worst_first_cdf(p: &Matrix, row: usize, order: &StateOrder) -> Vec<f64> {
    let mut acc = 0.0;
    order
        .worst_first()
        .into_iter()
        .map(|s| {
            acc += p.get(row, s);
            acc
        })
        .collect()
}

fn row_dominates(p: &Matrix, prow: usize, q: &Matrix, qrow: usize, order: &StateOrder) -> bool {
    let cp = worst_first_cdf(p, prow, order);
    let cq = worst_first_cdf(q, qrow, order);
    cp.iter().zip(&cq).all(|(a, b)| *a <= *b + ORDER_TOL)
}

/// `P` is monotone when each better state's row dominates the row of the
/// next worse state.
pub fn check_monotone(p: &Matrix, order: &StateOrder) -> bool {
    order
        .worst_first()
        .windows(2)
        .all(|pair| row_dominates(p, pair[1], p, pair[0], order))
}

/// Every row of `p` first-order stochastically dominates the same row of `q`.
pub fn check_fosd_dominates(p: &Matrix, q: &Matrix, order: &StateOrder) -> bool {
    p.dim() == q.dim() && (0..p.dim()).all(|z| row_dominates(p, z, q, z, order))
}

/// Strong connectivity of the transition graph.
pub fn check_irreducible(p: &Matrix) -> bool {
    let n = p.dim();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for (j, s) in seen.iter_mut().enumerate() {
                let w = if forward { p.get(i, j) } else { p.get(j, i) };
                if w > 0.0 && !*s {
                    *s = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Rowwise least upper bound of the candidates in the first-order stochastic
/// order: each row's upper-tail mass (over states best first) is the largest
/// among the candidates.
///
/// Entries are copied from a candidate whenever one candidate attains both
/// adjacent tail maxima, so an envelope that coincides with candidate rows
/// reproduces them bit for bit.
pub fn upper_envelope(cands: &CandidateSet) -> Matrix {
    let order = cands.order().best_first().to_vec();
    let m = order.len();
    let mut out = Matrix::identity(m);
    for z in 0..m {
        // tails[i][k] = mass of candidate i on the k+1 best states
        let tails: Vec<Vec<f64>> = cands
            .matrices()
            .iter()
            .map(|p| {
                let mut acc = 0.0;
                order
                    .iter()
                    .map(|&s| {
                        acc += p.get(z, s);
                        acc
                    })
                    .collect()
            })
            .collect();
        let best: Vec<f64> = (0..m)
            .map(|k| {
                if k == m - 1 {
                    1.0
                } else {
                    tails.iter().map(|t| t[k]).fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect();
        let attains = |i: usize, k: usize| k == m - 1 || tails[i][k] == best[k];
        for (k, &s) in order.iter().enumerate() {
            let direct = (0..cands.len()).find(|&i| attains(i, k) && (k == 0 || attains(i, k - 1)));
            let v = match direct {
                Some(i) => cands.get(i).get(z, s),
                None => best[k] - if k == 0 { 0.0 } else { best[k - 1] },
            };
            out.set(z, s, v.max(0.0));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityChecks {
    pub irreducible: bool,
    pub monotone: bool,
    /// Whether `P*` dominates each candidate, in candidate order.
    pub dominates: Vec<bool>,
    /// Whether `D_0`, `D_1` are nondecreasing along the state order.
    pub discount_monotone: [bool; 2],
}

impl StabilityChecks {
    pub fn all_pass(&self) -> bool {
        self.irreducible && self.monotone && self.dominates.iter().all(|d| *d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub p_star: Matrix,
    pub p_star_constructed: bool,
    pub diagonal: DiscountedReturnDiagonal,
    pub spectral_radius: [f64; 2],
    pub perron_vector: [Vec<f64>; 2],
    pub contraction_factor: [f64; 2],
    /// `max_i max_z (K_i^a x_a)(z) / x_a(z)` attained per candidate.
    pub candidate_ratios: [Vec<f64>; 2],
    pub checks: StabilityChecks,
}

impl StabilityReport {
    /// Hypotheses hold and both contraction factors are below one.
    pub fn certified(&self) -> bool {
        self.verdict().is_ok()
    }

    /// The first failing check as an error, if any.
    pub fn verdict(&self) -> Result<()> {
        if !self.checks.irreducible {
            return Err(Error::Certification("P* is not irreducible".into()));
        }
        if !self.checks.monotone {
            return Err(Error::Certification("P* is not monotone".into()));
        }
        if let Some(i) = self.checks.dominates.iter().position(|d| !d) {
            return Err(Error::Certification(format!(
                "P* does not dominate candidate {}",
                i + 1
            )));
        }
        for a in 0..2 {
            if !(self.spectral_radius[a] < 1.0) {
                return Err(Error::Stability(format!(
                    "r(P* D_{a}) = {} is not below one",
                    self.spectral_radius[a]
                )));
            }
            if !(self.contraction_factor[a] < 1.0) {
                return Err(Error::Stability(format!(
                    "contraction factor eta_{a} = {} is not below one",
                    self.contraction_factor[a]
                )));
            }
        }
        Ok(())
    }

    /// Upper bound on `E_{z,theta} prod_{i<=t} beta_i R_i^a`, uniform in
    /// `(z, theta)`.
    pub fn discount_product_bound(&self, alpha: usize, t: u32) -> f64 {
        let x = &self.perron_vector[alpha];
        let hi = x.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let lo = x.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        self.contraction_factor[alpha].powi(t as i32) * hi / lo
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(
            f,
            "P* ({}):",
            if self.p_star_constructed { "upper envelope" } else { "supplied" }
        )?;
        for row in self.p_star.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        writeln!(f, "{:<28}{}", "irreducible", flag(self.checks.irreducible))?;
        writeln!(f, "{:<28}{}", "monotone", flag(self.checks.monotone))?;
        for (i, d) in self.checks.dominates.iter().enumerate() {
            writeln!(f, "{:<28}{}", format!("dominates P_{}", i + 1), flag(*d))?;
        }
        writeln!(f, "{:<8}{:>16}{:>16}{:>16}", "alpha", "r(P* D)", "eta", "max x/min x")?;
        for a in 0..2 {
            let x = &self.perron_vector[a];
            let ratio = x.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
                / x.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            writeln!(
                f,
                "{:<8}{:>16.10}{:>16.10}{:>16.10}",
                a, self.spectral_radius[a], self.contraction_factor[a], ratio
            )?;
        }
        write!(
            f,
            "verdict: {}",
            match self.verdict() {
                Ok(()) => "certified".to_string(),
                Err(e) => e.to_string(),
            }
        )
    }
}

fn nondecreasing_along(v: &[f64], order: &StateOrder) -> bool {
    order
        .worst_first()
        .windows(2)
        .all(|p| v[p[1]] >= v[p[0]])
}

/// Computes every quantity of the stability report without judging it.
pub fn stability_report(
    cands: &CandidateSet,
    shocks: &StateShockMap,
    p_star: Option<&Matrix>,
) -> Result<StabilityReport> {
    let order = cands.order();
    if shocks.n_states() != cands.n_states() {
        return Err(Error::Domain(format!(
            "shock map has {} states, candidates have {}",
            shocks.n_states(),
            cands.n_states()
        )));
    }
    let (p_star, constructed) = match p_star {
        Some(p) => {
            p.check_stochastic(1e-12)?;
            if p.dim() != cands.n_states() {
                return Err(Error::Domain("P* dimension does not match candidates".into()));
            }
            (p.clone(), false)
        }
        None => (upper_envelope(cands), true),
    };
    let diagonal = compute_discount_diagonal(shocks);
    let checks = StabilityChecks {
        irreducible: check_irreducible(&p_star),
        monotone: check_monotone(&p_star, order),
        dominates: cands
            .matrices()
            .iter()
            .map(|p| check_fosd_dominates(&p_star, p, order))
            .collect(),
        discount_monotone: [
            nondecreasing_along(&diagonal.d0, order),
            nondecreasing_along(&diagonal.d1, order),
        ],
    };

    let mut radius = [0.0; 2];
    let mut vectors: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut eta = [0.0; 2];
    let mut ratios: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for a in 0..2 {
        let d = diagonal.get(a);
        let k_star = p_star.scale_columns(d);
        let (lambda, x) = perron_pair(&k_star)?;
        let per_candidate: Vec<f64> = cands
            .matrices()
            .iter()
            .map(|p| {
                let kx = p.scale_columns(d).mul_vec(&x);
                kx.iter()
                    .zip(&x)
                    .map(|(k, v)| k / v)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        eta[a] = per_candidate.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        radius[a] = lambda;
        vectors[a] = x;
        ratios[a] = per_candidate;
    }
    if vectors.iter().any(|x| x.iter().any(|v| !(*v > 0.0))) {
        log::warn!("Perron vector of P* D is not strictly positive");
    }
    Ok(StabilityReport {
        p_star,
        p_star_constructed: constructed,
        diagonal,
        spectral_radius: radius,
        perron_vector: vectors,
        contraction_factor: eta,
        candidate_ratios: ratios,
        checks,
    })
}

/// Builds the stability report and fails unless it certifies stability.
pub fn certify(
    cands: &CandidateSet,
    shocks: &StateShockMap,
    p_star: Option<&Matrix>,
) -> Result<StabilityReport> {
    let report = stability_report(cands, shocks, p_star)?;
    report.verdict()?;
    Ok(report)
}

/// Smallest `s` with `E_{z,theta}[beta R u'(s R w)] <= u'(w)` for every
/// `(w, z, theta)` under CRRA utility; returned only when it lies below one,
/// in which case optimal consumption is at least `(1 - s) w`.
///
/// The bound is linear in `theta`, so its maximum over the simplex sits at a
/// vertex and only the candidates themselves need checking.
pub fn consumption_lower_bound_certificate(
    cands: &CandidateSet,
    shocks: &StateShockMap,
    u: &CrraUtility,
) -> Result<Option<f64>> {
    let gamma = u.gamma();
    let m = cands.n_states();
    let moment: Vec<f64> = (0..m)
        .map(|z| shocks.expect(z, |a| a.beta * a.ret.powf(1.0 - gamma)))
        .collect();
    if moment.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "E[beta R^(1 - gamma)] is not finite".into(),
        ));
    }
    let mut s_bar = 0.0_f64;
    for p in cands.matrices() {
        for z in 0..m {
            let e: f64 = (0..m).map(|zn| p.get(z, zn) * moment[zn]).sum();
            s_bar = s_bar.max(e.powf(1.0 / gamma));
        }
    }
    Ok((s_bar < 1.0).then_some(s_bar))
}
