//! Preferences, the calibrated exogenous environment and its discretized
//! shock law.

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use serde::{Deserialize, Serialize};

/// Relative tolerance below which `gamma` is treated as exactly one.
const LOG_UTILITY_BAND: f64 = 1e-10;

/// Constant relative risk aversion preferences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrraUtility {
    gamma: f64,
}

impl CrraUtility {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!(
                "relative risk aversion must be positive, got {gamma}"
            )));
        }
        let gamma = if (gamma - 1.0).abs() < LOG_UTILITY_BAND {
            1.0
        } else {
            gamma
        };
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_log(&self) -> bool {
        self.gamma == 1.0
    }

    /// Period utility; `log c` when `gamma == 1`.
    pub fn utility(&self, c: f64) -> f64 {
        if self.is_log() {
            c.ln()
        } else {
            c.powf(1.0 - self.gamma) / (1.0 - self.gamma)
        }
    }

    /// `u'(c) = c^{-gamma}`, checked.
    pub fn marginal_utility(&self, c: f64) -> Result<f64> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!(
                "marginal utility needs positive consumption, got {c}"
            )));
        }
        Ok(self.mu(c))
    }

    /// Unchecked `u'(c)`; returns `+inf` at zero.
    #[inline]
    pub fn mu(&self, c: f64) -> f64 {
        if self.gamma == 2.0 {
            1.0 / (c * c)
        } else if self.gamma == 1.0 {
            1.0 / c
        } else {
            c.powf(-self.gamma)
        }
    }

    /// `(u')^{-1}(m) = m^{-1/gamma}`.
    #[inline]
    pub fn inverse_marginal_utility(&self, m: f64) -> f64 {
        if self.gamma == 2.0 {
            1.0 / m.sqrt()
        } else if self.gamma == 1.0 {
            1.0 / m
        } else {
            m.powf(-1.0 / self.gamma)
        }
    }

    /// `u'(0)`, infinite for every CRRA member.
    pub fn marginal_at_zero(&self) -> f64 {
        f64::INFINITY
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Domain(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self {
            n,
            data: vec![0.0; n * n],
        };
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Matrix { n, data: out }
    }

    /// `self * diag(d)`.
    pub fn scale_columns(&self, d: &[f64]) -> Matrix {
        let mut m = self.clone();
        for row in m.data.chunks_mut(self.n) {
            for (v, dj) in row.iter_mut().zip(d) {
                *v *= dj;
            }
        }
        m
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|v| *v >= 0.0)
    }

    /// Checks nonnegativity and unit row sums within `tol`.
    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            let row = self.row(i);
            if let Some(j) = row.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "row {i}: entry {j} is negative or non-finite ({})",
                    row[j]
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::Domain(format!("row {i} sums to {s}, expected 1")));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.rows()
    }
}

/// Total order on the exogenous states, listed best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct StateOrder {
    best_first: Vec<usize>,
}

impl StateOrder {
    pub fn new(best_first: Vec<usize>) -> Result<Self> {
        let m = best_first.len();
        let mut seen = vec![false; m];
        for &z in &best_first {
            if z >= m || seen[z] {
                return Err(Error::Domain(format!(
                    "state order {best_first:?} is not a permutation of 0..{m}"
                )));
            }
            seen[z] = true;
        }
        if m == 0 {
            return Err(Error::Domain("state order is empty".into()));
        }
        Ok(Self { best_first })
    }

    /// States in their index order, taken as best first.
    pub fn natural(m: usize) -> Self {
        Self {
            best_first: (0..m).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.best_first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best_first.is_empty()
    }

    pub fn best_first(&self) -> &[usize] {
        &self.best_first
    }

    pub fn worst_first(&self) -> Vec<usize> {
        self.best_first.iter().rev().copied().collect()
    }
}

impl TryFrom<Vec<usize>> for StateOrder {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        StateOrder::new(v)
    }
}

impl From<StateOrder> for Vec<usize> {
    fn from(o: StateOrder) -> Self {
        o.best_first
    }
}

/// The household environment: CRRA preferences, a constant discount factor,
/// a fixed-share portfolio with a state-dependent risky return and a
/// persistent-times-transitory income process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedHouseholdModel {
    pub beta: f64,
    pub gamma: f64,
    pub alpha_portfolio: f64,
    pub log_rf: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub y_persistent: Vec<f64>,
    pub sigma_y2: f64,
    pub state_order: StateOrder,
}

impl CalibratedHouseholdModel {
    pub fn n_states(&self) -> usize {
        self.mu.len()
    }

    pub fn risk_free(&self) -> f64 {
        self.log_rf.exp()
    }

    pub fn utility(&self) -> Result<CrraUtility> {
        CrraUtility::new(self.gamma)
    }

    /// Gross portfolio return in state `z` for a standard normal draw `eps`.
    #[inline]
    pub fn gross_return(&self, z: usize, eps: f64) -> f64 {
        let rf = self.risk_free();
        self.alpha_portfolio * rf * (self.mu[z] + self.sigma[z] * eps).exp()
            + (1.0 - self.alpha_portfolio) * rf
    }

    /// Income in state `z` for a standard normal draw `eps` of the log shock.
    #[inline]
    pub fn income(&self, z: usize, eps: f64) -> f64 {
        self.y_persistent[z] * (self.sigma_y2.sqrt() * eps).exp()
    }

    /// Closed-form `E_z[R]` under the lognormal return.
    pub fn mean_return(&self, z: usize) -> f64 {
        let rf = self.risk_free();
        self.alpha_portfolio * rf * (self.mu[z] + 0.5 * self.sigma[z] * self.sigma[z]).exp()
            + (1.0 - self.alpha_portfolio) * rf
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mu.len();
        let field = |name: &str, msg: String| Err(Error::config(format!("model.{name}"), msg));
        if m == 0 {
            return field("mu", "at least one state is required".into());
        }
        if self.sigma.len() != m {
            return field("sigma", format!("has {} entries, expected {m}", self.sigma.len()));
        }
        if self.y_persistent.len() != m {
            return field(
                "y_persistent",
                format!("has {} entries, expected {m}", self.y_persistent.len()),
            );
        }
        if self.state_order.len() != m {
            return field(
                "state_order",
                format!("has {} entries, expected {m}", self.state_order.len()),
            );
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return field("beta", format!("must lie in (0,1), got {}", self.beta));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return field("gamma", format!("must be positive, got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.alpha_portfolio) {
            return field(
                "alpha_portfolio",
                format!("must lie in [0,1], got {}", self.alpha_portfolio),
            );
        }
        if !self.log_rf.is_finite() {
            return field("log_rf", "must be finite".into());
        }
        if let Some(z) = self.mu.iter().position(|v| !v.is_finite()) {
            return field(&format!("mu[{z}]"), "must be finite".into());
        }
        if let Some(z) = self.sigma.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return field(&format!("sigma[{z}]"), "must be positive".into());
        }
        if let Some(z) = self
            .y_persistent
            .iter()
            .position(|v| !(*v > 0.0) || !v.is_finite())
        {
            return field(&format!("y_persistent[{z}]"), "must be positive".into());
        }
        if !(self.sigma_y2 > 0.0) || !self.sigma_y2.is_finite() {
            return field("sigma_y2", "must be positive".into());
        }
        Ok(())
    }
}

/// The finite set of candidate transition matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    matrices: Vec<Matrix>,
    order: StateOrder,
}

impl CandidateSet {
    pub fn new(matrices: Vec<Matrix>, order: StateOrder) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::Domain("candidate set must be nonempty".into()));
        }
        let m = order.len();
        for (i, p) in matrices.iter().enumerate() {
            if p.dim() != m {
                return Err(Error::Domain(format!(
                    "candidate {i} is {0}x{0}, expected {m}x{m}",
                    p.dim()
                )));
            }
            p.check_stochastic(1e-12)
                .map_err(|e| Error::Domain(format!("candidate {i}: {e}")))?;
        }
        Ok(Self { matrices, order })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.order.len()
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    pub fn get(&self, i: usize) -> &Matrix {
        &self.matrices[i]
    }

    pub fn order(&self) -> &StateOrder {
        &self.order
    }

    /// The candidate set `{P_i}` alone, for a full-information benchmark.
    pub fn single(&self, i: usize) -> CandidateSet {
        CandidateSet {
            matrices: vec![self.matrices[i].clone()],
            order: self.order.clone(),
        }
    }
}

/// One point of the discretized shock law in a given state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockAtom {
    pub prob: f64,
    pub beta: f64,
    pub ret: f64,
    pub income: f64,
}

/// Per-state atom lists for `(beta, R, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateShockMap {
    atoms: Vec<Vec<ShockAtom>>,
}

impl StateShockMap {
    pub fn new(atoms: Vec<Vec<ShockAtom>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("shock map needs at least one state".into()));
        }
        for (z, list) in atoms.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Domain(format!("state {z} has no shock atoms")));
            }
            let total: f64 = list.iter().map(|a| a.prob).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "state {z}: atom probabilities sum to {total}"
                )));
            }
            for (k, a) in list.iter().enumerate() {
                let ok = a.prob > 0.0
                    && a.prob <= 1.0
                    && a.beta > 0.0
                    && a.ret > 0.0
                    && a.income >= 0.0
                    && a.beta.is_finite()
                    && a.ret.is_finite()
                    && a.income.is_finite();
                if !ok {
                    return Err(Error::Domain(format!(
                        "state {z}, atom {k}: invalid atom {a:?}"
                    )));
                }
            }
        }
        Ok(Self { atoms })
    }

    /// A single deterministic atom per state.
    pub fn deterministic(per_state: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(
            per_state
                .iter()
                .map(|&(beta, ret, income)| {
                    vec![ShockAtom {
                        prob: 1.0,
                        beta,
                        ret,
                        income,
                    }]
                })
                .collect(),
        )
    }

    pub fn n_states(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self, z: usize) -> &[ShockAtom] {
        &self.atoms[z]
    }

    /// `E_z[f(atom)]`.
    pub fn expect<F: Fn(&ShockAtom) -> f64>(&self, z: usize, f: F) -> f64 {
        self.atoms[z].iter().map(|a| a.prob * f(a)).sum()
    }

    /// Multiplies every income atom by `factor`.
    pub fn scale_income(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.atoms
                .iter()
                .map(|list| {
                    list.iter()
                        .map(|a| ShockAtom {
                            income: a.income * factor,
                            ..*a
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Finite `E_z[beta Y]`, `E_z[beta u'(Y)]` and `E_z[beta R u'(Y)]`.
    pub fn check_finite_moments(&self, u: &CrraUtility) -> Result<()> {
        for z in 0..self.n_states() {
            let moments = [
                self.expect(z, |a| a.beta * a.income),
                self.expect(z, |a| a.beta * u.mu(a.income)),
                self.expect(z, |a| a.beta * a.ret * u.mu(a.income)),
            ];
            if moments.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "state {z}: expected discounted income or marginal utility of income is not finite"
                )));
            }
        }
        Ok(())
    }

    /// Atom positions `k` at which `R` or `beta` decreases when moving from a
    /// worse state to the next better one, as `(worse, better, k)`.
    ///
    /// Only meaningful when all states carry aligned atom lists, as produced
    /// by [`discretize_model`].
    pub fn monotonicity_violations(&self, order: &StateOrder) -> Vec<(usize, usize, usize)> {
        let worst_first = order.worst_first();
        let mut out = Vec::new();
        for pair in worst_first.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let (a, b) = (&self.atoms[lo], &self.atoms[hi]);
            if a.len() != b.len() {
                continue;
            }
            for k in 0..a.len() {
                if b[k].ret < a[k].ret || b[k].beta < a[k].beta {
                    out.push((lo, hi, k));
                }
            }
        }
        out
    }
}

/// Tensor-product discretization of the return and income shocks.
pub fn discretize_model(
    m: &CalibratedHouseholdModel,
    rule_r: &QuadratureRule,
    rule_y: &QuadratureRule,
) -> Result<StateShockMap> {
    m.validate()?;
    let atoms = (0..m.n_states())
        .map(|z| {
            let mut list = Vec::with_capacity(rule_r.len() * rule_y.len());
            for (er, wr) in rule_r.iter() {
                for (ey, wy) in rule_y.iter() {
                    list.push(ShockAtom {
                        prob: wr * wy,
                        beta: m.beta,
                        ret: m.gross_return(z, er),
                        income: m.income(z, ey),
                    });
                }
            }
            list
        })
        .collect();
    let shocks = StateShockMap::new(atoms)?;
    let violations = shocks.monotonicity_violations(&m.state_order);
    if !violations.is_empty() {
        log::warn!(
            "gross return is not nondecreasing in the state at {} atom(s) (worse state, better state, atom): {:?}",
            violations.len(),
            violations
        );
    }
    Ok(shocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_hermite_normal;

    pub(crate) fn calibration() -> CalibratedHouseholdModel {
        CalibratedHouseholdModel {
            beta: (-0.05_f64 / 12.0).exp(),
            gamma: 2.0,
            alpha_portfolio: 0.4,
            log_rf: 3.084e-4,
            mu: vec![7.139e-3, -1.735e-3],
            sigma: vec![0.0391, 0.0577],
            y_persistent: vec![1.8539, 0.0165],
            sigma_y2: 0.5395,
            state_order: StateOrder::new(vec![0, 1]).unwrap(),
        }
    }

    #[test]
    fn marginal_utility_examples() {
        let u2 = CrraUtility::new(2.0).unwrap();
        assert_eq!(u2.marginal_utility(2.0).unwrap(), 0.25);
        assert_eq!(u2.inverse_marginal_utility(0.25), 2.0);
        assert_eq!(u2.mu(u2.inverse_marginal_utility(0.25)), 0.25);
        let u1 = CrraUtility::new(1.0).unwrap();
        assert!((u1.marginal_utility(5.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(u2.marginal_at_zero().is_infinite());
        assert!(matches!(u2.marginal_utility(0.0), Err(Error::Domain(_))));
        assert!(matches!(u2.marginal_utility(-1.0), Err(Error::Domain(_))));
        assert!(CrraUtility::new(0.0).is_err());
    }

    #[test]
    fn near_unit_gamma_snaps_to_log() {
        let u = CrraUtility::new(1.0 + 1e-12).unwrap();
        assert!(u.is_log());
        assert_eq!(u.utility(1.0), 0.0);
        let u = CrraUtility::new(1.5).unwrap();
        assert!((u.inverse_marginal_utility(u.mu(3.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_product_atoms() {
        let rule = gauss_hermite_normal(7).unwrap();
        let m = calibration();
        let shocks = discretize_model(&m, &rule, &rule).unwrap();
        for z in 0..2 {
            assert_eq!(shocks.atoms(z).len(), 49);
            let total: f64 = shocks.atoms(z).iter().map(|a| a.prob).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let ey = shocks.expect(z, |a| a.income);
            let exact = m.y_persistent[z] * (m.sigma_y2 / 2.0).exp();
            assert!((ey - exact).abs() / exact < 1e-9);
            let rf = m.risk_free();
            assert!(shocks
                .atoms(z)
                .iter()
                .all(|a| a.ret > (1.0 - m.alpha_portfolio) * rf));
        }
    }

    #[test]
    fn expansion_discounted_return_below_one() {
        let rule = gauss_hermite_normal(7).unwrap();
        let m = calibration();
        let shocks = discretize_model(&m, &rule, &rule).unwrap();
        let quad = shocks.expect(0, |a| a.beta * a.ret);
        let closed = m.beta * m.mean_return(0);
        assert!((quad - closed).abs() < 1e-12);
        assert!(quad < 1.0);
    }

    #[test]
    fn calibration_breaks_pointwise_return_monotonicity() {
        let rule = gauss_hermite_normal(7).unwrap();
        let m = calibration();
        let shocks = discretize_model(&m, &rule, &rule).unwrap();
        let v = shocks.monotonicity_violations(&m.state_order);
        // only the largest return nodes, where the recession volatility dominates
        assert!(!v.is_empty());
        let nodes = rule.nodes();
        for (_, _, k) in v {
            assert!(nodes[k / 7] > 0.48);
        }
    }

    #[test]
    fn shock_map_rejects_bad_atoms() {
        assert!(StateShockMap::deterministic(&[(0.9, 0.0, 1.0)]).is_err());
        let bad = vec![vec![ShockAtom {
            prob: 0.5,
            beta: 0.9,
            ret: 1.0,
            income: 1.0,
        }]];
        assert!(StateShockMap::new(bad).is_err());
        let zero_income = StateShockMap::deterministic(&[(0.9, 1.0, 0.0)]).unwrap();
        let u = CrraUtility::new(2.0).unwrap();
        assert!(zero_income.check_finite_moments(&u).is_err());
    }

    #[test]
    fn candidate_rows_must_be_stochastic() {
        let order = StateOrder::natural(2);
        let bad = Matrix::from_rows(vec![vec![0.5, 0.49], vec![0.5, 0.5]]).unwrap();
        assert!(CandidateSet::new(vec![bad], order.clone()).is_err());
        let ok = Matrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(CandidateSet::new(vec![ok], order).is_ok());
        assert!(StateOrder::new(vec![0, 0]).is_err());
    }
}
