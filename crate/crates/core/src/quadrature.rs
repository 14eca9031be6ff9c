//! Gauss-Hermite rules rescaled for expectations under a standard normal.
//!
//! The physicists' rule integrates `e^{-t^2} g(t)`; substituting `x = sqrt(2) t`
//! and dividing the weights by `sqrt(pi)` turns it into a rule for `E[g(X)]`,
//! `X ~ N(0, 1)`, exact for polynomials of degree at most `2n - 1`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds a rule from explicit nodes and weights.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Domain(
                "quadrature rule needs matching, nonempty node and weight vectors".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("quadrature weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "quadrature weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_k w_k g(x_k)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `n`-point Gauss-Hermite rule for a standard normal variate.
///
/// Roots of the orthonormal Hermite polynomial are found by Newton's method
/// from asymptotic starting guesses; nodes are mirrored so the rule is
/// exactly symmetric.
pub fn gauss_hermite_normal(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_NODES {
        return Err(Error::Domain(format!(
            "Gauss-Hermite order must lie in 1..={MAX_NODES}, got {n}"
        )));
    }
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0_f64;

    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * t[0],
            3 => 1.91 * z - 0.91 * t[1],
            _ => 2.0 * z - t[i - 2],
        };
        let mut deriv = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let (p1, p2) = orthonormal_hermite(n, z, pim4);
            deriv = (2.0 * nf).sqrt() * p2;
            let step = p1 / deriv;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "Gauss-Hermite root {i} of order {n} did not converge"
            )));
        }
        // one more evaluation at the polished root for the weight
        let (_, p2) = orthonormal_hermite(n, z, pim4);
        deriv = if p2 != 0.0 { (2.0 * nf).sqrt() * p2 } else { deriv };
        t[i] = z;
        t[n - 1 - i] = -z;
        w[i] = 2.0 / (deriv * deriv);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        t[n / 2] = 0.0;
    }

    let sqrt_pi = std::f64::consts::PI.sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut pairs: Vec<(f64, f64)> = t
        .iter()
        .zip(&w)
        .map(|(&x, &wt)| (sqrt2 * x, wt / sqrt_pi))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nodes, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    QuadratureRule::new(nodes, weights)
}

/// Returns `(p_n(z), p_{n-1}(z))` for the orthonormal Hermite family.
fn orthonormal_hermite(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial(k: u64) -> f64 {
        (1..=k).rev().step_by(2).map(|v| v as f64).product()
    }

    #[test]
    fn single_node_is_the_mean() {
        let rule = gauss_hermite_normal(1).unwrap();
        assert_eq!(rule.nodes(), &[0.0]);
        assert!((rule.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn seven_point_second_moment() {
        let rule = gauss_hermite_normal(7).unwrap();
        assert!((rule.expect(|x| x * x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degree_fourteen_is_not_exact() {
        let rule = gauss_hermite_normal(7).unwrap();
        let exact = double_factorial(13);
        assert_eq!(exact, 135135.0);
        let approx = rule.expect(|x| x.powi(14));
        assert!((approx - exact).abs() / exact > 1e-3, "{approx}");
    }

    #[test]
    fn odd_moments_vanish_and_even_moments_match() {
        let rule = gauss_hermite_normal(7).unwrap();
        for m in 0..=6 {
            let odd = rule.expect(|x| x.powi(2 * m + 1));
            assert!(odd.abs() < 1e-10, "m={m}: {odd}");
        }
        for m in 1..=6 {
            let even = rule.expect(|x| x.powi(2 * m as i32));
            let exact = double_factorial(2 * m - 1);
            assert!((even - exact).abs() / exact < 1e-9, "m={m}: {even} vs {exact}");
        }
    }

    #[test]
    fn weights_normalized_and_nodes_symmetric_for_many_orders() {
        for n in 1..=MAX_NODES {
            let rule = gauss_hermite_normal(n).unwrap();
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
            for k in 0..n {
                assert!((rule.nodes()[k] + rule.nodes()[n - 1 - k]).abs() < 1e-12);
            }
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn rejects_out_of_range_orders() {
        assert!(matches!(gauss_hermite_normal(0), Err(Error::Domain(_))));
        assert!(matches!(gauss_hermite_normal(65), Err(Error::Domain(_))));
    }

    #[test]
    fn lognormal_mean_at_calibration_scale() {
        let rule = gauss_hermite_normal(7).unwrap();
        for sigma in [0.5395_f64.sqrt(), 0.0391, 0.0577] {
            let approx = rule.expect(|x| (sigma * x).exp());
            let exact = (sigma * sigma / 2.0).exp();
            assert!((approx - exact).abs() / exact < 1e-9, "sigma={sigma}");
        }
    }
}
