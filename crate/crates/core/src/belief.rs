//! Beliefs over the candidate kernels: Bayes updating, the subjective
//! mixture kernel and the barycentric simplex grid.

use crate::error::{Error, Result};
use crate::model::{CandidateSet, Matrix};
use serde::{Deserialize, Serialize};

/// Default cap on the number of simplex grid points.
pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

/// A point of the probability simplex over candidate kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief {
    weights: Vec<f64>,
}

impl Belief {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("belief needs at least one weight".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!(
                "belief weights must be nonnegative: {weights:?}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "belief weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// All mass on candidate `i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.weights
    }
}

/// Posterior after observing the transition `z -> z_next`.
pub fn bayes_update(
    cands: &CandidateSet,
    theta: &Belief,
    z: usize,
    z_next: usize,
) -> Result<Belief> {
    let mut num: Vec<f64> = cands
        .matrices()
        .iter()
        .zip(theta.weights())
        .map(|(p, w)| p.get(z, z_next) * w)
        .collect();
    let denom: f64 = num.iter().sum();
    if !(denom > 0.0) {
        return Err(Error::Learning {
            from: z,
            to: z_next,
            theta: theta.weights().to_vec(),
        });
    }
    for v in &mut num {
        *v /= denom;
    }
    Ok(Belief { weights: num })
}

/// `P_theta(z, zhat) = sum_i theta_i P_i(z, zhat)`.
pub fn mixture_kernel(cands: &CandidateSet, theta: &Belief) -> Matrix {
    let m = cands.n_states();
    let mut out = Matrix::from_rows(vec![vec![0.0; m]; m]).expect("square");
    for (p, &w) in cands.matrices().iter().zip(theta.weights()) {
        if w == 0.0 {
            continue;
        }
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, out.get(i, j) + w * p.get(i, j));
            }
        }
    }
    out
}

/// Single entry `P_theta(z, zhat)` of the subjective kernel.
pub fn mixture_prob(cands: &CandidateSet, theta: &Belief, z: usize, z_next: usize) -> f64 {
    cands
        .matrices()
        .iter()
        .zip(theta.weights())
        .map(|(p, w)| w * p.get(z, z_next))
        .sum()
}

/// Barycentric grid: every `h / H` with `h` a composition of `H` into `N`
/// nonnegative parts, enumerated lexicographically in `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexGrid {
    n_candidates: usize,
    resolution: usize,
    compositions: Vec<Vec<usize>>,
    points: Vec<Belief>,
}

/// `binomial(H + N - 1, N - 1)`, or `None` on overflow.
pub fn simplex_grid_size(n: usize, h: usize) -> Option<u64> {
    let k = n.checked_sub(1)? as u128;
    let top = (h as u128) + k;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(top - i)? / (i + 1);
    }
    u64::try_from(acc).ok()
}

pub fn build_simplex_grid(n: usize, h: usize) -> Result<SimplexGrid> {
    build_simplex_grid_capped(n, h, DEFAULT_GRID_CAP)
}

pub fn build_simplex_grid_capped(n: usize, h: usize, cap: u64) -> Result<SimplexGrid> {
    if n == 0 || h == 0 {
        return Err(Error::Domain(format!(
            "simplex grid needs N >= 1 and H >= 1, got N={n}, H={h}"
        )));
    }
    let count = simplex_grid_size(n, h)
        .ok_or_else(|| Error::Resource(format!("simplex grid size overflows for N={n}, H={h}")))?;
    if count > cap {
        return Err(Error::Resource(format!(
            "simplex grid with N={n}, H={h} has {count} points, cap is {cap}"
        )));
    }
    let mut compositions = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; n];
    enumerate(&mut current, 0, h, &mut compositions);
    let hf = h as f64;
    let points = compositions
        .iter()
        .map(|c| Belief {
            weights: c.iter().map(|&v| v as f64 / hf).collect(),
        })
        .collect();
    Ok(SimplexGrid {
        n_candidates: n,
        resolution: h,
        compositions,
        points,
    })
}

fn enumerate(current: &mut Vec<usize>, pos: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        enumerate(current, pos + 1, remaining - v, out);
    }
}

impl SimplexGrid {
    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn point(&self, ell: usize) -> &Belief {
        &self.points[ell]
    }

    pub fn composition(&self, ell: usize) -> &[usize] {
        &self.compositions[ell]
    }

    /// Index of the grid point nearest to `theta` in Euclidean distance,
    /// ties going to the lowest index.
    pub fn project(&self, theta: &Belief) -> usize {
        project_to_grid(self, theta)
    }

    /// Index of an exact grid point, if `theta` is one.
    pub fn index_of(&self, theta: &Belief) -> Option<usize> {
        self.points.iter().position(|p| p == theta)
    }
}

pub fn project_to_grid(grid: &SimplexGrid, theta: &Belief) -> usize {
    debug_assert_eq!(grid.n_candidates, theta.len());
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (ell, p) in grid.points.iter().enumerate() {
        let d: f64 = p
            .weights
            .iter()
            .zip(&theta.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d < best_d {
            best_d = d;
            best = ell;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateOrder;
    use proptest::prelude::*;

    fn calibrated_candidates() -> CandidateSet {
        CandidateSet::new(
            vec![
                Matrix::from_rows(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap(),
                Matrix::from_rows(vec![vec![0.9855, 0.0145], vec![0.0968, 0.9032]]).unwrap(),
            ],
            StateOrder::new(vec![0, 1]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(build_simplex_grid(3, 20).unwrap().len(), 231);
        let g = build_simplex_grid(2, 1).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.point(0).weights(), &[0.0, 1.0]);
        assert_eq!(g.point(1).weights(), &[1.0, 0.0]);
        let g = build_simplex_grid(2, 99).unwrap();
        assert_eq!(g.len(), 100);
        for ell in 1..100 {
            let gap = g.point(ell).weights()[0] - g.point(ell - 1).weights()[0];
            assert!((gap - 1.0 / 99.0).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_counts_match_direct_enumeration() {
        for n in 1..=5 {
            for h in 1..=30 {
                let g = build_simplex_grid(n, h).unwrap();
                assert_eq!(g.len() as u64, simplex_grid_size(n, h).unwrap());
                // lexicographic order and exact rational coordinates
                for pair in g.compositions.windows(2) {
                    assert!(pair[0] < pair[1]);
                }
                for c in &g.compositions {
                    assert_eq!(c.iter().sum::<usize>(), h);
                }
            }
        }
    }

    #[test]
    fn grid_cap_is_a_resource_error() {
        assert!(matches!(
            build_simplex_grid_capped(3, 20, 100),
            Err(Error::Resource(_))
        ));
        assert!(matches!(build_simplex_grid(0, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn bayes_examples() {
        let c = calibrated_candidates();
        let vertex = Belief::vertex(2, 0);
        assert_eq!(bayes_update(&c, &vertex, 0, 1).unwrap(), vertex);
        let single = c.single(1);
        let one = Belief::new(vec![1.0]).unwrap();
        assert_eq!(bayes_update(&single, &one, 1, 0).unwrap(), one);

        let half = Belief::uniform(2);
        let post = bayes_update(&c, &half, 0, 0).unwrap();
        // (0.4, 0.49275) / 0.89275
        assert!((post.weights()[0] - 0.4 / 0.89275).abs() < 1e-15);
        assert!((post.weights()[1] - 0.49275 / 0.89275).abs() < 1e-15);
        assert!((post.weights()[0] - 0.448053).abs() < 1e-6);
    }

    #[test]
    fn impossible_transition_is_a_learning_error() {
        let p = Matrix::identity(2);
        let c = CandidateSet::new(vec![p], StateOrder::natural(2)).unwrap();
        let theta = Belief::vertex(1, 0);
        match bayes_update(&c, &theta, 0, 1) {
            Err(Error::Learning { from, to, theta }) => {
                assert_eq!((from, to), (0, 1));
                assert_eq!(theta, vec![1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixture_examples() {
        let c = calibrated_candidates();
        assert_eq!(mixture_kernel(&c, &Belief::vertex(2, 0)), *c.get(0));
        let mix = mixture_kernel(&c, &Belief::uniform(2));
        assert!((mix.get(0, 0) - 0.89275).abs() < 1e-15);
        assert!((mix.get(0, 1) - 0.10725).abs() < 1e-15);
        mix.check_stochastic(1e-12).unwrap();
    }

    #[test]
    fn projection_examples() {
        let g = build_simplex_grid(2, 99).unwrap();
        for ell in 0..g.len() {
            assert_eq!(g.project(g.point(ell)), ell);
        }
        let theta = Belief::new(vec![0.448, 0.552]).unwrap();
        let ell = g.project(&theta);
        // 44/99 = 0.4444 is closer to 0.448 than 45/99 = 0.4545
        assert_eq!(g.composition(ell), &[44, 55]);
        // oracle: brute-force minimum over the 100 evenly spaced points
        let best = (0..100)
            .min_by(|&a, &b| {
                let da = (a as f64 / 99.0 - 0.448).abs();
                let db = (b as f64 / 99.0 - 0.448).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        assert_eq!(g.composition(ell)[0], best);

        let g = build_simplex_grid(2, 1).unwrap();
        assert_eq!(g.project(&Belief::uniform(2)), 0);
    }

    fn stochastic_matrix(m: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), m).prop_map(|rows| {
            let rows = rows
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect();
            Matrix::from_rows(rows).unwrap()
        })
    }

    fn belief(n: usize) -> impl Strategy<Value = Belief> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| Belief::new(v.iter().map(|x| x / s).collect()).ok())?
        })
    }

    proptest! {
        #[test]
        fn bayes_preserves_simplex_and_is_a_martingale(
            (mats, theta) in (2usize..5).prop_flat_map(|n| {
                (prop::collection::vec(stochastic_matrix(3), n), belief(n))
            }),
            z in 0usize..3,
        ) {
            let cands = CandidateSet::new(mats, StateOrder::natural(3)).unwrap();
            let mut avg = vec![0.0; theta.len()];
            for zn in 0..3 {
                let post = bayes_update(&cands, &theta, z, zn).unwrap();
                let s: f64 = post.weights().iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                prop_assert!(post.weights().iter().all(|w| *w >= 0.0));
                let p = mixture_prob(&cands, &theta, z, zn);
                for (a, w) in avg.iter_mut().zip(post.weights()) {
                    *a += p * w;
                }
            }
            for (a, t) in avg.iter().zip(theta.weights()) {
                prop_assert!((a - t).abs() <= 1e-10);
            }
        }

        #[test]
        fn projection_is_identity_on_grid(n in 1usize..5, h in 1usize..12) {
            let g = build_simplex_grid(n, h).unwrap();
            for ell in 0..g.len() {
                prop_assert_eq!(g.project(g.point(ell)), ell);
            }
        }
    }
}
