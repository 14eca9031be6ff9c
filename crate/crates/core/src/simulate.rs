//! Monte Carlo panels of households following a solved policy.
//!
//! Every path owns a ChaCha stream selected by its index, so a path's draws
//! do not depend on the number of paths or on thread scheduling. Paths are
//! reduced in fixed chunks and the chunks are summed in order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{bayes_update, mixture_prob, Belief};
use crate::error::{Error, Result};
use crate::model::{CalibratedHouseholdModel, CandidateSet, Matrix, StateShockMap};
use crate::solver::{ConsumptionRule, PolicyTable};

const CHUNK: usize = 256;
const VOLATILITY_GUARD: f64 = 1e-12;

/// Where a path's initial state comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Stationary,
    Fixed(usize),
}

/// Which kernel generates state transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionSource {
    /// The data-generating candidate.
    #[default]
    True,
    /// The household's own mixture kernel. Under it the posterior is a
    /// martingale, which makes this a useful diagnostic.
    Subjective,
}

/// How beliefs evolve along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefTracking {
    /// Exact Bayes updates, projected only to look up the policy.
    #[default]
    Exact,
    /// Snap to the grid after every update.
    ProjectAndPropagate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_paths: usize,
    /// Number of transitions; periods `0..=horizon` are reported.
    pub horizon: usize,
    pub prior: Belief,
    /// `None` starts one unit above the largest first knot.
    #[serde(default)]
    pub initial_wealth: Option<f64>,
    #[serde(default)]
    pub initial_state: InitialState,
    /// Index of the data-generating candidate.
    pub true_kernel: usize,
    pub seed: u64,
    #[serde(default)]
    pub rao_blackwell: bool,
    #[serde(default)]
    pub transitions: TransitionSource,
    #[serde(default)]
    pub beliefs: BeliefTracking,
}

impl SimulationConfig {
    pub fn validate(&self, n_candidates: usize, n_states: usize) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("simulation.{field}"), msg));
        if self.n_paths == 0 {
            return bad("n_paths", "must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon", "must be at least 1".into());
        }
        if self.prior.len() != n_candidates {
            return bad(
                "prior",
                format!("has {} weights, expected {n_candidates}", self.prior.len()),
            );
        }
        if self.true_kernel >= n_candidates {
            return bad(
                "true_kernel",
                format!("{} is not a candidate index (< {n_candidates})", self.true_kernel),
            );
        }
        if let Some(w) = self.initial_wealth {
            if !(w > 0.0) || !w.is_finite() {
                return bad("initial_wealth", format!("must be positive, got {w}"));
            }
        }
        if let InitialState::Fixed(z) = self.initial_state {
            if z >= n_states {
                return bad("initial_state", format!("state {z} out of range"));
            }
        }
        Ok(())
    }
}

/// Law of the return and income shocks used to draw paths.
#[derive(Debug, Clone, PartialEq)]
pub enum ShockLaw {
    /// Lognormal returns and income of the calibrated model.
    Continuous(CalibratedHouseholdModel),
    /// Draw atoms of a discrete shock map.
    Atoms(StateShockMap),
}

impl ShockLaw {
    fn n_states(&self) -> usize {
        match self {
            ShockLaw::Continuous(m) => m.n_states(),
            ShockLaw::Atoms(s) => s.n_states(),
        }
    }

    fn realize(&self, z: usize, d: &Draw) -> (f64, f64) {
        match self {
            ShockLaw::Continuous(m) => (m.gross_return(z, d.e_r), m.income(z, d.e_y)),
            ShockLaw::Atoms(s) => {
                let atoms = s.atoms(z);
                let mut cum = 0.0;
                for a in atoms {
                    cum += a.prob;
                    if d.u_atom < cum {
                        return (a.ret, a.income);
                    }
                }
                let a = atoms.last().expect("nonempty atoms");
                (a.ret, a.income)
            }
        }
    }
}

/// A household environment as seen by the simulator: the candidates it
/// learns over, the law its shocks are drawn from, and the discrete atoms
/// used by the Rao-Blackwell estimator.
#[derive(Debug, Clone)]
pub struct Economy {
    candidates: CandidateSet,
    law: ShockLaw,
    atoms: StateShockMap,
}

impl Economy {
    pub fn new(candidates: CandidateSet, law: ShockLaw, atoms: StateShockMap) -> Result<Self> {
        let m = candidates.n_states();
        if law.n_states() != m || atoms.n_states() != m {
            return Err(Error::Domain(format!(
                "economy mixes {m}-state candidates with {}-state shocks",
                law.n_states()
            )));
        }
        Ok(Self {
            candidates,
            law,
            atoms,
        })
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn n_states(&self) -> usize {
        self.candidates.n_states()
    }
}

/// Stationary distribution of an irreducible chain.
///
/// Iterates the lazy chain `(P + I) / 2`, which has the same stationary law
/// and is aperiodic.
pub fn stationary_distribution(p: &Matrix) -> Result<Vec<f64>> {
    p.check_stochastic(1e-12)?;
    if !crate::stability::check_irreducible(p) {
        return Err(Error::Domain(
            "stationary distribution requires an irreducible chain".into(),
        ));
    }
    let m = p.dim();
    let mut pi = vec![1.0 / m as f64; m];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; m];
        for (i, &w) in pi.iter().enumerate() {
            for (j, v) in next.iter_mut().enumerate() {
                *v += 0.5 * w * (p.get(i, j) + if i == j { 1.0 } else { 0.0 });
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let diff = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if diff < 1e-15 {
            return Ok(pi);
        }
    }
    Err(Error::Numerical("stationary distribution did not converge".into()))
}

/// Per-period summaries with Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStatistics {
    pub n_paths: usize,
    pub initial_wealth: f64,
    pub initial_state: InitialState,
    pub mean_consumption: Vec<f64>,
    pub se_consumption: Vec<f64>,
    pub mean_savings: Vec<f64>,
    pub se_savings: Vec<f64>,
    pub consumption_volatility: Vec<f64>,
    pub se_volatility: Vec<f64>,
    /// `[t][i]`
    pub mean_posterior: Vec<Vec<f64>>,
    pub se_posterior: Vec<Vec<f64>>,
    /// `[t][z]`
    pub state_frequency: Vec<Vec<f64>>,
}

impl PathStatistics {
    pub fn n_periods(&self) -> usize {
        self.mean_consumption.len()
    }
}

/// Learning-minus-benchmark differences on common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedStatistics {
    pub learning: PathStatistics,
    pub full_info: PathStatistics,
    pub diff_consumption: Vec<f64>,
    pub se_diff_consumption: Vec<f64>,
    pub diff_savings: Vec<f64>,
    pub se_diff_savings: Vec<f64>,
    pub diff_volatility: Vec<f64>,
    pub se_diff_volatility: Vec<f64>,
}

struct Draw {
    u_state: f64,
    u_atom: f64,
    e_r: f64,
    e_y: f64,
}

impl Draw {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        Self {
            u_state: rng.random(),
            u_atom: rng.random(),
            e_r: rng.sample(StandardNormal),
            e_y: rng.sample(StandardNormal),
        }
    }
}

fn pick(probs: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (j, p) in probs.enumerate() {
        if p > 0.0 {
            cum += p;
            last = j;
            if u < cum {
                return j;
            }
        }
    }
    last
}

/// Moments of a small vector of per-path quantities, per period.
#[derive(Debug, Clone)]
struct Moments {
    dim: usize,
    count: usize,
    sum: Vec<f64>,
    /// Upper triangle of the cross products, row-major.
    cross: Vec<f64>,
}

impl Moments {
    fn new(dim: usize, periods: usize) -> Self {
        Self {
            dim,
            count: 0,
            sum: vec![0.0; dim * periods],
            cross: vec![0.0; tri(dim) * periods],
        }
    }

    fn add(&mut self, t: usize, v: &[f64]) {
        let d = self.dim;
        let s = &mut self.sum[t * d..(t + 1) * d];
        let c = &mut self.cross[t * tri(d)..(t + 1) * tri(d)];
        let mut k = 0;
        for i in 0..d {
            s[i] += v[i];
            for j in i..d {
                c[k] += v[i] * v[j];
                k += 1;
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.cross.iter_mut().zip(&other.cross).for_each(|(a, b)| *a += b);
    }

    fn mean(&self, t: usize, i: usize) -> f64 {
        self.sum[t * self.dim + i] / self.count as f64
    }

    /// Sample covariance of variables `i` and `j` at period `t`.
    fn cov(&self, t: usize, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = self.dim;
        let k = i * d - i * (i + 1) / 2 + j;
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let raw = self.cross[t * tri(d) + k] / n - self.mean(t, i) * self.mean(t, j);
        raw * n / (n - 1.0)
    }

    fn se(&self, t: usize, i: usize) -> f64 {
        (self.cov(t, i, i).max(0.0) / self.count as f64).sqrt()
    }

    /// Volatility `sqrt(E[c^2] - E[c]^2)` from the columns holding `c` and
    /// `c^2`, with its delta-method gradient.
    fn volatility(&self, t: usize, x: usize, y: usize) -> (f64, [f64; 2]) {
        let mx = self.mean(t, x);
        let var = self.mean(t, y) - mx * mx;
        if var < -VOLATILITY_GUARD {
            log::warn!("negative consumption variance {var:e} at period {t}");
        }
        let vol = var.max(0.0).sqrt();
        let grad = if vol > 0.0 {
            [-mx / vol, 0.5 / vol]
        } else {
            [0.0, 0.0]
        };
        (vol, grad)
    }

    fn quad_form(&self, t: usize, idx: &[usize], g: &[f64]) -> f64 {
        let mut total = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                total += g[a] * g[b] * self.cov(t, i, j);
            }
        }
        (total.max(0.0) / self.count as f64).sqrt()
    }
}

fn tri(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Column layout of one economy's per-period record:
/// `c, c^2, s, theta_1..N, 1{z = 0}..1{z = M-1}`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    offset: usize,
    n: usize,
    m: usize,
}

impl Layout {
    fn width(&self) -> usize {
        3 + self.n + self.m
    }
    fn c(&self) -> usize {
        self.offset
    }
    fn c2(&self) -> usize {
        self.offset + 1
    }
    fn s(&self) -> usize {
        self.offset + 2
    }
    fn theta(&self, i: usize) -> usize {
        self.offset + 3 + i
    }
    fn state(&self, z: usize) -> usize {
        self.offset + 3 + self.n + z
    }

    fn statistics(&self, mo: &Moments, periods: usize, w0: f64, init: InitialState) -> PathStatistics {
        let mut st = PathStatistics {
            n_paths: mo.count,
            initial_wealth: w0,
            initial_state: init,
            mean_consumption: Vec::with_capacity(periods),
            se_consumption: Vec::with_capacity(periods),
            mean_savings: Vec::with_capacity(periods),
            se_savings: Vec::with_capacity(periods),
            consumption_volatility: Vec::with_capacity(periods),
            se_volatility: Vec::with_capacity(periods),
            mean_posterior: Vec::with_capacity(periods),
            se_posterior: Vec::with_capacity(periods),
            state_frequency: Vec::with_capacity(periods),
        };
        for t in 0..periods {
            st.mean_consumption.push(mo.mean(t, self.c()));
            st.se_consumption.push(mo.se(t, self.c()));
            st.mean_savings.push(mo.mean(t, self.s()));
            st.se_savings.push(mo.se(t, self.s()));
            let (vol, g) = mo.volatility(t, self.c(), self.c2());
            st.consumption_volatility.push(vol);
            st.se_volatility.push(mo.quad_form(t, &[self.c(), self.c2()], &g));
            st.mean_posterior.push((0..self.n).map(|i| mo.mean(t, self.theta(i))).collect());
            st.se_posterior.push((0..self.n).map(|i| mo.se(t, self.theta(i))).collect());
            st.state_frequency.push((0..self.m).map(|z| mo.mean(t, self.state(z))).collect());
        }
        st
    }
}

/// One household's position along a path.
#[derive(Debug, Clone)]
struct Household<'a> {
    policy: &'a PolicyTable,
    econ: &'a Economy,
    layout: Layout,
    tracking: BeliefTracking,
    source: TransitionSource,
    rao_blackwell: bool,
    w: f64,
    z: usize,
    theta: Belief,
    c: f64,
}

impl<'a> Household<'a> {
    fn lookup(&self, theta: &Belief) -> usize {
        self.policy.beliefs().project(theta)
    }

    fn consume(&mut self) {
        let ell = self.lookup(&self.theta);
        let c = self.policy.consumption(self.w, self.z, ell);
        self.c = c.min(self.w);
    }

    fn transition_prob(&self, truth: &Matrix, zn: usize) -> f64 {
        match self.source {
            TransitionSource::True => truth.get(self.z, zn),
            TransitionSource::Subjective => {
                mixture_prob(&self.econ.candidates, &self.theta, self.z, zn)
            }
        }
    }

    fn posterior(&self, zn: usize) -> Result<Belief> {
        let cands = &self.econ.candidates;
        match self.tracking {
            BeliefTracking::Exact => bayes_update(cands, &self.theta, self.z, zn),
            BeliefTracking::ProjectAndPropagate => {
                let grid = self.policy.beliefs();
                let post = bayes_update(cands, grid.point(self.lookup(&self.theta)), self.z, zn)?;
                Ok(grid.point(grid.project(&post)).clone())
            }
        }
    }

    fn record(&self, row: &mut [f64], rb: Option<(f64, f64, f64)>) {
        let l = self.layout;
        let (c, c2, s) = rb.unwrap_or((self.c, self.c * self.c, self.w - self.c));
        row[l.c()] = c;
        row[l.c2()] = c2;
        row[l.s()] = s;
        for (i, w) in self.theta.weights().iter().enumerate() {
            row[l.theta(i)] = *w;
        }
        for z in 0..l.m {
            row[l.state(z)] = if z == self.z { 1.0 } else { 0.0 };
        }
    }

    /// One-step conditional means of `c`, `c^2` and `s` next period given
    /// the current node, over the discrete atoms.
    fn conditional_next(&self, truth: &Matrix) -> Result<(f64, f64, f64)> {
        let s = self.w - self.c;
        let (mut ec, mut ec2, mut es) = (0.0, 0.0, 0.0);
        for zn in 0..self.layout.m {
            let p = self.transition_prob(truth, zn);
            if p == 0.0 {
                continue;
            }
            let ell = self.lookup(&self.posterior(zn)?);
            for a in self.econ.atoms.atoms(zn) {
                let w = a.ret * s + a.income;
                let c = self.policy.consumption(w, zn, ell).min(w);
                let q = p * a.prob;
                ec += q * c;
                ec2 += q * c * c;
                es += q * (w - c);
            }
        }
        Ok((ec, ec2, es))
    }

    /// Moves to the next period on the shared draw.
    fn advance(&mut self, truth: &Matrix, d: &Draw) -> Result<Option<(f64, f64, f64)>> {
        let rb = if self.rao_blackwell {
            Some(self.conditional_next(truth)?)
        } else {
            None
        };
        let zn = pick((0..self.layout.m).map(|j| self.transition_prob(truth, j)), d.u_state);
        let (r, y) = self.econ.law.realize(zn, d);
        let theta = self.posterior(zn)?;
        self.w = r * (self.w - self.c) + y;
        self.z = zn;
        self.theta = theta;
        self.consume();
        Ok(rb)
    }
}

struct PanelSpec<'a> {
    cfg: &'a SimulationConfig,
    truth: &'a Matrix,
    w0: f64,
    pi: Option<Vec<f64>>,
    members: Vec<(&'a PolicyTable, &'a Economy, Belief)>,
}

impl PanelSpec<'_> {
    fn layouts(&self) -> Vec<Layout> {
        let mut offset = 0;
        self.members
            .iter()
            .map(|(_, e, prior)| {
                let l = Layout {
                    offset,
                    n: prior.len(),
                    m: e.n_states(),
                };
                offset += l.width();
                l
            })
            .collect()
    }

    fn run(&self) -> Result<Moments> {
        let layouts = self.layouts();
        let dim: usize = layouts.iter().map(|l| l.width()).sum();
        let periods = self.cfg.horizon + 1;
        let n_chunks = self.cfg.n_paths.div_ceil(CHUNK);
        let chunks: Vec<Result<Moments>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut mo = Moments::new(dim, periods);
                let mut row = vec![0.0; dim];
                for k in c * CHUNK..((c + 1) * CHUNK).min(self.cfg.n_paths) {
                    self.path(k, &layouts, &mut row, &mut mo)?;
                }
                Ok(mo)
            })
            .collect();
        let mut total = Moments::new(dim, periods);
        for c in chunks {
            total.merge(&c?);
        }
        Ok(total)
    }

    fn path(&self, k: usize, layouts: &[Layout], row: &mut [f64], mo: &mut Moments) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(k as u64);
        let z0 = match (self.cfg.initial_state, &self.pi) {
            (InitialState::Fixed(z), _) => z,
            (InitialState::Stationary, Some(pi)) => pick(pi.iter().copied(), rng.random()),
            (InitialState::Stationary, None) => unreachable!("stationary law computed"),
        };
        let mut hh: Vec<Household> = self
            .members
            .iter()
            .zip(layouts)
            .map(|((policy, econ, prior), layout)| {
                let mut h = Household {
                    policy,
                    econ,
                    layout: *layout,
                    tracking: self.cfg.beliefs,
                    source: self.cfg.transitions,
                    rao_blackwell: self.cfg.rao_blackwell,
                    w: self.w0,
                    z: z0,
                    theta: prior.clone(),
                    c: 0.0,
                };
                h.consume();
                h
            })
            .collect();
        for h in &hh {
            h.record(row, None);
        }
        mo.add(0, row);
        for t in 1..=self.cfg.horizon {
            let d = Draw::sample(&mut rng);
            for h in hh.iter_mut() {
                let rb = h.advance(self.truth, &d).map_err(|e| {
                    Error::Domain(format!("path {k}, period {t}: {e}"))
                })?;
                h.record(row, rb);
            }
            mo.add(t, row);
        }
        mo.count += 1;
        Ok(())
    }
}

fn max_first_knot(p: &PolicyTable) -> f64 {
    let n_beliefs = p.beliefs().len();
    (0..p.n_states())
        .flat_map(|z| (0..n_beliefs).map(move |ell| (z, ell)))
        .map(|(z, ell)| p.first_knot(z, ell))
        .fold(0.0, f64::max)
}

/// Default starting wealth: one unit above the largest binding threshold.
pub fn default_initial_wealth(policies: &[&PolicyTable]) -> f64 {
    policies.iter().map(|p| max_first_knot(p)).fold(0.0, f64::max) + 1.0
}

fn check_policy(p: &PolicyTable, econ: &Economy, n_beliefs: usize) -> Result<()> {
    if p.n_states() != econ.n_states() {
        return Err(Error::Domain(format!(
            "policy has {} states, economy has {}",
            p.n_states(),
            econ.n_states()
        )));
    }
    if p.beliefs().n_candidates() != n_beliefs {
        return Err(Error::Domain(format!(
            "policy belief grid is over {} candidates, economy has {n_beliefs}",
            p.beliefs().n_candidates()
        )));
    }
    Ok(())
}

fn initial_law(cfg: &SimulationConfig, truth: &Matrix) -> Result<Option<Vec<f64>>> {
    match cfg.initial_state {
        InitialState::Stationary => Ok(Some(stationary_distribution(truth)?)),
        InitialState::Fixed(_) => Ok(None),
    }
}

/// Simulates `cfg.n_paths` households under the true kernel.
pub fn simulate_panel(
    policy: &PolicyTable,
    cfg: &SimulationConfig,
    econ: &Economy,
) -> Result<PathStatistics> {
    cfg.validate(econ.candidates.len(), econ.n_states())?;
    check_policy(policy, econ, econ.candidates.len())?;
    let truth = econ.candidates.get(cfg.true_kernel);
    let w0 = cfg
        .initial_wealth
        .unwrap_or_else(|| default_initial_wealth(&[policy]));
    let spec = PanelSpec {
        cfg,
        truth,
        w0,
        pi: initial_law(cfg, truth)?,
        members: vec![(policy, econ, cfg.prior.clone())],
    };
    let mo = spec.run()?;
    let layout = spec.layouts()[0];
    Ok(layout.statistics(&mo, cfg.horizon + 1, w0, cfg.initial_state))
}

/// Runs a learning economy and a known-kernel benchmark on the same draws.
///
/// `full` must have a single candidate; its household holds the vertex
/// belief on it. Data are generated by candidate `cfg.true_kernel` of the
/// learning economy.
pub fn compare_learning_benchmark(
    p_learning: &PolicyTable,
    learning: &Economy,
    p_full_info: &PolicyTable,
    full: &Economy,
    cfg: &SimulationConfig,
) -> Result<PairedStatistics> {
    if p_learning.model_hash() != p_full_info.model_hash() {
        return Err(Error::config(
            "policy",
            format!(
                "model hashes differ: learning {:?}, full information {:?}",
                p_learning.model_hash(),
                p_full_info.model_hash()
            ),
        ));
    }
    if full.candidates.len() != 1 {
        return Err(Error::Domain(format!(
            "full-information economy must have one candidate, has {}",
            full.candidates.len()
        )));
    }
    cfg.validate(learning.candidates.len(), learning.n_states())?;
    check_policy(p_learning, learning, learning.candidates.len())?;
    check_policy(p_full_info, full, 1)?;
    let truth = learning.candidates.get(cfg.true_kernel);
    let w0 = cfg
        .initial_wealth
        .unwrap_or_else(|| default_initial_wealth(&[p_learning, p_full_info]));
    let spec = PanelSpec {
        cfg,
        truth,
        w0,
        pi: initial_law(cfg, truth)?,
        members: vec![
            (p_learning, learning, cfg.prior.clone()),
            (p_full_info, full, Belief::vertex(1, 0)),
        ],
    };
    let mo = spec.run()?;
    let ls = spec.layouts();
    let (a, b) = (ls[0], ls[1]);
    let periods = cfg.horizon + 1;
    let mut out = PairedStatistics {
        learning: a.statistics(&mo, periods, w0, cfg.initial_state),
        full_info: b.statistics(&mo, periods, w0, cfg.initial_state),
        diff_consumption: Vec::with_capacity(periods),
        se_diff_consumption: Vec::with_capacity(periods),
        diff_savings: Vec::with_capacity(periods),
        se_diff_savings: Vec::with_capacity(periods),
        diff_volatility: Vec::with_capacity(periods),
        se_diff_volatility: Vec::with_capacity(periods),
    };
    for t in 0..periods {
        out.diff_consumption.push(mo.mean(t, a.c()) - mo.mean(t, b.c()));
        out.se_diff_consumption
            .push(mo.quad_form(t, &[a.c(), b.c()], &[1.0, -1.0]));
        out.diff_savings.push(mo.mean(t, a.s()) - mo.mean(t, b.s()));
        out.se_diff_savings
            .push(mo.quad_form(t, &[a.s(), b.s()], &[1.0, -1.0]));
        let (va, ga) = mo.volatility(t, a.c(), a.c2());
        let (vb, gb) = mo.volatility(t, b.c(), b.c2());
        out.diff_volatility.push(va - vb);
        out.se_diff_volatility.push(mo.quad_form(
            t,
            &[a.c(), a.c2(), b.c(), b.c2()],
            &[ga[0], ga[1], -gb[0], -gb[1]],
        ));
    }
    Ok(out)
}
