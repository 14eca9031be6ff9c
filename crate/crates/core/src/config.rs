//! Run configuration: one JSON document describing the model, the candidate
//! kernels, the grids, the solver and the simulation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::{build_simplex_grid, Belief, SimplexGrid};
use crate::error::{Error, Result};
use crate::model::{
    discretize_model, CalibratedHouseholdModel, CandidateSet, Matrix, StateOrder, StateShockMap,
};
use crate::quadrature::{gauss_hermite_normal, MAX_NODES};
use crate::simulate::{
    BeliefTracking, Economy, InitialState, ShockLaw, SimulationConfig, TransitionSource,
};
use crate::solver::{build_savings_grid, Problem, SavingsGrid};

pub const PAPER_PRESET: &str = "paper-2026";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidatesConfig {
    /// Candidate transition matrices, each a list of rows.
    pub matrices: Vec<Vec<Vec<f64>>>,
    /// Explicit dominating kernel; the rowwise upper envelope is used when
    /// absent.
    #[serde(default)]
    pub p_star: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    /// Savings grid size `G`.
    pub savings_points: usize,
    pub s_max: f64,
    pub s_median: f64,
    /// Simplex resolution `H`.
    pub belief_resolution: usize,
    pub quadrature_return: usize,
    pub quadrature_income: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: CalibratedHouseholdModel,
    pub candidates: CandidatesConfig,
    pub grids: GridsConfig,
    pub solver: SolverConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl RunConfig {
    /// The monthly two-state calibration with expansion and recession
    /// regimes.
    pub fn paper_2026() -> Self {
        RunConfig {
            model: CalibratedHouseholdModel {
                beta: (-0.05_f64 / 12.0).exp(),
                gamma: 2.0,
                alpha_portfolio: 0.4,
                log_rf: 3.084e-4,
                mu: vec![7.139e-3, -1.735e-3],
                sigma: vec![0.0391, 0.0577],
                y_persistent: vec![1.8539, 0.0165],
                sigma_y2: 0.5395,
                state_order: StateOrder::new(vec![0, 1]).expect("permutation"),
            },
            candidates: CandidatesConfig {
                matrices: vec![
                    vec![vec![0.8, 0.2], vec![0.3, 0.7]],
                    vec![vec![0.9855, 0.0145], vec![0.0968, 0.9032]],
                ],
                p_star: None,
            },
            grids: GridsConfig {
                savings_points: 2000,
                s_max: 1000.0,
                s_median: 150.0,
                belief_resolution: 99,
                quadrature_return: 7,
                quadrature_income: 7,
            },
            solver: SolverConfig {
                tol: 1e-4,
                max_iter: 100_000,
            },
            simulation: SimulationConfig {
                n_paths: 50_000,
                horizon: 600,
                prior: Belief::uniform(2),
                initial_wealth: None,
                initial_state: InitialState::Stationary,
                true_kernel: 1,
                seed: 20260101,
                rao_blackwell: false,
                transitions: TransitionSource::True,
                beliefs: BeliefTracking::Exact,
            },
            output_dir: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PAPER_PRESET => Ok(Self::paper_2026()),
            other => Err(Error::config(
                "preset",
                format!("unknown preset {other:?}; available: {PAPER_PRESET}"),
            )),
        }
    }

    /// Scales the run down for continuous integration: `G = 200`, `H = 20`,
    /// `K = 5000`.
    pub fn reduced(mut self) -> Self {
        self.grids.savings_points = 200;
        self.grids.belief_resolution = 20;
        self.simulation.n_paths = 5000;
        self
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let m = self.model.n_states();
        let check_matrix = |path: String, rows: &[Vec<f64>]| -> Result<()> {
            if rows.len() != m {
                return Err(Error::config(path, format!("has {} rows, expected {m}", rows.len())));
            }
            for (r, row) in rows.iter().enumerate() {
                let at = format!("{path}[{r}]");
                if row.len() != m {
                    return Err(Error::config(at, format!("has {} entries, expected {m}", row.len())));
                }
                if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::config(at, "entries must be nonnegative"));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(at, format!("row sums to {total}, expected 1")));
                }
            }
            Ok(())
        };
        if self.candidates.matrices.is_empty() {
            return Err(Error::config("candidates.matrices", "at least one candidate is required"));
        }
        for (i, p) in self.candidates.matrices.iter().enumerate() {
            check_matrix(format!("candidates.matrices[{i}]"), p)?;
        }
        if let Some(p) = &self.candidates.p_star {
            check_matrix("candidates.p_star".into(), p)?;
        }
        let g = &self.grids;
        if g.savings_points < 2 {
            return Err(Error::config("grids.savings_points", "must be at least 2"));
        }
        if !(g.s_max > 0.0 && g.s_max.is_finite()) {
            return Err(Error::config("grids.s_max", "must be positive"));
        }
        if !(g.s_median > 0.0 && g.s_median < g.s_max / 2.0) {
            return Err(Error::config(
                "grids.s_median",
                format!("must lie in (0, s_max / 2), got {}", g.s_median),
            ));
        }
        if g.belief_resolution == 0 {
            return Err(Error::config("grids.belief_resolution", "must be at least 1"));
        }
        for (name, n) in [
            ("quadrature_return", g.quadrature_return),
            ("quadrature_income", g.quadrature_income),
        ] {
            if n == 0 || n > MAX_NODES {
                return Err(Error::config(
                    format!("grids.{name}"),
                    format!("must lie in 1..={MAX_NODES}, got {n}"),
                ));
            }
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::config("solver.tol", "must be positive"));
        }
        if self.solver.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "must be at least 1"));
        }
        self.simulation
            .validate(self.candidates.matrices.len(), m)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// Hash of everything that determines the household's environment apart
    /// from the candidate kernels, so that learning and known-kernel
    /// policies of one calibration share it.
    pub fn model_hash(&self) -> String {
        let key = serde_json::json!({
            "model": self.model,
            "savings_points": self.grids.savings_points,
            "s_max": self.grids.s_max,
            "s_median": self.grids.s_median,
            "quadrature_return": self.grids.quadrature_return,
            "quadrature_income": self.grids.quadrature_income,
        });
        hex_digest(key.to_string().as_bytes())
    }

    /// Hash of the inputs of one solve: the environment, the candidates the
    /// household learns over, the belief resolution and the solver settings.
    pub fn solve_hash(&self, full_info: bool) -> String {
        let (cands, h) = if full_info {
            (
                vec![self.candidates.matrices[self.simulation.true_kernel].clone()],
                1,
            )
        } else {
            (self.candidates.matrices.clone(), self.grids.belief_resolution)
        };
        let key = serde_json::json!({
            "model_hash": self.model_hash(),
            "candidates": cands,
            "belief_resolution": h,
            "solver": self.solver,
        });
        hex_digest(key.to_string().as_bytes())
    }

    pub fn candidate_set(&self) -> Result<CandidateSet> {
        let mats = self
            .candidates
            .matrices
            .iter()
            .map(|rows| Matrix::from_rows(rows.clone()))
            .collect::<Result<Vec<_>>>()?;
        CandidateSet::new(mats, self.model.state_order.clone())
    }

    pub fn p_star(&self) -> Result<Option<Matrix>> {
        self.candidates
            .p_star
            .as_ref()
            .map(|rows| Matrix::from_rows(rows.clone()))
            .transpose()
    }

    pub fn shocks(&self) -> Result<StateShockMap> {
        discretize_model(
            &self.model,
            &gauss_hermite_normal(self.grids.quadrature_return)?,
            &gauss_hermite_normal(self.grids.quadrature_income)?,
        )
    }

    pub fn savings_grid(&self) -> Result<SavingsGrid> {
        build_savings_grid(
            self.grids.savings_points,
            self.grids.s_max,
            self.grids.s_median,
        )
    }

    pub fn belief_grid(&self) -> Result<SimplexGrid> {
        build_simplex_grid(self.candidates.matrices.len(), self.grids.belief_resolution)
    }

    /// The learning problem over every candidate.
    pub fn problem(&self) -> Result<Problem> {
        Ok(Problem::new(
            self.model.utility()?,
            self.candidate_set()?,
            self.shocks()?,
            self.savings_grid()?,
            self.belief_grid()?,
        )?
        .with_model_hash(self.model_hash()))
    }

    /// The known-kernel problem under the data-generating candidate.
    pub fn full_info_problem(&self) -> Result<Problem> {
        let cands = self.candidate_set()?.single(self.simulation.true_kernel);
        Ok(Problem::new(
            self.model.utility()?,
            cands,
            self.shocks()?,
            self.savings_grid()?,
            build_simplex_grid(1, 1)?,
        )?
        .with_model_hash(self.model_hash()))
    }

    pub fn economy(&self) -> Result<Economy> {
        Economy::new(
            self.candidate_set()?,
            ShockLaw::Continuous(self.model.clone()),
            self.shocks()?,
        )
    }

    pub fn full_info_economy(&self) -> Result<Economy> {
        Economy::new(
            self.candidate_set()?.single(self.simulation.true_kernel),
            ShockLaw::Continuous(self.model.clone()),
            self.shocks()?,
        )
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
