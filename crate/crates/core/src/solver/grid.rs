use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Exogenous savings grid `0 = s_1 < ... < s_G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SavingsGrid {
    points: Vec<f64>,
}

impl SavingsGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("savings grid needs at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::Domain(format!(
                "savings grid must start at 0, starts at {}",
                points[0]
            )));
        }
        if points.iter().any(|v| !v.is_finite()) || points.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Domain(
                "savings grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TryFrom<Vec<f64>> for SavingsGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SavingsGrid::new(v)
    }
}

impl From<SavingsGrid> for Vec<f64> {
    fn from(g: SavingsGrid) -> Self {
        g.points
    }
}

/// Exponentially spaced grid on `[0, s_max]`:
/// `s(u) = s_max (e^{k u} - 1) / (e^k - 1)` on `u = 0, 1/(G-1), ..., 1`,
/// with the curvature `k = 2 ln(s_max / s_median - 1)` placing `s(1/2)` at
/// `s_median`.
pub fn build_savings_grid(g: usize, s_max: f64, s_median: f64) -> Result<SavingsGrid> {
    if g < 2 {
        return Err(Error::Domain(format!("savings grid needs G >= 2, got {g}")));
    }
    if !(s_median > 0.0 && s_median < s_max) || !s_max.is_finite() {
        return Err(Error::Domain(format!(
            "savings grid needs 0 < s_median < s_max, got {s_median} and {s_max}"
        )));
    }
    if s_median >= s_max / 2.0 {
        return Err(Error::Domain(format!(
            "s_median {s_median} >= s_max / 2 cannot be reached by an exponential warp; use a linear grid"
        )));
    }
    let k = curvature(s_max, s_median);
    let denom = k.exp_m1();
    let last = (g - 1) as f64;
    let mut points: Vec<f64> = (0..g)
        .map(|i| s_max * (k * i as f64 / last).exp_m1() / denom)
        .collect();
    points[0] = 0.0;
    points[g - 1] = s_max;
    if (g - 1).is_multiple_of(2) {
        points[(g - 1) / 2] = s_median;
    }
    SavingsGrid::new(points)
}

/// Warp curvature that puts the midpoint of the unit interval at `s_median`.
pub fn curvature(s_max: f64, s_median: f64) -> f64 {
    2.0 * (s_max / s_median - 1.0).ln()
}

/// Evenly spaced grid on `[0, s_max]`.
pub fn build_linear_savings_grid(g: usize, s_max: f64) -> Result<SavingsGrid> {
    if g < 2 || !(s_max > 0.0) {
        return Err(Error::Domain("linear grid needs G >= 2 and s_max > 0".into()));
    }
    let last = (g - 1) as f64;
    let mut points: Vec<f64> = (0..g).map(|i| s_max * i as f64 / last).collect();
    points[g - 1] = s_max;
    SavingsGrid::new(points)
}
