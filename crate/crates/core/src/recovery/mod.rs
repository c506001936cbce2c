//! Sparse decomposition of summed vectors.
//!
//! [`decompose`] sweeps a geometric LASSO path with warm starts and
//! sequential DPP screening, ranks every column that was ever active by its
//! largest coefficient along the path, and solves the least-squares system on
//! the top `candidate_cap` of them. Below the recovery threshold the planted
//! members are among the candidates, so the restricted solve returns their
//! weights exactly and every decoy at zero.
//!
//! [`baseline_nn_decompose`] and [`baseline_lasso_fixed`] are the two simpler
//! decoders the pipeline is compared against.

mod baseline;
mod lasso;
mod pipeline;
mod screening;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorClass;

pub use baseline::{baseline_lasso_fixed, baseline_nn_decompose};
pub use lasso::{kkt_violation, lasso_at, lasso_at_with_stats, LassoStats};
pub use pipeline::{decompose, exact_solve_support, ExactSolve};
pub use screening::{dpp_screen, dpp_survivors};

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("coordinate descent did not converge after {iterations} sweeps (KKT violation {kkt_violation:.3e})")]
    NonConvergence {
        iterations: usize,
        kkt_violation: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("lambda ordering violated: need lambda_to ({to}) <= lambda_from ({from}) <= lambda_max ({max})")]
    LambdaOrder { from: f64, to: f64, max: f64 },
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("dictionary has no columns")]
    EmptyDictionary,
}

impl RecoveryError {
    pub fn class(&self) -> ErrorClass {
        match self {
            RecoveryError::NonConvergence { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

/// Solver settings for the LASSO path and the final exact solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    /// Explicit descending grid of relative lambdas in (0, 1]; each value is
    /// multiplied by `lambda_max` of the normalized target. `None` means a
    /// geometric grid of `grid_size` points from 1 down to `grid_min_ratio`.
    pub lambda_grid: Option<Vec<f64>>,
    pub grid_size: usize,
    pub grid_min_ratio: f64,
    /// Stop coordinate descent when no coefficient moves by more than this.
    pub cd_tolerance: f64,
    pub max_cd_iters: usize,
    /// Number of path candidates handed to the exact solve; `None` = dimension.
    pub candidate_cap: Option<usize>,
    pub solve_residual_tol: f64,
    pub weight_zero_tol: f64,
    /// End the path early once the columns seen so far reconstruct the
    /// target within `solve_residual_tol`; the final solve is unchanged.
    pub stop_when_exact: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda_grid: None,
            grid_size: 100,
            grid_min_ratio: 1e-3,
            cd_tolerance: 1e-8,
            max_cd_iters: 10_000,
            candidate_cap: None,
            solve_residual_tol: 1e-6,
            weight_zero_tol: 1e-8,
            stop_when_exact: true,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<(), RecoveryError> {
        let bad = |m: &str| Err(RecoveryError::InvalidConfig(m.to_string()));
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return bad("lambda grid is empty");
            }
            if grid.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                return bad("relative lambdas must lie in (0, 1]");
            }
            if grid.windows(2).any(|w| w[1] >= w[0]) {
                return bad("lambda grid must be strictly descending");
            }
        } else {
            if self.grid_size < 1 {
                return bad("grid_size must be at least 1");
            }
            if !(self.grid_min_ratio > 0.0 && self.grid_min_ratio < 1.0) {
                return bad("grid_min_ratio must lie in (0, 1)");
            }
        }
        if !(self.cd_tolerance > 0.0 && self.solve_residual_tol > 0.0 && self.weight_zero_tol > 0.0)
        {
            return bad("tolerances must be positive");
        }
        if self.max_cd_iters == 0 {
            return bad("max_cd_iters must be positive");
        }
        if self.candidate_cap == Some(0) {
            return bad("candidate_cap must be at least 1");
        }
        Ok(())
    }

    /// Relative grid (fractions of `lambda_max`), strictly descending.
    pub fn relative_grid(&self) -> Vec<f64> {
        if let Some(g) = &self.lambda_grid {
            return g.clone();
        }
        if self.grid_size == 1 {
            return vec![1.0];
        }
        let steps = (self.grid_size - 1) as f64;
        (0..self.grid_size)
            .map(|i| self.grid_min_ratio.powf(i as f64 / steps))
            .collect()
    }

    /// KKT slack accepted on every LASSO solution.
    pub fn kkt_tolerance(&self) -> f64 {
        10.0 * self.cd_tolerance
    }
}

/// Dense LASSO coefficient vector, one entry per dictionary column.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    values: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(len: usize) -> Self {
        Coefficients {
            values: vec![0.0; len],
        }
    }

    pub fn from_dense(values: Vec<f64>) -> Self {
        Coefficients { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices with non-zero coefficient, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Solver bookkeeping attached to a [`Decomposition`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: String,
    pub candidates_considered: usize,
    pub lambda_grid_used: Vec<f64>,
    pub normalization_scale: f64,
    /// Path candidates in rank order with their largest |coefficient|.
    pub candidate_ranking: Vec<(usize, f64)>,
    /// Columns kept by the screening rule at each grid point after the first.
    pub survivors_per_lambda: Vec<usize>,
    pub active_per_lambda: Vec<usize>,
    pub cd_sweeps: usize,
    /// Screened-out columns later found to violate the KKT conditions
    /// (re-admitted and solved; only possible through round-off).
    pub screening_violations: usize,
    pub rank_deficient: bool,
    /// More candidates than dimensions were passed to the exact solve.
    pub underdetermined: bool,
    pub steps: usize,
    /// Grid index at which the path stopped early, if it did.
    pub path_stopped_at: Option<usize>,
}

/// Recovered members and weights of a summed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `(token, weight)` in ascending dictionary order.
    pub support: Vec<(String, f64)>,
    pub indices: Vec<usize>,
    pub residual_norm: f64,
    pub exact: bool,
    pub diagnostics: Diagnostics,
}

impl Decomposition {
    pub fn weight_of(&self, token: &str) -> f64 {
        self.support
            .iter()
            .find(|(t, _)| t == token)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Support ordered by decreasing |weight|, ties by dictionary index.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(usize, &(String, f64))> = self.indices.iter().copied().zip(&self.support).collect();
        v.sort_by(|a, b| b.1 .1.abs().total_cmp(&a.1 .1.abs()).then(a.0.cmp(&b.0)));
        v.into_iter().map(|(_, s)| s.clone()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(DecompositionJson::from(self)).expect("decomposition serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct SupportEntry {
    token: String,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct DecompositionJson {
    support: Vec<SupportEntry>,
    residual: f64,
    exact: bool,
    diagnostics: Diagnostics,
}

impl From<&Decomposition> for DecompositionJson {
    fn from(d: &Decomposition) -> Self {
        DecompositionJson {
            support: d
                .support
                .iter()
                .map(|(t, w)| SupportEntry {
                    token: t.clone(),
                    weight: *w,
                })
                .collect(),
            residual: d.residual_norm,
            exact: d.exact,
            diagnostics: d.diagnostics.clone(),
        }
    }
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DecompositionJson::from(self).serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_geometric_descending() {
        let cfg = LassoConfig::default();
        let g = cfg.relative_grid();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 1.0);
        assert!((g[99] - 1e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        let r0 = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-12));
    }

    #[test]
    fn config_validation() {
        assert!(LassoConfig::default().validate().is_ok());
        let mut c = LassoConfig {
            lambda_grid: Some(vec![0.5, 0.6]),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.lambda_grid = Some(vec![0.5, -0.1]);
        assert!(c.validate().is_err());
        c.lambda_grid = None;
        c.cd_tolerance = 0.0;
        assert!(c.validate().is_err());
        c.cd_tolerance = 1e-8;
        c.candidate_cap = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let d = Decomposition {
            support: vec![("a".into(), 1.5)],
            indices: vec![0],
            residual_norm: 0.0,
            exact: true,
            diagnostics: Diagnostics::default(),
        };
        let v = d.to_json();
        assert_eq!(v["support"][0]["token"], "a");
        assert_eq!(v["support"][0]["weight"], 1.5);
        assert_eq!(v["exact"], true);
        assert!(v["diagnostics"].is_object());
        assert_eq!(v["residual"], 0.0);
    }
}
