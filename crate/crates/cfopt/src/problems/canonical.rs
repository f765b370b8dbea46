//! Canonical linear form of a decision problem.
//!
//! `min (sum_i w_i d_i)^T z` over the polytope `{ z >= 0 : A z (<=|=) b }`,
//! where the `d_i` are per-scenario objective vectors. For any feasible
//! native decision (mapped onto the canonical variables) the canonical
//! objective equals the native weighted cost. The dual explanation
//! certificate attaches one multiplier per row: nonpositive for `<=`
//! rows, free for `=` rows.

use serde::{Deserialize, Serialize};

/// Row sense of the canonical polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
}

/// One sparse row `coeffs . z (<=|=) rhs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl CanonicalRow {
    pub fn le(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        CanonicalRow { coeffs, sense: RowSense::Le, rhs }
    }

    pub fn eq(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        CanonicalRow { coeffs, sense: RowSense::Eq, rhs }
    }

    pub fn satisfied_by(&self, z: &[f64], tol: f64) -> bool {
        let lhs: f64 = self.coeffs.iter().map(|&(j, c)| c * z[j]).sum();
        let scale = 1.0 + lhs.abs().max(self.rhs.abs());
        match self.sense {
            RowSense::Le => lhs <= self.rhs + tol * scale,
            RowSense::Eq => (lhs - self.rhs).abs() <= tol * scale,
        }
    }
}

/// The canonical form itself; variables are implicitly nonnegative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearCanonicalForm {
    pub n_vars: usize,
    pub rows: Vec<CanonicalRow>,
    /// Sparse `d_i` per scenario.
    pub scenario_objectives: Vec<Vec<(usize, f64)>>,
}

impl LinearCanonicalForm {
    /// `d_i . z` for one scenario.
    pub fn scenario_cost(&self, i: usize, z: &[f64]) -> f64 {
        self.scenario_objectives[i].iter().map(|&(j, c)| c * z[j]).sum()
    }

    /// `(sum_i w_i d_i) . z`.
    pub fn weighted_cost(&self, weights: &[f64], z: &[f64]) -> f64 {
        weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| w * self.scenario_cost(i, z))
            .sum()
    }

    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        z.iter().all(|&v| v >= -tol) && self.rows.iter().all(|r| r.satisfied_by(z, tol))
    }
}
