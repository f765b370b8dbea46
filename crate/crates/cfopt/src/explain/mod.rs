//! Nearest counterfactual explanations of weighted-SAA decisions.
//!
//! Given a context `x_now`, its prescribed decision `z_star` and an
//! alternative decision `z_alt`, an explanation is a nearby context where
//! the alternative holds up:
//!
//! * a **relative** explanation makes `z_alt` no worse than `z_star`
//!   under the re-evaluated predictor weights;
//! * an **absolute** explanation makes `z_alt` globally optimal for the
//!   weighted problem.
//!
//! Both are found by minimizing the normalized l1 distance to `x_now`
//! over a mixed-integer encoding of the predictor's weight function.
//! Absolute explanations come from either the cutting loop in
//! [`absolute_explain_iterative`] (any problem, any objective) or the
//! single-level duality reformulation in [`absolute_explain_dual`]
//! (linear problems with expected cost).
//!
//! Every returned explanation is re-verified against the *real* predictor
//! and solver, never against its own MIP variables.

mod absolute;
mod cvar_enc;
mod encode;
mod relative;

pub use absolute::{absolute_explain_dual, absolute_explain_iterative, AbsoluteAlgorithm};
pub use cvar_enc::{encode_cvar_pair, CvarPair};
pub use encode::{encode_context, encode_forest, encode_knn, ContextVars, PredictorEncoding};
pub use relative::{relative_explain, relative_explain_cvar};

use serde::{Deserialize, Serialize};

use crate::feature_space::{ContextVector, FeatureSpace};
use crate::milp::SolverParams;
use crate::predictors::Predictor;
use crate::problems::{
    cvar_evaluate, Decision, ObjectiveKind, ProblemInstance, ScenarioSet,
};
use crate::{Error, Result};

/// Tolerance of all posterior explanation checks.
pub const VERIFY_TOL: f64 = 1e-6;

/// Which explanation class is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplainMode {
    Relative,
    Absolute,
}

/// How absolute explanations are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbsoluteMethod {
    /// The cutting procedure (region cuts plus valid inequalities).
    Iterative,
    /// Single-level reformulation through the LP duality certificate.
    Dual,
}

/// One explanation instance.
#[derive(Debug, Clone)]
pub struct ExplanationQuery<'a> {
    pub space: &'a FeatureSpace,
    pub predictor: &'a Predictor,
    pub instance: &'a ProblemInstance,
    pub scenarios: &'a ScenarioSet,
    /// The context in which `z_star` was prescribed.
    pub x_now: &'a ContextVector,
    pub z_star: &'a Decision,
    pub z_alt: &'a Decision,
    pub objective: ObjectiveKind,
    pub params: SolverParams,
}

impl ExplanationQuery<'_> {
    pub(crate) fn validate(&self) -> Result<()> {
        self.space.require_valid(self.x_now)?;
        self.instance.require_feasible(self.z_star)?;
        self.instance.require_feasible(self.z_alt)?;
        if self.predictor.n_samples() != self.scenarios.len() {
            return Err(Error::DimensionMismatch {
                what: "predictor samples vs scenarios",
                expected: self.scenarios.len(),
                got: self.predictor.n_samples(),
            });
        }
        match (self.instance.objective_kind(), self.objective) {
            (ObjectiveKind::Cvar(a), ObjectiveKind::Cvar(b)) if (a - b).abs() < 1e-12 => Ok(()),
            (ObjectiveKind::Cvar(a), other) => Err(Error::invalid(format!(
                "instance requires a CVaR({a}) objective, query has {other:?}"
            ))),
            (ObjectiveKind::Expected, _) => Ok(()),
        }
    }

    /// Per-scenario losses of a decision.
    pub(crate) fn losses(&self, z: &Decision) -> Result<Vec<f64>> {
        self.scenarios.iter().map(|y| self.instance.cost(z, y)).collect()
    }

    /// The weighted objective `g(w, z)` under this query's objective kind.
    pub(crate) fn g(&self, weights: &[f64], losses: &[f64]) -> Result<f64> {
        match self.objective {
            ObjectiveKind::Expected => {
                Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum())
            }
            ObjectiveKind::Cvar(alpha) => cvar_evaluate(losses, weights, alpha),
        }
    }
}

/// Terminal state of an explanation computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplainStatus {
    Found,
    /// No explanation exists (dominated alternative or exhausted regions).
    NoneExists,
    /// The time limit expired before an explanation was proven.
    NotFoundTimeLimit,
}

/// Posterior re-check of a candidate explanation with the real predictor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationRecord {
    /// `g(w, z_alt) - g(w, z_star)` at the candidate; at most
    /// [`VERIFY_TOL`] for a sound relative explanation.
    pub relative_gap: f64,
    /// For absolute candidates: `g(w, z_alt)` minus the re-solved wSAA
    /// optimum at the candidate.
    pub absolute_gap: Option<f64>,
    pub passed: bool,
}

/// Outcome of one explanation query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationResult {
    pub status: ExplainStatus,
    pub mode: ExplainMode,
    pub explanation: Option<ContextVector>,
    /// Normalized l1 distance from `x_now`, recomputed outside the MIP.
    pub distance: Option<f64>,
    /// Acceptance checks performed (loop passes / incumbents filtered).
    pub iterations: usize,
    /// Cuts added across the run.
    pub cuts: usize,
    pub verification: Option<VerificationRecord>,
    pub wall_time: f64,
}

impl ExplanationResult {
    pub(crate) fn not_found(
        status: ExplainStatus,
        mode: ExplainMode,
        iterations: usize,
        cuts: usize,
        wall_time: f64,
    ) -> Self {
        ExplanationResult {
            status,
            mode,
            explanation: None,
            distance: None,
            iterations,
            cuts,
            verification: None,
            wall_time,
        }
    }
}

/// Re-evaluates the explanation definitions at `candidate` with the real
/// predictor: the relative criterion gap, and (for absolute mode) the
/// optimality gap of `z_alt` after re-solving the weighted problem.
pub fn verify(
    query: &ExplanationQuery,
    mode: ExplainMode,
    candidate: &ContextVector,
) -> Result<VerificationRecord> {
    query.space.require_valid(candidate)?;
    let weights = query.predictor.weights(query.space, candidate)?;
    let losses_alt = query.losses(query.z_alt)?;
    let losses_star = query.losses(query.z_star)?;
    let g_alt = query.g(weights.as_slice(), &losses_alt)?;
    let g_star = query.g(weights.as_slice(), &losses_star)?;
    let relative_gap = g_alt - g_star;
    let absolute_gap = match mode {
        ExplainMode::Relative => None,
        ExplainMode::Absolute => {
            let (_, g_opt) =
                query.instance.solve_wsaa(query.scenarios, &weights, &query.params)?;
            Some(g_alt - g_opt)
        }
    };
    let passed = relative_gap <= VERIFY_TOL
        && absolute_gap.map_or(true, |g| g <= VERIFY_TOL);
    Ok(VerificationRecord { relative_gap, absolute_gap, passed })
}
