//! The decision layer: cost functions and weighted-SAA solvers.
//!
//! A [`ProblemInstance`] pairs a per-scenario cost function `c(z, y)` with
//! a feasible decision set. Given predictor weights, [`solve_wsaa`] style
//! methods minimize `sum_i w_i c(z, y_i)` (or its CVaR for the risk-averse
//! shortest path). Linear variants also expose a canonical polytope form
//! used by the dual explanation certificate.

mod canonical;
mod cvar;
mod newsvendor;
mod shipment;
mod shortest_path;

pub use canonical::{CanonicalRow, LinearCanonicalForm, RowSense};
pub use cvar::cvar_evaluate;
pub use newsvendor::Newsvendor;
pub use shipment::Shipment;
pub use shortest_path::{DirectedGraph, PathProblem};

use serde::{Deserialize, Serialize};

use crate::milp::SolverParams;
use crate::predictors::WeightVector;
use crate::{Error, Result};

/// A decision vector of dimension `d_z` (binary-valued for path problems;
/// first-stage quantities for the two-stage shipment model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision(pub Vec<f64>);

impl Decision {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Historical uncertain parameters `{y_i}`, all of dimension `d_y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSet {
    scenarios: Vec<Vec<f64>>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Vec<f64>>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::invalid("scenario set must be nonempty"));
        }
        let d = scenarios[0].len();
        if scenarios.iter().any(|s| s.len() != d) {
            return Err(Error::invalid("scenario vectors must share one dimension"));
        }
        Ok(ScenarioSet { scenarios })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn d_y(&self) -> usize {
        self.scenarios[0].len()
    }

    pub fn scenario(&self, i: usize) -> &[f64] {
        &self.scenarios[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.scenarios.iter().map(|s| s.as_slice())
    }
}

/// Objective aggregation of a weighted problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    Expected,
    /// CVaR at risk tolerance `alpha` in `[0, 1)`.
    Cvar(f64),
}

/// Per-scenario cost differences `c(z_alt, y_i) - c(z_star, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaVector(Vec<f64>);

impl DeltaVector {
    /// Computes the deltas; both decisions must be feasible.
    pub fn compute(
        instance: &ProblemInstance,
        scenarios: &ScenarioSet,
        z_alt: &Decision,
        z_star: &Decision,
    ) -> Result<Self> {
        instance.require_feasible(z_alt)?;
        instance.require_feasible(z_star)?;
        let deltas = scenarios
            .iter()
            .map(|y| Ok(instance.cost(z_alt, y)? - instance.cost(z_star, y)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(DeltaVector(deltas))
    }

    pub fn from_raw(deltas: Vec<f64>) -> Self {
        DeltaVector(deltas)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Outcome of the sample-level existence screen for explanations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplanationExistence {
    /// Some delta is negative; an explanation may exist.
    MayExist,
    /// The alternative is weakly worse on every scenario and strictly
    /// worse on at least one: no explanation exists under any weights.
    CannotExist,
    /// All deltas are zero: the two decisions tie everywhere, so every
    /// context (including the current one) satisfies the relative
    /// criterion with equality.
    EverywhereTied,
}

/// Sufficient-condition screen: if `delta_i >= 0` for all `i`, no weights
/// can make the alternative strictly better, for expected cost and CVaR
/// alike. All-zero deltas are flagged as the degenerate tied case.
pub fn no_explanation_check(deltas: &DeltaVector) -> ExplanationExistence {
    let d = deltas.as_slice();
    if d.iter().any(|&v| v < 0.0) {
        ExplanationExistence::MayExist
    } else if d.iter().all(|&v| v == 0.0) {
        ExplanationExistence::EverywhereTied
    } else {
        ExplanationExistence::CannotExist
    }
}

/// A decision problem with uncertain parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ProblemInstance {
    Newsvendor(Newsvendor),
    Shipment(Shipment),
    ShortestPath(PathProblem),
    CvarShortestPath { path: PathProblem, alpha: f64 },
    /// Generic linear problem: cost `y . z` over `{ z >= 0 : rows }`.
    CustomLinear {
        n_vars: usize,
        rows: Vec<CanonicalRow>,
    },
}

impl ProblemInstance {
    pub fn cvar_shortest_path(path: PathProblem, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must be in [0, 1), got {alpha}")));
        }
        Ok(ProblemInstance::CvarShortestPath { path, alpha })
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ProblemInstance::Newsvendor(_) => "newsvendor",
            ProblemInstance::Shipment(_) => "shipment",
            ProblemInstance::ShortestPath(_) => "shortest_path",
            ProblemInstance::CvarShortestPath { .. } => "cvar_shortest_path",
            ProblemInstance::CustomLinear { .. } => "custom_linear",
        }
    }

    /// Dimension of the scenario vectors this instance consumes.
    pub fn d_y(&self) -> usize {
        match self {
            ProblemInstance::Newsvendor(p) => p.n_products(),
            ProblemInstance::Shipment(p) => p.n_locations,
            ProblemInstance::ShortestPath(p) | ProblemInstance::CvarShortestPath { path: p, .. } => {
                p.graph.n_arcs()
            }
            ProblemInstance::CustomLinear { n_vars, .. } => *n_vars,
        }
    }

    /// Dimension of the (first-stage) decision vector.
    pub fn d_z(&self) -> usize {
        match self {
            ProblemInstance::Newsvendor(p) => p.n_products(),
            ProblemInstance::Shipment(p) => p.n_warehouses,
            ProblemInstance::ShortestPath(p) | ProblemInstance::CvarShortestPath { path: p, .. } => {
                p.graph.n_arcs()
            }
            ProblemInstance::CustomLinear { n_vars, .. } => *n_vars,
        }
    }

    /// How the weighted objective aggregates scenario costs.
    pub fn objective_kind(&self) -> ObjectiveKind {
        match self {
            ProblemInstance::CvarShortestPath { alpha, .. } => ObjectiveKind::Cvar(*alpha),
            _ => ObjectiveKind::Expected,
        }
    }

    /// Per-scenario cost `c(z, y)`. For the two-stage shipment model this
    /// includes the optimal recourse, solved as an embedded LP.
    pub fn cost(&self, z: &Decision, y: &[f64]) -> Result<f64> {
        if y.len() != self.d_y() {
            return Err(Error::DimensionMismatch {
                what: "scenario vector",
                expected: self.d_y(),
                got: y.len(),
            });
        }
        self.require_feasible(z)?;
        match self {
            ProblemInstance::Newsvendor(p) => Ok(p.cost(z.values(), y)),
            ProblemInstance::Shipment(p) => p.cost(z.values(), y),
            ProblemInstance::ShortestPath(p) | ProblemInstance::CvarShortestPath { path: p, .. } => {
                Ok(p.cost(z.values(), y))
            }
            ProblemInstance::CustomLinear { .. } => {
                Ok(z.values().iter().zip(y).map(|(zj, yj)| zj * yj).sum())
            }
        }
    }

    pub fn is_feasible(&self, z: &Decision, tol: f64) -> bool {
        if z.dim() != self.d_z() {
            return false;
        }
        match self {
            ProblemInstance::Newsvendor(p) => p.is_feasible(z.values(), tol),
            ProblemInstance::Shipment(p) => p.is_feasible(z.values(), tol),
            ProblemInstance::ShortestPath(p) | ProblemInstance::CvarShortestPath { path: p, .. } => {
                p.is_feasible(z.values(), tol)
            }
            ProblemInstance::CustomLinear { rows, .. } => {
                z.values().iter().all(|&v| v >= -tol)
                    && rows.iter().all(|r| r.satisfied_by(z.values(), tol))
            }
        }
    }

    pub fn require_feasible(&self, z: &Decision) -> Result<()> {
        if self.is_feasible(z, 1e-5) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "decision is infeasible for {} instance",
                self.variant_name()
            )))
        }
    }

    /// Minimizes the weighted objective over the feasible set and returns
    /// the optimizer with its objective value. Zero-weight scenarios are
    /// dropped from the model.
    pub fn solve_wsaa(
        &self,
        scenarios: &ScenarioSet,
        weights: &WeightVector,
        params: &SolverParams,
    ) -> Result<(Decision, f64)> {
        self.check_scenarios(scenarios, weights)?;
        match self {
            ProblemInstance::Newsvendor(p) => p.solve_wsaa(scenarios, weights, params),
            ProblemInstance::Shipment(p) => p.solve_wsaa(scenarios, weights, params),
            ProblemInstance::ShortestPath(p) => p.solve_wsaa_expected(scenarios, weights, params),
            ProblemInstance::CvarShortestPath { path, alpha } => {
                path.solve_wsaa_cvar(scenarios, weights, *alpha, params)
            }
            ProblemInstance::CustomLinear { n_vars, rows } => {
                solve_custom_linear(*n_vars, rows, scenarios, weights, params)
            }
        }
    }

    /// Evaluates the weighted objective `g(w, z)`: the weighted mean cost,
    /// or its CVaR for the risk-averse variant.
    pub fn weighted_objective(
        &self,
        scenarios: &ScenarioSet,
        weights: &WeightVector,
        z: &Decision,
    ) -> Result<f64> {
        self.check_scenarios(scenarios, weights)?;
        let losses = scenarios
            .iter()
            .map(|y| self.cost(z, y))
            .collect::<Result<Vec<_>>>()?;
        match self.objective_kind() {
            ObjectiveKind::Expected => {
                Ok(losses.iter().zip(weights.as_slice()).map(|(l, w)| l * w).sum())
            }
            ObjectiveKind::Cvar(alpha) => cvar_evaluate(&losses, weights.as_slice(), alpha),
        }
    }

    fn check_scenarios(&self, scenarios: &ScenarioSet, weights: &WeightVector) -> Result<()> {
        if scenarios.d_y() != self.d_y() {
            return Err(Error::DimensionMismatch {
                what: "scenario dimension",
                expected: self.d_y(),
                got: scenarios.d_y(),
            });
        }
        if weights.len() != scenarios.len() {
            return Err(Error::DimensionMismatch {
                what: "weights vs scenarios",
                expected: scenarios.len(),
                got: weights.len(),
            });
        }
        Ok(())
    }

    /// Canonical polytope form `min (sum_i w_i d_i) . z` over
    /// `{ z >= 0 : A z (<=|=) b }`, for the linear variants.
    /// The CVaR shortest path is not linear in this sense.
    pub fn linear_canonical_form(&self, scenarios: &ScenarioSet) -> Result<LinearCanonicalForm> {
        match self {
            ProblemInstance::ShortestPath(p) => Ok(p.canonical_form(scenarios)),
            ProblemInstance::Newsvendor(p) => Ok(p.canonical_form(scenarios)),
            ProblemInstance::CustomLinear { n_vars, rows } => Ok(LinearCanonicalForm {
                n_vars: *n_vars,
                rows: rows.clone(),
                scenario_objectives: scenarios
                    .iter()
                    .map(|y| y.iter().enumerate().map(|(j, &v)| (j, v)).collect())
                    .collect(),
            }),
            other => Err(Error::UnsupportedVariant(format!(
                "{} has no linear canonical form",
                other.variant_name()
            ))),
        }
    }

    /// Maps a native decision onto the canonical variable vector (adding
    /// the per-scenario auxiliaries for the newsvendor).
    pub fn canonical_decision(&self, z: &Decision, scenarios: &ScenarioSet) -> Result<Vec<f64>> {
        match self {
            ProblemInstance::ShortestPath(_) | ProblemInstance::CustomLinear { .. } => {
                Ok(z.values().to_vec())
            }
            ProblemInstance::Newsvendor(p) => Ok(p.canonical_decision(z.values(), scenarios)),
            other => Err(Error::UnsupportedVariant(format!(
                "{} has no linear canonical form",
                other.variant_name()
            ))),
        }
    }
}

fn solve_custom_linear(
    n_vars: usize,
    rows: &[CanonicalRow],
    scenarios: &ScenarioSet,
    weights: &WeightVector,
    params: &SolverParams,
) -> Result<(Decision, f64)> {
    use crate::milp::{LinExpr, Model, Sense, SolveStatus};
    let mut model = Model::new(params.clone());
    let vars: Vec<_> = (0..n_vars)
        .map(|j| model.add_continuous(format!("z{j}"), 0.0, f64::INFINITY))
        .collect::<Result<Vec<_>>>()?;
    for (r, row) in rows.iter().enumerate() {
        let mut expr = LinExpr::new();
        for &(j, c) in &row.coeffs {
            expr.add_term(vars[j], c);
        }
        let sense = match row.sense {
            RowSense::Le => Sense::Le,
            RowSense::Eq => Sense::Eq,
        };
        model.add_constraint(format!("row{r}"), expr, sense, row.rhs)?;
    }
    let mut obj = LinExpr::new();
    for (y, &w) in scenarios.iter().zip(weights.as_slice()) {
        if w == 0.0 {
            continue;
        }
        for (j, &c) in y.iter().enumerate() {
            obj.add_term(vars[j], w * c);
        }
    }
    model.set_objective(obj);
    let out = model.solve()?;
    match out.status {
        SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit => {
            let z = Decision(vars.iter().map(|&v| out.value(v)).collect());
            Ok((z, out.objective.unwrap()))
        }
        s => Err(Error::Solver(format!("custom linear wSAA solve ended with {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_custom() -> ProblemInstance {
        // two nonnegative vars, each at most 1
        ProblemInstance::CustomLinear {
            n_vars: 2,
            rows: vec![
                CanonicalRow { coeffs: vec![(0, 1.0)], sense: RowSense::Le, rhs: 1.0 },
                CanonicalRow { coeffs: vec![(1, 1.0)], sense: RowSense::Le, rhs: 1.0 },
            ],
        }
    }

    #[test]
    fn delta_vector_is_cost_difference() {
        let inst = tiny_custom();
        let scen = ScenarioSet::new(vec![vec![5.0, 2.0], vec![1.0, 1.0], vec![0.0, 4.0]]).unwrap();
        let z_alt = Decision(vec![1.0, 0.0]);
        let z_star = Decision(vec![0.0, 1.0]);
        let d = DeltaVector::compute(&inst, &scen, &z_alt, &z_star).unwrap();
        assert_eq!(d.as_slice(), &[3.0, 0.0, -4.0]);
    }

    #[test]
    fn delta_of_identical_decisions_is_zero() {
        let inst = tiny_custom();
        let scen = ScenarioSet::new(vec![vec![5.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let z = Decision(vec![0.5, 0.5]);
        let d = DeltaVector::compute(&inst, &scen, &z, &z).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn existence_screen_cases() {
        let all_pos = DeltaVector::from_raw(vec![1.0, 1.0]);
        assert_eq!(no_explanation_check(&all_pos), ExplanationExistence::CannotExist);
        let mixed = DeltaVector::from_raw(vec![-0.1, 5.0, 5.0]);
        assert_eq!(no_explanation_check(&mixed), ExplanationExistence::MayExist);
        let zeros = DeltaVector::from_raw(vec![0.0, 0.0]);
        assert_eq!(no_explanation_check(&zeros), ExplanationExistence::EverywhereTied);
        let mixed_zero = DeltaVector::from_raw(vec![0.0, 2.0]);
        assert_eq!(no_explanation_check(&mixed_zero), ExplanationExistence::CannotExist);
    }

    #[test]
    fn prop2_coherence_no_weights_make_alt_better() {
        use rand::prelude::*;
        // dominated alternative: random weight vectors never satisfy the
        // relative criterion strictly, for expected cost and CVaR alike
        let deltas = [0.5, 0.0, 2.0, 1.0];
        let alt_losses = [1.5, 1.0, 3.0, 2.0];
        let star_losses: Vec<f64> =
            alt_losses.iter().zip(&deltas).map(|(a, d)| a - d).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let expected_gap: f64 = deltas.iter().zip(&w).map(|(d, wi)| d * wi).sum();
            assert!(expected_gap >= -1e-12);
            let alpha = rng.gen_range(0.0..0.9);
            let cv_alt = cvar_evaluate(&alt_losses, &w, alpha).unwrap();
            let cv_star = cvar_evaluate(&star_losses, &w, alpha).unwrap();
            assert!(cv_alt >= cv_star - 1e-12);
        }
    }
}
