//! Solver-agnostic mixed-integer linear modeling layer.
//!
//! All solver interaction in the crate goes through [`Model`]. The layer
//! supports exactly what the rest of the crate needs: named variables,
//! linear constraints, a linear minimization objective, deterministic
//! parameters, incumbent filtering (emulated lazy constraints) and the
//! l1 linearization helper. The backend is the bundled HiGHS solver; it
//! has no native lazy-constraint callbacks, so
//! [`Model::solve_with_incumbent_filter`] emulates them with a
//! solve / filter / cut / re-solve loop with identical accept-reject
//! semantics.
//!
//! The layer never invents big-M constants: callers must derive them from
//! domain knowledge (feature ranges, weight bounds).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};
use std::time::Instant;

use crate::{Error, Result};

/// Handle to a variable of one [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

/// Kind of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

/// Comparison sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Linear expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        LinExpr { terms: vec![(var, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        self.terms.push((var, coef));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// Sums duplicate variable entries; used before handing to the backend.
    fn compacted(&self) -> Vec<(usize, f64)> {
        let mut map = std::collections::BTreeMap::new();
        for (v, c) in &self.terms {
            *map.entry(v.0).or_insert(0.0) += c;
        }
        map.into_iter().filter(|(_, c)| *c != 0.0).collect()
    }

    /// Evaluates the expression under an assignment.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms.into_iter().map(|(v, c)| (v, -c)));
        self.constant -= rhs.constant;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        for (_, c) in &mut self.terms {
            *c *= k;
        }
        self.constant *= k;
        self
    }
}

/// Deterministic solver parameters.
#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Wall-clock limit per [`Model::solve`] call, in seconds.
    pub time_limit: f64,
    /// Relative MIP gap at which a solution is declared optimal.
    pub rel_gap: f64,
    /// Primal feasibility tolerance.
    pub feas_tol: f64,
    /// Integrality tolerance.
    pub int_tol: f64,
    pub seed: i32,
    pub threads: i32,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            time_limit: 600.0,
            rel_gap: 1e-6,
            feas_tol: 1e-7,
            int_tol: 1e-6,
            seed: 0,
            threads: 1,
        }
    }
}

/// Final state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal within the gap tolerance.
    Optimal,
    /// Time limit hit with a feasible incumbent available.
    FeasibleTimeLimit,
    /// Time limit hit with no feasible incumbent.
    TimeLimitNoIncumbent,
    Infeasible,
    Unbounded,
    /// Backend failure; see the outcome message.
    Error,
}

/// Statistics attached to a solve.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub wall_time: f64,
    /// Branch-and-bound nodes, when the backend reports them.
    pub nodes: Option<u64>,
    /// Cut rounds performed by the incumbent-filter loop.
    pub filter_rounds: usize,
}

/// Result of a solve; values are present iff the status carries a solution.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    values: Option<Vec<f64>>,
    pub stats: SolveStats,
    pub message: Option<String>,
}

impl SolveOutcome {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit)
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values.as_ref().expect("no solution available")[var.0]
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn eval(&self, expr: &LinExpr) -> f64 {
        expr.eval(self.values.as_ref().expect("no solution available"))
    }
}

/// Decision returned by an incumbent filter.
pub enum FilterDecision {
    Accept,
    /// Reject the candidate and exclude it with these cuts.
    Reject(Vec<Cut>),
}

/// A linear cut added by an incumbent filter.
pub struct Cut {
    pub name: String,
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
struct Variable {
    name: String,
    kind: VarKind,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone)]
struct Constraint {
    name: String,
    expr: LinExpr,
    sense: Sense,
    rhs: f64,
}

/// A mixed-integer linear minimization model.
#[derive(Debug, Clone)]
pub struct Model {
    vars: Vec<Variable>,
    names: HashSet<String>,
    cons: Vec<Constraint>,
    objective: Option<LinExpr>,
    pub params: SolverParams,
}

impl Model {
    pub fn new(params: SolverParams) -> Self {
        Model {
            vars: Vec::new(),
            names: HashSet::new(),
            cons: Vec::new(),
            objective: None,
            params,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarId> {
        let name = name.into();
        if !self.names.insert(name.clone()) {
            return Err(Error::Model(format!("duplicate variable name '{name}'")));
        }
        if lower > upper {
            return Err(Error::Model(format!(
                "variable '{name}': lower bound {lower} exceeds upper bound {upper}"
            )));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.vars.push(Variable { name, kind, lower, upper });
        Ok(VarId(self.vars.len() - 1))
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: i64, upper: i64) -> Result<VarId> {
        self.add_var(name, VarKind::Integer, lower as f64, upper as f64)
    }

    pub fn var_bounds(&self, var: VarId) -> (f64, f64) {
        (self.vars[var.0].lower, self.vars[var.0].upper)
    }

    pub fn var_kind(&self, var: VarId) -> VarKind {
        self.vars[var.0].kind
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.vars[var.0].name
    }

    /// Tightens or relaxes the bounds of an existing variable. Used to fix
    /// context variables when checking encodings at a known point.
    pub fn set_var_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.vars[var.0].lower = lower;
        self.vars[var.0].upper = upper;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<()> {
        let name = name.into();
        if !self.names.insert(name.clone()) {
            return Err(Error::Model(format!("duplicate constraint name '{name}'")));
        }
        for (v, _) in &expr.terms {
            if v.0 >= self.vars.len() {
                return Err(Error::Model(format!(
                    "constraint '{name}' references unregistered variable #{}",
                    v.0
                )));
            }
        }
        // fold the expression constant into the rhs
        let rhs = rhs - expr.constant;
        let expr = LinExpr { terms: expr.terms, constant: 0.0 };
        self.cons.push(Constraint { name, expr, sense, rhs });
        Ok(())
    }

    /// Sets the (minimization) objective.
    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = Some(expr);
    }

    /// Introduces `p, q >= 0` with `x - center = p - q` and returns the
    /// expression `(p + q) / range`, which equals `|x - center| / range`
    /// at any optimum that minimizes a positive combination of such
    /// expressions. `tag` must make the auxiliary names unique.
    pub fn add_abs_linearization(
        &mut self,
        tag: &str,
        x: VarId,
        center: f64,
        range: f64,
    ) -> Result<AbsLinearization> {
        if !(range > 0.0) {
            return Err(Error::Model(format!("abs linearization '{tag}': range must be > 0")));
        }
        let (lo, hi) = self.var_bounds(x);
        let pos_cap = if hi.is_finite() { (hi - center).max(0.0) } else { f64::INFINITY };
        let neg_cap = if lo.is_finite() { (center - lo).max(0.0) } else { f64::INFINITY };
        let pos = self.add_continuous(format!("{tag}.pos"), 0.0, pos_cap)?;
        let neg = self.add_continuous(format!("{tag}.neg"), 0.0, neg_cap)?;
        // x - center = pos - neg
        let mut expr = LinExpr::term(x, 1.0);
        expr.add_term(pos, -1.0).add_term(neg, 1.0);
        self.add_constraint(format!("{tag}.def"), expr, Sense::Eq, center)?;
        let mut value = LinExpr::new();
        value.add_term(pos, 1.0 / range).add_term(neg, 1.0 / range);
        Ok(AbsLinearization { value, pos, neg })
    }

    /// Solves the model. An objective must be set.
    pub fn solve(&self) -> Result<SolveOutcome> {
        let objective = self
            .objective
            .as_ref()
            .ok_or_else(|| Error::Model("solve called without an objective".into()))?;
        let start = Instant::now();
        let outcome = self.solve_backend(objective, self.params.time_limit)?;
        let mut outcome = outcome;
        outcome.stats.wall_time = start.elapsed().as_secs_f64();
        Ok(outcome)
    }

    /// Solves with an incumbent filter: every integer-feasible candidate is
    /// passed to `filter` before being accepted; rejected candidates must be
    /// excluded by the cuts the filter returns. The backend has no native
    /// lazy constraints, so this loops solve -> filter -> append cuts ->
    /// re-solve with identical accept/reject semantics.
    pub fn solve_with_incumbent_filter<F>(&mut self, mut filter: F) -> Result<SolveOutcome>
    where
        F: FnMut(&SolveOutcome) -> Result<FilterDecision>,
    {
        if !self
            .vars
            .iter()
            .any(|v| matches!(v.kind, VarKind::Integer | VarKind::Binary))
        {
            return Err(Error::Model(
                "incumbent filtering requires at least one integer or binary variable".into(),
            ));
        }
        let start = Instant::now();
        let deadline = self.params.time_limit;
        let mut rounds = 0usize;
        loop {
            let remaining = deadline - start.elapsed().as_secs_f64();
            if remaining <= 0.0 {
                return Ok(SolveOutcome {
                    status: SolveStatus::TimeLimitNoIncumbent,
                    objective: None,
                    values: None,
                    stats: SolveStats {
                        wall_time: start.elapsed().as_secs_f64(),
                        nodes: None,
                        filter_rounds: rounds,
                    },
                    message: Some("time limit exhausted during incumbent filtering".into()),
                });
            }
            let objective = self
                .objective
                .as_ref()
                .ok_or_else(|| Error::Model("solve called without an objective".into()))?;
            let mut outcome = self.solve_backend(objective, remaining)?;
            outcome.stats.wall_time = start.elapsed().as_secs_f64();
            outcome.stats.filter_rounds = rounds;
            if !outcome.has_solution() {
                return Ok(outcome);
            }
            match filter(&outcome)? {
                FilterDecision::Accept => return Ok(outcome),
                FilterDecision::Reject(cuts) => {
                    rounds += 1;
                    if cuts.is_empty() {
                        return Err(Error::Model(
                            "incumbent filter rejected a candidate without any cut".into(),
                        ));
                    }
                    let values = outcome.values().unwrap();
                    let excluded = cuts.iter().any(|c| {
                        let lhs = c.expr.eval(values);
                        match c.sense {
                            Sense::Le => lhs > c.rhs + 1e-9,
                            Sense::Ge => lhs < c.rhs - 1e-9,
                            Sense::Eq => (lhs - c.rhs).abs() > 1e-9,
                        }
                    });
                    if !excluded {
                        // Not fatal per the layer contract, but the loop
                        // would revisit the same candidate forever.
                        eprintln!(
                            "warning: incumbent filter cut round {rounds} does not exclude the rejected candidate"
                        );
                    }
                    for cut in cuts {
                        self.add_constraint(cut.name, cut.expr, cut.sense, cut.rhs)?;
                    }
                }
            }
        }
    }

    fn solve_backend(&self, objective: &LinExpr, time_limit: f64) -> Result<SolveOutcome> {
        use highs::{HighsModelStatus, RowProblem, Sense as HSense};

        let mut obj_coefs = vec![0.0; self.vars.len()];
        for (v, c) in objective.compacted() {
            if v >= self.vars.len() {
                return Err(Error::Model("objective references unregistered variable".into()));
            }
            obj_coefs[v] = c;
        }

        let mut pb = RowProblem::default();
        let mut cols = Vec::with_capacity(self.vars.len());
        for (j, var) in self.vars.iter().enumerate() {
            let col = match var.kind {
                VarKind::Continuous => pb.add_column(obj_coefs[j], var.lower..=var.upper),
                VarKind::Integer | VarKind::Binary => {
                    pb.add_integer_column(obj_coefs[j], var.lower..=var.upper)
                }
            };
            cols.push(col);
        }
        for con in &self.cons {
            let factors: Vec<_> = con
                .expr
                .compacted()
                .into_iter()
                .map(|(v, c)| (cols[v], c))
                .collect();
            match con.sense {
                Sense::Le => pb.add_row(..=con.rhs, factors),
                Sense::Ge => pb.add_row(con.rhs.., factors),
                Sense::Eq => pb.add_row(con.rhs..=con.rhs, factors),
            };
        }

        let mut model = pb.optimise(HSense::Minimise);
        model.make_quiet();
        model.set_option("time_limit", time_limit.max(0.01));
        model.set_option("mip_rel_gap", self.params.rel_gap);
        model.set_option("primal_feasibility_tolerance", self.params.feas_tol);
        model.set_option("mip_feasibility_tolerance", self.params.int_tol);
        model.set_option("threads", self.params.threads);
        model.set_option("random_seed", self.params.seed);

        let solved = model.solve();
        let status = solved.status();
        let outcome = match status {
            HighsModelStatus::Optimal => {
                let solution = solved.get_solution();
                SolveOutcome {
                    status: SolveStatus::Optimal,
                    objective: Some(solved.objective_value() + objective.constant),
                    values: Some(solution.columns().to_vec()),
                    stats: SolveStats::default(),
                    message: None,
                }
            }
            HighsModelStatus::ReachedTimeLimit | HighsModelStatus::ReachedIterationLimit => {
                let solution = solved.get_solution();
                let values = solution.columns().to_vec();
                if values.len() == self.vars.len() && self.is_feasible(&values) {
                    SolveOutcome {
                        status: SolveStatus::FeasibleTimeLimit,
                        objective: Some(solved.objective_value() + objective.constant),
                        values: Some(values),
                        stats: SolveStats::default(),
                        message: Some("time limit reached; incumbent returned".into()),
                    }
                } else {
                    SolveOutcome {
                        status: SolveStatus::TimeLimitNoIncumbent,
                        objective: None,
                        values: None,
                        stats: SolveStats::default(),
                        message: Some("time limit reached without a feasible incumbent".into()),
                    }
                }
            }
            HighsModelStatus::Infeasible => SolveOutcome {
                status: SolveStatus::Infeasible,
                objective: None,
                values: None,
                stats: SolveStats::default(),
                message: None,
            },
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => SolveOutcome {
                status: SolveStatus::Unbounded,
                objective: None,
                values: None,
                stats: SolveStats::default(),
                message: None,
            },
            other => SolveOutcome {
                status: SolveStatus::Error,
                objective: None,
                values: None,
                stats: SolveStats::default(),
                message: Some(format!("backend status {other:?}")),
            },
        };
        Ok(outcome)
    }

    /// Checks primal feasibility of an assignment against bounds,
    /// integrality and all constraints, at a loose tolerance. Used to
    /// decide whether a time-limited solve produced a usable incumbent.
    fn is_feasible(&self, values: &[f64]) -> bool {
        let tol = (self.params.feas_tol * 100.0).max(1e-5);
        for (var, &v) in self.vars.iter().zip(values) {
            if v < var.lower - tol || v > var.upper + tol {
                return false;
            }
            if !matches!(var.kind, VarKind::Continuous) && (v - v.round()).abs() > self.params.int_tol * 10.0
            {
                return false;
            }
        }
        self.cons.iter().all(|c| {
            let lhs = c.expr.eval(values);
            let scale = 1.0 + lhs.abs().max(c.rhs.abs());
            match c.sense {
                Sense::Le => lhs <= c.rhs + tol * scale,
                Sense::Ge => lhs >= c.rhs - tol * scale,
                Sense::Eq => (lhs - c.rhs).abs() <= tol * scale,
            }
        })
    }

    /// Writes the model in CPLEX LP text format, for debugging.
    pub fn write_lp(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        if let Some(obj) = &self.objective {
            for (v, c) in obj.compacted() {
                let _ = write!(out, " {:+} {}", c, self.vars[v].name);
            }
        }
        out.push_str("\nSubject To\n");
        for con in &self.cons {
            let _ = write!(out, " {}:", con.name);
            for (v, c) in con.expr.compacted() {
                let _ = write!(out, " {:+} {}", c, self.vars[v].name);
            }
            let op = match con.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {} {}", op, con.rhs);
        }
        out.push_str("Bounds\n");
        for var in &self.vars {
            let _ = writeln!(out, " {} <= {} <= {}", var.lower, var.name, var.upper);
        }
        let generals: Vec<_> = self
            .vars
            .iter()
            .filter(|v| !matches!(v.kind, VarKind::Continuous))
            .map(|v| v.name.as_str())
            .collect();
        if !generals.is_empty() {
            out.push_str("Generals\n ");
            out.push_str(&generals.join(" "));
            out.push('\n');
        }
        out.push_str("End\n");
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Handle returned by [`Model::add_abs_linearization`].
pub struct AbsLinearization {
    /// Expression equal to `|x - center| / range` at a minimizing optimum.
    pub value: LinExpr,
    pub pos: VarId,
    pub neg: VarId,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SolverParams {
        SolverParams::default()
    }

    #[test]
    fn bound_attaining_lp() {
        let mut m = Model::new(params());
        let x = m.add_continuous("x", 3.0, 10.0).unwrap();
        m.set_objective(LinExpr::term(x, 1.0));
        let out = m.solve().unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.value(x) - 3.0).abs() < 1e-9);
        assert!((out.objective.unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut m = Model::new(params());
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.add_constraint("ge1", LinExpr::term(x, 1.0), Sense::Ge, 1.0).unwrap();
        m.add_constraint("le0", LinExpr::term(x, 1.0), Sense::Le, 0.0).unwrap();
        m.set_objective(LinExpr::constant(0.0));
        let out = m.solve().unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(out.values().is_none());
    }

    #[test]
    fn free_variable_unbounded() {
        let mut m = Model::new(params());
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.set_objective(LinExpr::term(x, -1.0));
        let out = m.solve().unwrap();
        assert_eq!(out.status, SolveStatus::Unbounded);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = Model::new(params());
        m.add_continuous("x", 0.0, 1.0).unwrap();
        assert!(m.add_continuous("x", 0.0, 1.0).is_err());
    }

    #[test]
    fn noop_filter_matches_plain_solve() {
        let build = || {
            let mut m = Model::new(params());
            let x = m.add_binary("x").unwrap();
            let y = m.add_binary("y").unwrap();
            m.add_constraint(
                "cover",
                LinExpr::term(x, 1.0) + LinExpr::term(y, 1.0),
                Sense::Ge,
                1.0,
            )
            .unwrap();
            let mut obj = LinExpr::term(x, 1.0);
            obj.add_term(y, 2.0);
            m.set_objective(obj);
            m
        };
        let plain = build().solve().unwrap();
        let filtered = build()
            .solve_with_incumbent_filter(|_| Ok(FilterDecision::Accept))
            .unwrap();
        assert_eq!(plain.status, SolveStatus::Optimal);
        assert_eq!(filtered.status, SolveStatus::Optimal);
        assert!((plain.objective.unwrap() - filtered.objective.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn filter_cut_forces_new_optimum() {
        // min x1 + x2 over binaries; reject the all-zeros point.
        let mut m = Model::new(params());
        let x1 = m.add_binary("x1").unwrap();
        let x2 = m.add_binary("x2").unwrap();
        m.set_objective(LinExpr::term(x1, 1.0) + LinExpr::term(x2, 1.0));
        let out = m
            .solve_with_incumbent_filter(|cand| {
                if cand.value(x1) + cand.value(x2) < 0.5 {
                    let mut expr = LinExpr::term(x1, 1.0);
                    expr.add_term(x2, 1.0);
                    Ok(FilterDecision::Reject(vec![Cut {
                        name: "at_least_one".into(),
                        expr,
                        sense: Sense::Ge,
                        rhs: 1.0,
                    }]))
                } else {
                    Ok(FilterDecision::Accept)
                }
            })
            .unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(out.stats.filter_rounds, 1);
    }

    #[test]
    fn filter_rejecting_everything_exhausts_to_infeasible() {
        let mut m = Model::new(params());
        let xs: Vec<_> = (0..3).map(|i| m.add_binary(format!("x{i}")).unwrap()).collect();
        let mut obj = LinExpr::new();
        for &x in &xs {
            obj.add_term(x, 1.0);
        }
        m.set_objective(obj);
        let mut round = 0usize;
        let out = m
            .solve_with_incumbent_filter(|cand| {
                // no-good cut on the candidate's binary assignment
                let mut expr = LinExpr::new();
                let mut rhs = 1.0;
                for &x in &xs {
                    if cand.value(x) > 0.5 {
                        expr.add_term(x, -1.0);
                        rhs -= 1.0;
                    } else {
                        expr.add_term(x, 1.0);
                    }
                }
                round += 1;
                Ok(FilterDecision::Reject(vec![Cut {
                    name: format!("nogood{round}"),
                    expr,
                    sense: Sense::Ge,
                    rhs,
                }]))
            })
            .unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert_eq!(out.stats.filter_rounds, 8); // all 2^3 candidates cut
    }

    #[test]
    fn abs_linearization_minimized_matches_closed_form() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let center: f64 = rng.gen_range(-5.0..5.0);
            let range: f64 = rng.gen_range(0.1..4.0);
            let fixed: f64 = rng.gen_range(-5.0..5.0);
            let mut m = Model::new(params());
            let x = m.add_continuous("x", -5.0, 5.0).unwrap();
            let abs = m.add_abs_linearization("d", x, center, range).unwrap();
            m.set_var_bounds(x, fixed, fixed);
            m.set_objective(abs.value.clone());
            let out = m.solve().unwrap();
            assert_eq!(out.status, SolveStatus::Optimal, "trial {trial}");
            let expect = (fixed - center).abs() / range;
            assert!(
                (out.objective.unwrap() - expect).abs() < 1e-7,
                "trial {trial}: got {} want {}",
                out.objective.unwrap(),
                expect
            );
            // complementarity at the optimum
            assert!(out.value(abs.pos) * out.value(abs.neg) < 1e-9);
        }
    }

    #[test]
    fn abs_linearization_endpoints() {
        let mut m = Model::new(params());
        let x = m.add_continuous("x", 0.0, 2.0).unwrap();
        let abs = m.add_abs_linearization("d", x, 1.0, 1.0).unwrap();
        m.set_var_bounds(x, 1.0, 1.0);
        m.set_objective(abs.value.clone());
        assert!((m.solve().unwrap().objective.unwrap() - 0.0).abs() < 1e-9);
        m.set_var_bounds(x, 2.0, 2.0);
        assert!((m.solve().unwrap().objective.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_repeat_solves() {
        let build = || {
            let mut m = Model::new(params());
            let xs: Vec<_> = (0..6).map(|i| m.add_binary(format!("b{i}")).unwrap()).collect();
            let mut obj = LinExpr::new();
            let mut cover = LinExpr::new();
            for (i, &x) in xs.iter().enumerate() {
                obj.add_term(x, 1.0 + 0.1 * i as f64);
                cover.add_term(x, 1.0);
            }
            m.add_constraint("cover", cover, Sense::Ge, 3.0).unwrap();
            m.set_objective(obj);
            m
        };
        let a = build().solve().unwrap();
        let b = build().solve().unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(a.status, b.status);
        assert!((a.objective.unwrap() - b.objective.unwrap()).abs() < 1e-9);
    }
}
