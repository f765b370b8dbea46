//! Shortest path over a directed graph with uncertain arc costs, with
//! expected-cost and CVaR objectives.

use serde::{Deserialize, Serialize};

use crate::milp::{LinExpr, Model, Sense, SolveStatus, SolverParams};
use crate::predictors::WeightVector;
use crate::problems::{cvar_evaluate, CanonicalRow, Decision, LinearCanonicalForm, ScenarioSet};
use crate::{Error, Result};

/// A directed graph with an explicit arc list; arc `j` is the `j`-th
/// scenario coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectedGraph {
    pub n_nodes: usize,
    pub arcs: Vec<(usize, usize)>,
}

impl DirectedGraph {
    /// Square grid of the given width: nodes in row-major order, arcs
    /// pointing right and down, enumerated per node (right first).
    pub fn grid(width: usize) -> Result<Self> {
        if width < 2 {
            return Err(Error::invalid("grid width must be at least 2"));
        }
        let id = |r: usize, c: usize| r * width + c;
        let mut arcs = Vec::with_capacity(2 * (width - 1) * width);
        for r in 0..width {
            for c in 0..width {
                if c + 1 < width {
                    arcs.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < width {
                    arcs.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Ok(DirectedGraph { n_nodes: width * width, arcs })
    }

    pub fn n_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn out_arcs(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.arcs
            .iter()
            .enumerate()
            .filter(move |(_, &(u, _))| u == node)
            .map(|(j, _)| j)
    }

    pub fn in_arcs(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.arcs
            .iter()
            .enumerate()
            .filter(move |(_, &(_, v))| v == node)
            .map(|(j, _)| j)
    }

    /// Whether `sink` is reachable from `source`.
    fn connects(&self, source: usize, sink: usize) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![source];
        seen[source] = true;
        while let Some(u) = stack.pop() {
            if u == sink {
                return true;
            }
            for j in self.out_arcs(u) {
                let v = self.arcs[j].1;
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }
}

/// A source-sink shortest-path instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathProblem {
    pub graph: DirectedGraph,
    pub source: usize,
    pub sink: usize,
}

impl PathProblem {
    pub fn new(graph: DirectedGraph, source: usize, sink: usize) -> Result<Self> {
        if source >= graph.n_nodes || sink >= graph.n_nodes || source == sink {
            return Err(Error::invalid("invalid source/sink nodes"));
        }
        if !graph.connects(source, sink) {
            return Err(Error::invalid("graph has no source-to-sink path"));
        }
        Ok(PathProblem { graph, source, sink })
    }

    /// Grid instance from the top-left to the bottom-right corner.
    pub fn grid(width: usize) -> Result<Self> {
        let graph = DirectedGraph::grid(width)?;
        let sink = graph.n_nodes - 1;
        PathProblem::new(graph, 0, sink)
    }

    pub fn cost(&self, z: &[f64], y: &[f64]) -> f64 {
        z.iter().zip(y).map(|(zj, yj)| zj * yj).sum()
    }

    /// A feasible decision is a binary arc vector satisfying unit flow
    /// balance from source to sink.
    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        if z.len() != self.graph.n_arcs() {
            return false;
        }
        if z.iter().any(|&v| (v - v.round()).abs() > tol || v < -tol || v > 1.0 + tol) {
            return false;
        }
        for v in 0..self.graph.n_nodes {
            let balance: f64 = self.graph.out_arcs(v).map(|j| z[j]).sum::<f64>()
                - self.graph.in_arcs(v).map(|j| z[j]).sum::<f64>();
            let want = if v == self.source {
                1.0
            } else if v == self.sink {
                -1.0
            } else {
                0.0
            };
            if (balance - want).abs() > tol * 4.0 {
                return false;
            }
        }
        true
    }

    /// Ordered node sequence of a path decision (for serialization).
    pub fn path_nodes(&self, z: &[f64]) -> Vec<usize> {
        let mut nodes = vec![self.source];
        let mut current = self.source;
        let mut guard = 0;
        while current != self.sink && guard <= self.graph.n_arcs() {
            guard += 1;
            match self.graph.out_arcs(current).find(|&j| z[j] > 0.5) {
                Some(j) => {
                    current = self.graph.arcs[j].1;
                    nodes.push(current);
                }
                None => break,
            }
        }
        nodes
    }

    fn flow_balance_constraints(&self, model: &mut Model, z: &[crate::milp::VarId]) -> Result<()> {
        for v in 0..self.graph.n_nodes {
            let mut expr = LinExpr::new();
            for j in self.graph.out_arcs(v) {
                expr.add_term(z[j], 1.0);
            }
            for j in self.graph.in_arcs(v) {
                expr.add_term(z[j], -1.0);
            }
            let rhs = if v == self.source {
                1.0
            } else if v == self.sink {
                -1.0
            } else {
                0.0
            };
            model.add_constraint(format!("flow{v}"), expr, Sense::Eq, rhs)?;
        }
        Ok(())
    }

    /// Binary arc MIP minimizing the weighted mean cost.
    pub fn solve_wsaa_expected(
        &self,
        scenarios: &ScenarioSet,
        weights: &WeightVector,
        params: &SolverParams,
    ) -> Result<(Decision, f64)> {
        let mut model = Model::new(params.clone());
        let z: Vec<_> = (0..self.graph.n_arcs())
            .map(|j| model.add_binary(format!("z{j}")))
            .collect::<Result<Vec<_>>>()?;
        self.flow_balance_constraints(&mut model, &z)?;
        let mut obj = LinExpr::new();
        for (i, &w) in weights.as_slice().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, &y) in scenarios.scenario(i).iter().enumerate() {
                obj.add_term(z[j], w * y);
            }
        }
        model.set_objective(obj);
        let out = model.solve()?;
        match out.status {
            SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit => {
                let decision = Decision(z.iter().map(|&v| out.value(v).round()).collect());
                Ok((decision, out.objective.unwrap()))
            }
            s => Err(Error::Solver(format!("shortest-path wSAA ended with {s:?}"))),
        }
    }

    /// CVaR objective via the convex tail reformulation: minimize
    /// `eta + (1/(1-alpha)) sum_i w_i s_i` with `s_i >= z.y_i - eta`.
    pub fn solve_wsaa_cvar(
        &self,
        scenarios: &ScenarioSet,
        weights: &WeightVector,
        alpha: f64,
        params: &SolverParams,
    ) -> Result<(Decision, f64)> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must be in [0, 1), got {alpha}")));
        }
        let mut model = Model::new(params.clone());
        let z: Vec<_> = (0..self.graph.n_arcs())
            .map(|j| model.add_binary(format!("z{j}")))
            .collect::<Result<Vec<_>>>()?;
        self.flow_balance_constraints(&mut model, &z)?;
        let eta = model.add_continuous("eta", f64::NEG_INFINITY, f64::INFINITY)?;
        let mut obj = LinExpr::term(eta, 1.0);
        for (i, &w) in weights.as_slice().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let s = model.add_continuous(format!("s{i}"), 0.0, f64::INFINITY)?;
            // s_i >= z . y_i - eta
            let mut expr = LinExpr::term(s, -1.0);
            expr.add_term(eta, -1.0);
            for (j, &y) in scenarios.scenario(i).iter().enumerate() {
                expr.add_term(z[j], y);
            }
            model.add_constraint(format!("tail{i}"), expr, Sense::Le, 0.0)?;
            obj.add_term(s, w / (1.0 - alpha));
        }
        model.set_objective(obj);
        let out = model.solve()?;
        match out.status {
            SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit => {
                let decision = Decision(z.iter().map(|&v| out.value(v).round()).collect());
                Ok((decision, out.objective.unwrap()))
            }
            s => Err(Error::Solver(format!("CVaR shortest-path wSAA ended with {s:?}"))),
        }
    }

    /// LP-relaxation polytope (integral by network structure): flow
    /// balance equalities over nonnegative arc variables, `d_i = y_i`.
    pub fn canonical_form(&self, scenarios: &ScenarioSet) -> LinearCanonicalForm {
        let mut rows = Vec::with_capacity(self.graph.n_nodes);
        for v in 0..self.graph.n_nodes {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for j in self.graph.out_arcs(v) {
                coeffs.push((j, 1.0));
            }
            for j in self.graph.in_arcs(v) {
                coeffs.push((j, -1.0));
            }
            let rhs = if v == self.source {
                1.0
            } else if v == self.sink {
                -1.0
            } else {
                0.0
            };
            rows.push(CanonicalRow::eq(coeffs, rhs));
        }
        let scenario_objectives = scenarios
            .iter()
            .map(|y| y.iter().enumerate().map(|(j, &c)| (j, c)).collect())
            .collect();
        LinearCanonicalForm { n_vars: self.graph.n_arcs(), rows, scenario_objectives }
    }

    /// Weighted CVaR of a decision's scenario costs.
    pub fn cvar_of(
        &self,
        scenarios: &ScenarioSet,
        weights: &WeightVector,
        alpha: f64,
        z: &[f64],
    ) -> Result<f64> {
        let losses: Vec<f64> = scenarios.iter().map(|y| self.cost(z, y)).collect();
        cvar_evaluate(&losses, weights.as_slice(), alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dijkstra over nonnegative arc costs; test oracle only.
    fn dijkstra(graph: &DirectedGraph, source: usize, sink: usize, costs: &[f64]) -> f64 {
        let mut dist = vec![f64::INFINITY; graph.n_nodes];
        let mut done = vec![false; graph.n_nodes];
        dist[source] = 0.0;
        loop {
            let mut u = None;
            let mut best = f64::INFINITY;
            for v in 0..graph.n_nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = Some(v);
                }
            }
            let Some(u) = u else { break };
            if u == sink {
                return dist[u];
            }
            done[u] = true;
            for j in graph.out_arcs(u) {
                let v = graph.arcs[j].1;
                if dist[u] + costs[j] < dist[v] {
                    dist[v] = dist[u] + costs[j];
                }
            }
        }
        dist[sink]
    }

    #[test]
    fn grid_dimensions() {
        let g4 = DirectedGraph::grid(4).unwrap();
        assert_eq!(g4.n_arcs(), 24);
        let g8 = DirectedGraph::grid(8).unwrap();
        assert_eq!(g8.n_arcs(), 112);
    }

    #[test]
    fn unit_costs_give_path_length_six_on_4x4() {
        let p = PathProblem::grid(4).unwrap();
        let scen = ScenarioSet::new(vec![vec![1.0; 24]]).unwrap();
        let w = WeightVector::uniform(1);
        let (z, obj) = p.solve_wsaa_expected(&scen, &w, &SolverParams::default()).unwrap();
        assert!(p.is_feasible(z.values(), 1e-6));
        assert!((obj - 6.0).abs() < 1e-6);
        assert_eq!(p.path_nodes(z.values()).len(), 7);
    }

    #[test]
    fn identical_scenarios_match_dijkstra() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let p = PathProblem::grid(5).unwrap();
            let costs: Vec<f64> = (0..p.graph.n_arcs()).map(|_| rng.gen_range(0.1..2.0)).collect();
            let scen = ScenarioSet::new(vec![costs.clone(); 3]).unwrap();
            let w = WeightVector::uniform(3);
            let (z, obj) = p.solve_wsaa_expected(&scen, &w, &SolverParams::default()).unwrap();
            let oracle = dijkstra(&p.graph, p.source, p.sink, &costs);
            assert!((obj - oracle).abs() < 1e-6, "mip {obj} vs dijkstra {oracle}");
            assert!(p.is_feasible(z.values(), 1e-6));
        }
    }

    #[test]
    fn cvar_alpha_zero_matches_expected_solution_value() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let p = PathProblem::grid(3).unwrap();
        let scen = ScenarioSet::new(
            (0..6)
                .map(|_| (0..p.graph.n_arcs()).map(|_| rng.gen_range(0.1..2.0)).collect())
                .collect(),
        )
        .unwrap();
        let w = WeightVector::uniform(6);
        let (_, exp_obj) = p.solve_wsaa_expected(&scen, &w, &SolverParams::default()).unwrap();
        let (_, cvar_obj) = p.solve_wsaa_cvar(&scen, &w, 0.0, &SolverParams::default()).unwrap();
        assert!((exp_obj - cvar_obj).abs() < 1e-6);
    }

    #[test]
    fn cvar_solution_optimal_under_cvar_evaluator() {
        use rand::prelude::*;
        // the RU-form MIP objective must agree with the sort-based CVaR of
        // its own solution, and beat a handful of other feasible paths
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let p = PathProblem::grid(3).unwrap();
        let alpha = 0.7;
        let scen = ScenarioSet::new(
            (0..10)
                .map(|_| (0..p.graph.n_arcs()).map(|_| rng.gen_range(0.1..2.0)).collect())
                .collect(),
        )
        .unwrap();
        let raw: Vec<f64> = (0..10).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let w = WeightVector::new(raw.iter().map(|v| v / s).collect()).unwrap();
        let (z, obj) = p.solve_wsaa_cvar(&scen, &w, alpha, &SolverParams::default()).unwrap();
        let eval = p.cvar_of(&scen, &w, alpha, z.values()).unwrap();
        assert!((obj - eval).abs() < 1e-6, "RU objective {obj} vs CVaR {eval}");
        // RU value of any decision upper-bounds its CVaR; optimality means
        // no other path has smaller CVaR
        for _ in 0..5 {
            let costs: Vec<f64> = (0..p.graph.n_arcs()).map(|_| rng.gen_range(0.1..2.0)).collect();
            let alt_scen = ScenarioSet::new(vec![costs]).unwrap();
            let (alt, _) = p
                .solve_wsaa_expected(&alt_scen, &WeightVector::uniform(1), &SolverParams::default())
                .unwrap();
            let alt_eval = p.cvar_of(&scen, &w, alpha, alt.values()).unwrap();
            assert!(alt_eval >= eval - 1e-7);
        }
    }

    #[test]
    fn canonical_form_objective_equality() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let p = PathProblem::grid(4).unwrap();
        let scen = ScenarioSet::new(
            (0..5)
                .map(|_| (0..24).map(|_| rng.gen_range(0.1..2.0)).collect())
                .collect(),
        )
        .unwrap();
        let form = p.canonical_form(&scen);
        for _ in 0..100 {
            // random monotone path via greedy coin flips
            let mut z = vec![0.0; 24];
            let mut node = 0usize;
            while node != 15 {
                let outs: Vec<usize> = p.graph.out_arcs(node).collect();
                let j = outs[rng.gen_range(0..outs.len())];
                z[j] = 1.0;
                node = p.graph.arcs[j].1;
            }
            assert!(p.is_feasible(&z, 1e-9));
            assert!(form.is_feasible(&z, 1e-9));
            let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let canonical = form.weighted_cost(&w, &z);
            let native: f64 = scen.iter().zip(&w).map(|(y, wi)| wi * p.cost(&z, y)).sum();
            assert!((canonical - native).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_decisions_rejected() {
        let p = PathProblem::grid(3).unwrap();
        assert!(!p.is_feasible(&vec![0.0; 12], 1e-6)); // no flow
        assert!(!p.is_feasible(&vec![0.5; 12], 1e-6)); // fractional
        let mut z = vec![0.0; 12];
        z[0] = 1.0; // single arc, does not reach the sink
        assert!(!p.is_feasible(&z, 1e-6));
    }
}
