//! Multi-item newsvendor with a total ordering budget.
//!
//! Order quantities `z_j >= 0` with `sum_j z_j <= K` face uncertain
//! demands `y_j`; each unit of overage costs `h_j` and each unit of
//! underage costs `b_j`.

use serde::{Deserialize, Serialize};

use crate::milp::{LinExpr, Model, Sense, SolveStatus, SolverParams};
use crate::predictors::WeightVector;
use crate::problems::{CanonicalRow, Decision, LinearCanonicalForm, ScenarioSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Newsvendor {
    /// Overage (holding) cost per product, all positive.
    pub holding: Vec<f64>,
    /// Underage (backorder) cost per product, all positive.
    pub backorder: Vec<f64>,
    /// Budget on the total order quantity, positive.
    pub budget: f64,
}

impl Newsvendor {
    pub fn new(holding: Vec<f64>, backorder: Vec<f64>, budget: f64) -> Result<Self> {
        if holding.len() != backorder.len() || holding.is_empty() {
            return Err(Error::invalid("newsvendor cost vectors must be nonempty and equal length"));
        }
        if holding.iter().chain(&backorder).any(|&c| c <= 0.0) {
            return Err(Error::invalid("newsvendor costs must be positive"));
        }
        if budget <= 0.0 {
            return Err(Error::invalid("newsvendor budget must be positive"));
        }
        Ok(Newsvendor { holding, backorder, budget })
    }

    /// The benchmark configuration: `h_j = j`, `b_j = 10 h_j`, `K = 5 d_y`.
    pub fn benchmark(n_products: usize) -> Self {
        let holding: Vec<f64> = (1..=n_products).map(|j| j as f64).collect();
        let backorder: Vec<f64> = holding.iter().map(|h| 10.0 * h).collect();
        Newsvendor { holding, backorder, budget: 5.0 * n_products as f64 }
    }

    pub fn n_products(&self) -> usize {
        self.holding.len()
    }

    pub fn cost(&self, z: &[f64], y: &[f64]) -> f64 {
        z.iter()
            .zip(y)
            .zip(self.holding.iter().zip(&self.backorder))
            .map(|((&zj, &yj), (&h, &b))| h * (zj - yj).max(0.0) + b * (yj - zj).max(0.0))
            .sum()
    }

    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        z.iter().all(|&v| v >= -tol) && z.iter().sum::<f64>() <= self.budget + tol
    }

    /// Weighted-SAA linear program with per-scenario overage/underage
    /// auxiliaries for scenarios carrying positive weight.
    pub fn solve_wsaa(
        &self,
        scenarios: &ScenarioSet,
        weights: &WeightVector,
        params: &SolverParams,
    ) -> Result<(Decision, f64)> {
        let d = self.n_products();
        let mut model = Model::new(params.clone());
        let z: Vec<_> = (0..d)
            .map(|j| model.add_continuous(format!("z{j}"), 0.0, f64::INFINITY))
            .collect::<Result<Vec<_>>>()?;
        let mut budget = LinExpr::new();
        for &v in &z {
            budget.add_term(v, 1.0);
        }
        model.add_constraint("budget", budget, Sense::Le, self.budget)?;

        let mut obj = LinExpr::new();
        for (i, &w) in weights.as_slice().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let y = scenarios.scenario(i);
            for j in 0..d {
                let over = model.add_continuous(format!("over_{i}_{j}"), 0.0, f64::INFINITY)?;
                let under = model.add_continuous(format!("under_{i}_{j}"), 0.0, f64::INFINITY)?;
                // over >= z_j - y_ij ; under >= y_ij - z_j
                let mut e1 = LinExpr::term(z[j], 1.0);
                e1.add_term(over, -1.0);
                model.add_constraint(format!("ov_{i}_{j}"), e1, Sense::Le, y[j])?;
                let mut e2 = LinExpr::term(z[j], -1.0);
                e2.add_term(under, -1.0);
                model.add_constraint(format!("un_{i}_{j}"), e2, Sense::Le, -y[j])?;
                obj.add_term(over, w * self.holding[j]);
                obj.add_term(under, w * self.backorder[j]);
            }
        }
        model.set_objective(obj);
        let out = model.solve()?;
        match out.status {
            SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit => {
                let decision = Decision(z.iter().map(|&v| out.value(v).max(0.0)).collect());
                Ok((decision, out.objective.unwrap()))
            }
            s => Err(Error::Solver(format!("newsvendor wSAA ended with {s:?}"))),
        }
    }

    /// Canonical layout: `[ z | over_0, under_0 | over_1, under_1 | ... ]`,
    /// one overage and underage block per scenario.
    pub fn canonical_form(&self, scenarios: &ScenarioSet) -> LinearCanonicalForm {
        let d = self.n_products();
        let n = scenarios.len();
        let over = |i: usize, j: usize| d + i * 2 * d + j;
        let under = |i: usize, j: usize| d + i * 2 * d + d + j;
        let mut rows = Vec::with_capacity(1 + 2 * n * d);
        rows.push(CanonicalRow::le((0..d).map(|j| (j, 1.0)).collect(), self.budget));
        for i in 0..n {
            let y = scenarios.scenario(i);
            for j in 0..d {
                // z_j - over_ij <= y_ij
                rows.push(CanonicalRow::le(vec![(j, 1.0), (over(i, j), -1.0)], y[j]));
                // -z_j - under_ij <= -y_ij
                rows.push(CanonicalRow::le(vec![(j, -1.0), (under(i, j), -1.0)], -y[j]));
            }
        }
        let scenario_objectives = (0..n)
            .map(|i| {
                (0..d)
                    .map(|j| (over(i, j), self.holding[j]))
                    .chain((0..d).map(|j| (under(i, j), self.backorder[j])))
                    .collect()
            })
            .collect();
        LinearCanonicalForm { n_vars: d + 2 * n * d, rows, scenario_objectives }
    }

    /// Maps an order vector to the canonical variables by setting the
    /// auxiliaries to their exact positive parts.
    pub fn canonical_decision(&self, z: &[f64], scenarios: &ScenarioSet) -> Vec<f64> {
        let d = self.n_products();
        let n = scenarios.len();
        let mut out = Vec::with_capacity(d + 2 * n * d);
        out.extend_from_slice(z);
        for i in 0..n {
            let y = scenarios.scenario(i);
            for j in 0..d {
                out.push((z[j] - y[j]).max(0.0));
            }
            for j in 0..d {
                out.push((y[j] - z[j]).max(0.0));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn zero_cost_when_order_matches_demand() {
        let p = Newsvendor::benchmark(3);
        let y = [1.0, 2.0, 3.0];
        assert_eq!(p.cost(&y, &y), 0.0);
    }

    #[test]
    fn benchmark_costs_and_all_underage_example() {
        let p = Newsvendor::benchmark(20);
        assert_eq!(p.holding[0], 1.0);
        assert_eq!(p.holding[19], 20.0);
        assert_eq!(p.backorder[5], 60.0);
        assert_eq!(p.budget, 100.0);
        // z = 0, y = all ones: cost = sum_j b_j = 10 * (1 + ... + 20) = 2100
        let z = vec![0.0; 20];
        let y = vec![1.0; 20];
        assert_eq!(p.cost(&z, &y), 2100.0);
    }

    #[test]
    fn single_scenario_fit_within_budget() {
        let p = Newsvendor::new(vec![1.0, 2.0], vec![5.0, 7.0], 100.0).unwrap();
        let scen = ScenarioSet::new(vec![vec![3.0, 4.0]]).unwrap();
        let w = WeightVector::uniform(1);
        let (z, obj) = p.solve_wsaa(&scen, &w, &SolverParams::default()).unwrap();
        assert!((z.values()[0] - 3.0).abs() < 1e-6);
        assert!((z.values()[1] - 4.0).abs() < 1e-6);
        assert!(obj.abs() < 1e-6);
    }

    #[test]
    fn matches_weighted_quantile_oracle_single_product() {
        // h = 1, b = 10, loose budget: the optimum is the smallest z whose
        // weighted demand CDF reaches b / (h + b) = 10 / 11
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for trial in 0..20 {
            let n = 12;
            let demands: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let p = Newsvendor::new(vec![1.0], vec![10.0], 1e6).unwrap();
            let scen = ScenarioSet::new(demands.iter().map(|&d| vec![d]).collect()).unwrap();
            let weights = WeightVector::new(w.clone()).unwrap();
            let (z, _) = p.solve_wsaa(&scen, &weights, &SolverParams::default()).unwrap();
            // oracle: weighted quantile at 10/11
            let mut pairs: Vec<(f64, f64)> = demands.iter().cloned().zip(w.clone()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            let mut oracle = pairs.last().unwrap().0;
            for (d, wi) in &pairs {
                acc += wi;
                if acc >= 10.0 / 11.0 - 1e-12 {
                    oracle = *d;
                    break;
                }
            }
            assert!(
                (z.values()[0] - oracle).abs() < 1e-5,
                "trial {trial}: lp {} vs oracle {oracle}",
                z.values()[0]
            );
        }
    }

    #[test]
    fn wsaa_is_a_minimizer_over_sampled_feasible_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = Newsvendor::benchmark(4);
        let scen = ScenarioSet::new(
            (0..8)
                .map(|_| (0..4).map(|_| rng.gen_range(0.0..6.0)).collect())
                .collect(),
        )
        .unwrap();
        let w = WeightVector::uniform(8);
        let (z_opt, obj) = p.solve_wsaa(&scen, &w, &SolverParams::default()).unwrap();
        let eval = |z: &Decision| -> f64 {
            scen.iter().zip(w.as_slice()).map(|(y, wi)| wi * p.cost(z.values(), y)).sum()
        };
        assert!((eval(&z_opt) - obj).abs() < 1e-6);
        for _ in 0..50 {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..5.0)).collect();
            let z = Decision(raw);
            if p.is_feasible(z.values(), 0.0) {
                assert!(eval(&z) >= obj - 1e-7);
            }
        }
    }

    #[test]
    fn canonical_objective_matches_cost_on_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let p = Newsvendor::benchmark(3);
        let scen = ScenarioSet::new(
            (0..5)
                .map(|_| (0..3).map(|_| rng.gen_range(0.0..6.0)).collect())
                .collect(),
        )
        .unwrap();
        let form = p.canonical_form(&scen);
        for _ in 0..100 {
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..5.0)).collect();
            let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let zc = p.canonical_decision(&z, &scen);
            assert!(form.is_feasible(&zc, 1e-9));
            let canonical = form.weighted_cost(&w, &zc);
            let native: f64 =
                scen.iter().zip(&w).map(|(y, wi)| wi * p.cost(&z, y)).sum();
            assert!((canonical - native).abs() < 1e-9);
        }
    }
}
