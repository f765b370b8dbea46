//! k-nearest-neighbor predictor over the normalized l1 metric.

use serde::{Deserialize, Serialize};

use crate::feature_space::{ContextVector, FeatureSpace};
use crate::predictors::{TrainingSet, WeightVector};
use crate::{Error, Result};

/// Stores the training contexts and answers weight queries with `1/k` on
/// the k nearest samples. Ties at the k-th distance break toward the
/// lowest sample index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnPredictor {
    k: usize,
    space: FeatureSpace,
    contexts: Vec<ContextVector>,
}

impl KnnPredictor {
    pub fn fit(space: &FeatureSpace, data: &TrainingSet, k: usize) -> Result<Self> {
        if k == 0 || k > data.len() {
            return Err(Error::invalid(format!(
                "k must be in 1..={}, got {k}",
                data.len()
            )));
        }
        Ok(KnnPredictor {
            k,
            space: space.clone(),
            contexts: data.contexts().to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> usize {
        self.contexts.len()
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn contexts(&self) -> &[ContextVector] {
        &self.contexts
    }

    /// Distances from `x` to every stored sample.
    pub fn distances(&self, x: &ContextVector) -> Vec<f64> {
        self.contexts
            .iter()
            .map(|c| self.space.l1_distance_unchecked(x, c))
            .collect()
    }

    /// Indices of the k nearest samples, in (distance, index) order.
    pub fn neighbors(&self, x: &ContextVector) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> =
            self.distances(x).into_iter().enumerate().map(|(i, d)| (d, i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    pub fn weights(&self, x: &ContextVector) -> WeightVector {
        let mut w = vec![0.0; self.contexts.len()];
        let share = 1.0 / self.k as f64;
        for i in self.neighbors(x) {
            w[i] = share;
        }
        WeightVector::new(w).expect("knn weights are normalized by construction")
    }

    /// Gap between the k-th and (k+1)-th nearest distances; infinite when
    /// k = n. Encoding-fidelity checks exclude contexts with a tiny gap.
    pub fn neighbor_gap(&self, x: &ContextVector) -> f64 {
        if self.k == self.contexts.len() {
            return f64::INFINITY;
        }
        let mut d = self.distances(x);
        d.sort_by(f64::total_cmp);
        d[self.k] - d[self.k - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(xs: &[f64]) -> (FeatureSpace, TrainingSet) {
        let space = FeatureSpace::continuous_box(1, 0.0, 1.0).unwrap();
        let contexts = xs
            .iter()
            .map(|&x| ContextVector::from_f64s(&space, &[x]).unwrap())
            .collect();
        let targets = xs.iter().map(|&x| vec![x]).collect();
        let data = TrainingSet::new(&space, contexts, targets).unwrap();
        (space, data)
    }

    #[test]
    fn k_equals_n_is_uniform() {
        let (space, data) = setup(&[0.0, 0.25, 0.5, 1.0]);
        let knn = KnnPredictor::fit(&space, &data, 4).unwrap();
        let x = ContextVector::from_f64s(&space, &[0.3]).unwrap();
        assert_eq!(knn.weights(&x).as_slice(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn exact_match_with_k1() {
        let (space, data) = setup(&[0.0, 0.4, 0.8]);
        let knn = KnnPredictor::fit(&space, &data, 1).unwrap();
        let x = ContextVector::from_f64s(&space, &[0.8]).unwrap();
        assert_eq!(knn.weights(&x).as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn tie_at_kth_distance_prefers_lower_index() {
        // distances from x=0.5: (0.1, 0.3, 0.3); with k=2 the tie between
        // samples 1 and 2 resolves to sample 1.
        let (space, data) = setup(&[0.4, 0.2, 0.8]);
        let knn = KnnPredictor::fit(&space, &data, 2).unwrap();
        let x = ContextVector::from_f64s(&space, &[0.5]).unwrap();
        assert_eq!(knn.weights(&x).as_slice(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_k() {
        let (space, data) = setup(&[0.1, 0.9]);
        assert!(KnnPredictor::fit(&space, &data, 0).is_err());
        assert!(KnnPredictor::fit(&space, &data, 3).is_err());
    }

    #[test]
    fn brute_force_agreement_on_random_queries() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
        let (space, data) = setup(&xs);
        let knn = KnnPredictor::fit(&space, &data, 5).unwrap();
        for _ in 0..100 {
            let q = ContextVector::from_f64s(&space, &[rng.gen()]).unwrap();
            let w = knn.weights(&q);
            let sum: f64 = w.as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            // brute force: best 5 by (distance, index)
            let mut pairs: Vec<(f64, usize)> = xs
                .iter()
                .enumerate()
                .map(|(i, &v)| ((v - q.value(0).as_f64()).abs(), i))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (d, i) in pairs.iter().take(5) {
                assert!(w.get(*i) > 0.0, "sample {i} at distance {d} should be selected");
            }
        }
    }
}
