//! Weight-generating predictors: random forests and k-nearest-neighbors.
//!
//! Both predictors map a context to a probability vector over the `n`
//! historical samples. Those weights drive the decision layer: the
//! weighted SAA problem minimizes `sum_i w_i(x) * c(z, y_i)`.

mod forest;
mod knn;

pub use forest::{
    fit_forest, ForestParams, LeafInfo, RandomForest, RegressionTree, SplitRule, TreeNode,
};
pub use knn::KnnPredictor;

use serde::{Deserialize, Serialize};

use crate::feature_space::{ContextVector, FeatureSpace};
use crate::{Error, Result};

/// Historical observations `(x_i, y_i)`, with contexts validated against
/// their feature space and target vectors of uniform dimension `d_y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingSet {
    contexts: Vec<ContextVector>,
    targets: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn new(
        space: &FeatureSpace,
        contexts: Vec<ContextVector>,
        targets: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if contexts.is_empty() {
            return Err(Error::invalid("training set must contain at least one sample"));
        }
        if contexts.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                what: "training targets",
                expected: contexts.len(),
                got: targets.len(),
            });
        }
        let d_y = targets[0].len();
        if d_y == 0 {
            return Err(Error::invalid("targets must have at least one dimension"));
        }
        for t in &targets {
            if t.len() != d_y {
                return Err(Error::DimensionMismatch {
                    what: "target vector",
                    expected: d_y,
                    got: t.len(),
                });
            }
        }
        for x in &contexts {
            space.require_valid(x)?;
        }
        Ok(TrainingSet { contexts, targets })
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn d_y(&self) -> usize {
        self.targets[0].len()
    }

    pub fn contexts(&self) -> &[ContextVector] {
        &self.contexts
    }

    pub fn context(&self, i: usize) -> &ContextVector {
        &self.contexts[i]
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// The targets viewed as the scenario set of the decision problem.
    pub fn scenarios(&self) -> Vec<Vec<f64>> {
        self.targets.clone()
    }
}

/// Normalized sample weights: entries in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weight vector must be nonempty"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights must sum to 1, got {sum}")));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(-1e-12..=1.0 + 1e-12).contains(&w) {
                return Err(Error::invalid(format!("weight {i} out of [0,1]: {w}")));
            }
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Indices carrying strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }
}

/// Either trained predictor, viewed uniformly as a weight function.
#[derive(Debug, Clone)]
pub enum Predictor {
    Forest(RandomForest),
    Knn(KnnPredictor),
}

impl Predictor {
    /// Weights assigned to the historical samples at context `x`.
    pub fn weights(&self, space: &FeatureSpace, x: &ContextVector) -> Result<WeightVector> {
        space.require_valid(x)?;
        match self {
            Predictor::Forest(f) => Ok(f.weights(x)),
            Predictor::Knn(k) => Ok(k.weights(x)),
        }
    }

    /// Upper bound on any sample weight the predictor can produce; used as
    /// the big-M constant of the CVaR flow encoding.
    pub fn weight_upper_bound(&self) -> f64 {
        match self {
            Predictor::Forest(f) => f.wmax_bound(),
            Predictor::Knn(k) => 1.0 / k.k() as f64,
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            Predictor::Forest(f) => f.n_samples(),
            Predictor::Knn(k) => k.n_samples(),
        }
    }
}
