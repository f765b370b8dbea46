//! Random-forest regression trained with greedy variance-reduction CART.
//!
//! Trees are grown on bootstrap resamples; splits minimize the summed
//! per-coordinate variance of the (possibly multi-output) targets, with
//! thresholds placed at midpoints of consecutive sorted distinct values.
//! After growing, every leaf records the *original* sample indices that
//! the tree routes into it (bootstrap duplicates collapse to one entry),
//! so the leaves of each tree partition the full sample set. A tree
//! assigns weight `1/|leaf|` to each sample sharing the query's leaf and
//! the forest averages over trees.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::feature_space::{ContextVector, FeatureSpace, FeatureValue};
use crate::predictors::{TrainingSet, WeightVector};
use crate::{Error, Result};

/// Training parameters for [`fit_forest`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Maximum tree depth; `0` produces single-leaf trees.
    pub max_depth: u32,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means all of them.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 4,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Routing rule of a split node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Numeric: go left iff `value <= threshold`.
    Threshold(f64),
    /// Categorical: go left iff the category index is in the set.
    Categories(Vec<usize>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Distinct original sample indices routed here, sorted.
        samples: Vec<usize>,
    },
}

/// One regression tree; node 0 is the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Index of the leaf node containing `x`.
    pub fn route(&self, x: &ContextVector) -> usize {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { .. } => return node,
                TreeNode::Split { feature, rule, left, right } => {
                    node = if Self::goes_left(x.value(*feature), rule) { *left } else { *right };
                }
            }
        }
    }

    fn goes_left(value: &FeatureValue, rule: &SplitRule) -> bool {
        match (rule, value) {
            (SplitRule::Threshold(t), FeatureValue::Continuous(v)) => v <= t,
            (SplitRule::Threshold(t), FeatureValue::Discrete(v)) => (*v as f64) <= *t,
            (SplitRule::Categories(set), FeatureValue::Categorical(c)) => set.contains(c),
            _ => unreachable!("split rule kind matches feature kind by construction"),
        }
    }

    /// All leaves as `(node_id, samples)`.
    pub fn leaves(&self) -> Vec<LeafInfo<'_>> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n {
                TreeNode::Leaf { samples } => Some(LeafInfo { node_id: id, samples }),
                _ => None,
            })
            .collect()
    }

    /// Ancestor splits of a node: `(feature, rule, went_left)` from root.
    pub fn ancestors_of(&self, target: usize) -> Vec<(usize, &SplitRule, bool)> {
        let mut path = Vec::new();
        self.find_path(0, target, &mut path);
        path
    }

    fn find_path<'a>(
        &'a self,
        node: usize,
        target: usize,
        path: &mut Vec<(usize, &'a SplitRule, bool)>,
    ) -> bool {
        if node == target {
            return true;
        }
        if let TreeNode::Split { feature, rule, left, right } = &self.nodes[node] {
            path.push((*feature, rule, true));
            if self.find_path(*left, target, path) {
                return true;
            }
            path.pop();
            path.push((*feature, rule, false));
            if self.find_path(*right, target, path) {
                return true;
            }
            path.pop();
        }
        false
    }
}

/// A leaf with its original-sample membership.
pub struct LeafInfo<'a> {
    pub node_id: usize,
    pub samples: &'a [usize],
}

/// A trained random forest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
    pub params: ForestParams,
    n_samples: usize,
}

impl RandomForest {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Forest weights at `x`: the average over trees of `1/|leaf|` spread
    /// over the samples in the leaf containing `x`.
    pub fn weights(&self, x: &ContextVector) -> WeightVector {
        let mut w = vec![0.0; self.n_samples];
        let t = self.trees.len() as f64;
        for tree in &self.trees {
            let leaf = tree.route(x);
            if let TreeNode::Leaf { samples } = &tree.nodes[leaf] {
                let share = 1.0 / (t * samples.len() as f64);
                for &i in samples {
                    w[i] += share;
                }
            }
        }
        WeightVector::new(w).expect("forest weights are normalized by construction")
    }

    /// Sparse leaf-membership table: for each tree, each leaf with the
    /// per-sample weight `1/|leaf|` it contributes.
    pub fn leaf_membership(&self) -> Vec<Vec<LeafMembership>> {
        self.trees
            .iter()
            .map(|tree| {
                tree.leaves()
                    .into_iter()
                    .map(|leaf| LeafMembership {
                        node_id: leaf.node_id,
                        samples: leaf.samples.to_vec(),
                        weight: 1.0 / leaf.samples.len() as f64,
                    })
                    .collect()
            })
            .collect()
    }

    /// Upper bound on any forest weight, from the longest path over the
    /// layered leaf graph: one node per (tree, leaf), an arc between leaves
    /// of consecutive trees iff they share a training sample, arc weight
    /// `1/|leaf|` of the tail, and sink arcs weighted by the last layer's
    /// leaf sizes. Falls back to 1 if some layer pair is disconnected,
    /// which cannot happen when every tree partitions the sample set.
    pub fn wmax_bound(&self) -> f64 {
        let blocks = self.n_samples.div_ceil(64);
        let layers: Vec<Vec<(f64, Vec<u64>)>> = self
            .trees
            .iter()
            .map(|tree| {
                tree.leaves()
                    .into_iter()
                    .map(|leaf| {
                        let mut bits = vec![0u64; blocks];
                        for &i in leaf.samples {
                            bits[i / 64] |= 1 << (i % 64);
                        }
                        (1.0 / leaf.samples.len() as f64, bits)
                    })
                    .collect()
            })
            .collect();

        // longest-path DP over layers; best[l] = max prefix weight ending
        // at leaf l of the current layer, including that leaf's arc weight
        let mut best: Vec<f64> = layers[0].iter().map(|(w, _)| *w).collect();
        for t in 1..layers.len() {
            let prev = &layers[t - 1];
            let cur = &layers[t];
            let mut next = vec![f64::NEG_INFINITY; cur.len()];
            for (l, (w, bits)) in cur.iter().enumerate() {
                for (p, (_, pbits)) in prev.iter().enumerate() {
                    if best[p] > next[l] - w
                        && bits.iter().zip(pbits).any(|(a, b)| a & b != 0)
                    {
                        next[l] = next[l].max(best[p] + w);
                    }
                }
            }
            if next.iter().all(|v| !v.is_finite()) {
                return 1.0;
            }
            best = next;
        }
        let longest = best.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !longest.is_finite() {
            return 1.0;
        }
        (longest / self.trees.len() as f64).min(1.0)
    }

    /// The looser bound that averages each tree's largest leaf weight.
    pub fn naive_wmax_bound(&self) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|tree| {
                tree.leaves()
                    .iter()
                    .map(|l| 1.0 / l.samples.len() as f64)
                    .fold(0.0, f64::max)
            })
            .sum();
        (sum / self.trees.len() as f64).min(1.0)
    }

    /// All split thresholds per feature, sorted; used by the explanation
    /// post-processing to snap solver outputs onto routing boundaries.
    pub fn thresholds_by_feature(&self, d_x: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); d_x];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let TreeNode::Split { feature, rule: SplitRule::Threshold(t), .. } = node {
                    out[*feature].push(*t);
                }
            }
        }
        for v in &mut out {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        out
    }
}

/// One row of the sparse `S` table: samples of a leaf and their weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafMembership {
    pub node_id: usize,
    pub samples: Vec<usize>,
    pub weight: f64,
}

/// Trains a random forest on the training set.
pub fn fit_forest(space: &FeatureSpace, data: &TrainingSet, params: &ForestParams) -> Result<RandomForest> {
    if data.is_empty() {
        return Err(Error::invalid("cannot fit a forest on an empty training set"));
    }
    if params.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::invalid("min_samples_leaf must be at least 1"));
    }
    if let Some(m) = params.features_per_split {
        if m == 0 || m > space.dim() {
            return Err(Error::invalid(format!(
                "features_per_split must be in 1..={}, got {m}",
                space.dim()
            )));
        }
    }
    let n = data.len();
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(fanout_seed(params.seed, t as u64));
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(space, data, params, sample, &mut rng)
        })
        .collect::<Vec<_>>();
    Ok(RandomForest { trees, params: clone_params(params), n_samples: n })
}

fn clone_params(p: &ForestParams) -> ForestParams {
    p.clone()
}

/// SplitMix64-style per-tree seed derivation.
fn fanout_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Grower<'a> {
    space: &'a FeatureSpace,
    data: &'a TrainingSet,
    params: &'a ForestParams,
    nodes: Vec<TreeNode>,
}

fn grow_tree(
    space: &FeatureSpace,
    data: &TrainingSet,
    params: &ForestParams,
    sample: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let mut grower = Grower { space, data, params, nodes: Vec::new() };
    grower.grow(sample, 0, rng);
    let mut tree = RegressionTree { nodes: grower.nodes };
    populate_leaves(&mut tree, data);
    tree
}

impl Grower<'_> {
    /// Grows the subtree for a multiset of bootstrap rows; returns its node id.
    fn grow(&mut self, rows: Vec<usize>, depth: u32, rng: &mut ChaCha8Rng) -> usize {
        let split = if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf
        {
            None
        } else {
            self.best_split(&rows, rng)
        };
        match split {
            None => {
                self.nodes.push(TreeNode::Leaf { samples: Vec::new() });
                self.nodes.len() - 1
            }
            Some((feature, rule, left_rows, right_rows)) => {
                let id = self.nodes.len();
                // placeholder; children are appended after
                self.nodes.push(TreeNode::Leaf { samples: Vec::new() });
                let left = self.grow(left_rows, depth + 1, rng);
                let right = self.grow(right_rows, depth + 1, rng);
                self.nodes[id] = TreeNode::Split { feature, rule, left, right };
                id
            }
        }
    }

    /// Best variance-reduction split over a random feature subset.
    #[allow(clippy::type_complexity)]
    fn best_split(
        &self,
        rows: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, SplitRule, Vec<usize>, Vec<usize>)> {
        let d_x = self.space.dim();
        let features: Vec<usize> = match self.params.features_per_split {
            None => (0..d_x).collect(),
            Some(m) => {
                let mut idx: Vec<usize> = (0..d_x).collect();
                idx.shuffle(rng);
                idx.truncate(m);
                idx.sort_unstable();
                idx
            }
        };
        let parent_sse = sse(self.data, rows);
        if parent_sse <= 1e-12 {
            return None; // zero-variance target, nothing to gain
        }
        let mut best: Option<(f64, usize, SplitRule)> = None;
        for &f in &features {
            let candidate = match &self.space.spec(f).domain {
                crate::feature_space::FeatureDomain::Categorical { .. } => {
                    self.best_categorical_split(rows, f)
                }
                _ => self.best_numeric_split(rows, f),
            };
            if let Some((gain, rule)) = candidate {
                let better = match &best {
                    None => true,
                    Some((g, _, _)) => gain > *g + 1e-15,
                };
                if better {
                    best = Some((gain, f, rule));
                }
            }
        }
        let (gain, feature, rule) = best?;
        if gain <= 1e-12 {
            return None;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
            RegressionTree::goes_left(self.data.context(r).value(feature), &rule)
        });
        if left.len() < self.params.min_samples_leaf || right.len() < self.params.min_samples_leaf {
            return None;
        }
        Some((feature, rule, left, right))
    }

    /// Midpoint thresholds over sorted distinct values, scored in one sweep
    /// with prefix sums of the target moments.
    fn best_numeric_split(&self, rows: &[usize], feature: usize) -> Option<(f64, SplitRule)> {
        let d_y = self.data.d_y();
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| {
            self.data
                .context(a)
                .value(feature)
                .as_f64()
                .total_cmp(&self.data.context(b).value(feature).as_f64())
        });
        let m = order.len();
        let total_sse = sse(self.data, rows);
        let mut sum = vec![0.0; d_y];
        let mut sumsq = vec![0.0; d_y];
        let mut total_sum = vec![0.0; d_y];
        let mut total_sumsq = vec![0.0; d_y];
        for &r in &order {
            for (j, &y) in self.data.targets()[r].iter().enumerate() {
                total_sum[j] += y;
                total_sumsq[j] += y * y;
            }
        }
        let mut best: Option<(f64, f64)> = None; // (gain, threshold)
        for k in 0..m - 1 {
            let r = order[k];
            for (j, &y) in self.data.targets()[r].iter().enumerate() {
                sum[j] += y;
                sumsq[j] += y * y;
            }
            let v = self.data.context(r).value(feature).as_f64();
            let v_next = self.data.context(order[k + 1]).value(feature).as_f64();
            if v_next <= v {
                continue; // only split between distinct values
            }
            let left_n = (k + 1) as f64;
            let right_n = (m - k - 1) as f64;
            if (k + 1) < self.params.min_samples_leaf
                || (m - k - 1) < self.params.min_samples_leaf
            {
                continue;
            }
            let mut child_sse = 0.0;
            for j in 0..d_y {
                let ls = sumsq[j] - sum[j] * sum[j] / left_n;
                let rs = (total_sumsq[j] - sumsq[j])
                    - (total_sum[j] - sum[j]) * (total_sum[j] - sum[j]) / right_n;
                child_sse += ls + rs;
            }
            let gain = total_sse - child_sse;
            let threshold = 0.5 * (v + v_next);
            if best.map_or(true, |(g, _)| gain > g + 1e-15) {
                best = Some((gain, threshold));
            }
        }
        best.map(|(gain, t)| (gain, SplitRule::Threshold(t)))
    }

    /// Categories ordered by mean target sum; candidate splits are the
    /// prefixes of that order (the classic ordered-category reduction).
    fn best_categorical_split(&self, rows: &[usize], feature: usize) -> Option<(f64, SplitRule)> {
        use std::collections::BTreeMap;
        let mut by_cat: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &r in rows {
            if let FeatureValue::Categorical(c) = self.data.context(r).value(feature) {
                by_cat.entry(*c).or_default().push(r);
            }
        }
        if by_cat.len() < 2 {
            return None;
        }
        let mut cats: Vec<(usize, Vec<usize>)> = by_cat.into_iter().collect();
        cats.sort_by(|a, b| {
            let mean = |rs: &[usize]| {
                rs.iter()
                    .map(|&r| self.data.targets()[r].iter().sum::<f64>())
                    .sum::<f64>()
                    / rs.len() as f64
            };
            mean(&a.1).total_cmp(&mean(&b.1)).then(a.0.cmp(&b.0))
        });
        let total_sse = sse(self.data, rows);
        let mut best: Option<(f64, usize)> = None; // (gain, prefix length)
        let mut left_rows: Vec<usize> = Vec::new();
        for p in 0..cats.len() - 1 {
            left_rows.extend_from_slice(&cats[p].1);
            let right_rows: Vec<usize> = cats[p + 1..]
                .iter()
                .flat_map(|(_, rs)| rs.iter().copied())
                .collect();
            if left_rows.len() < self.params.min_samples_leaf
                || right_rows.len() < self.params.min_samples_leaf
            {
                continue;
            }
            let gain = total_sse - sse(self.data, &left_rows) - sse(self.data, &right_rows);
            if best.map_or(true, |(g, _)| gain > g + 1e-15) {
                best = Some((gain, p + 1));
            }
        }
        best.map(|(gain, p)| {
            let mut set: Vec<usize> = cats[..p].iter().map(|(c, _)| *c).collect();
            set.sort_unstable();
            (gain, SplitRule::Categories(set))
        })
    }
}

/// Sum over target dimensions of the within-node squared error.
fn sse(data: &TrainingSet, rows: &[usize]) -> f64 {
    let d_y = data.d_y();
    let m = rows.len() as f64;
    let mut sum = vec![0.0; d_y];
    let mut sumsq = vec![0.0; d_y];
    for &r in rows {
        for (j, &y) in data.targets()[r].iter().enumerate() {
            sum[j] += y;
            sumsq[j] += y * y;
        }
    }
    (0..d_y).map(|j| (sumsq[j] - sum[j] * sum[j] / m).max(0.0)).sum()
}

/// Routes every original sample through the tree and records it in its
/// leaf, so that the leaves partition `[n]`.
fn populate_leaves(tree: &mut RegressionTree, data: &TrainingSet) {
    let assignments: Vec<usize> = (0..data.len()).map(|i| tree.route(data.context(i))).collect();
    for (i, leaf) in assignments.into_iter().enumerate() {
        if let TreeNode::Leaf { samples } = &mut tree.nodes[leaf] {
            samples.push(i);
        }
    }
}
