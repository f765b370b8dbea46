//! MIP encodings of the feature space and of predictor weight functions.
//!
//! Contexts enter a model as one numeric variable per continuous/discrete
//! feature and a one-hot binary block per categorical feature. Predictor
//! encodings expose weight variables `w_i` that are forced, for every
//! feasible assignment of the context variables, to equal the weights the
//! real predictor would produce at that context (up to the strict-side
//! epsilon margins documented below).
//!
//! Margins: a right branch of a tree split and the excluded side of the
//! k-NN radius both involve strict inequalities, which MIPs cannot carry.
//! They are enforced with an epsilon margin: `1e-4` of the feature range
//! on continuous features (and of the unit normalized distance for the
//! k-NN radius), and exactly one unit on integer features whose
//! thresholds are floored onto the integer grid. Contexts inside those
//! epsilon slivers are excluded from the search space.

use crate::feature_space::{ContextVector, FeatureDomain, FeatureSpace, FeatureValue};
use crate::milp::{Cut, LinExpr, Model, Sense, SolveOutcome, VarId};
use crate::predictors::{KnnPredictor, RandomForest};
use crate::{Error, Result};

/// Fraction of the feature range used as the strict-side margin.
pub const EPSILON_FRACTION: f64 = 1e-4;

/// Margin separating selected from excluded neighbors in the k-NN radius
/// constraints, in normalized-distance units.
pub const KNN_EPSILON: f64 = 1e-4;

/// Snap tolerance for post-processing solver outputs onto split
/// thresholds, as a fraction of the feature range. Sits between the
/// solver feasibility tolerance and the epsilon margin.
const SNAP_FRACTION: f64 = 1e-5;

/// Model variables representing one feature.
#[derive(Debug, Clone)]
pub enum FeatureVars {
    Numeric(VarId),
    OneHot(Vec<VarId>),
}

/// The context block of an explanation model.
#[derive(Debug, Clone)]
pub struct ContextVars {
    features: Vec<FeatureVars>,
}

impl ContextVars {
    pub fn feature(&self, idx: usize) -> &FeatureVars {
        &self.features[idx]
    }

    /// Numeric variable of a feature; panics on categorical features.
    pub fn numeric(&self, idx: usize) -> VarId {
        match &self.features[idx] {
            FeatureVars::Numeric(v) => *v,
            FeatureVars::OneHot(_) => panic!("feature {idx} is categorical"),
        }
    }
}

/// Adds the context variables for `space`, freezing immutable features at
/// the query context.
pub fn encode_context(
    model: &mut Model,
    space: &FeatureSpace,
    x_now: &ContextVector,
) -> Result<ContextVars> {
    space.require_valid(x_now)?;
    let mut features = Vec::with_capacity(space.dim());
    for (f, spec) in space.specs().iter().enumerate() {
        let vars = match &spec.domain {
            FeatureDomain::Continuous { lower, upper } => {
                let v = model.add_continuous(format!("x{f}"), *lower, *upper)?;
                if !spec.mutable {
                    let val = x_now.value(f).as_f64();
                    model.set_var_bounds(v, val, val);
                }
                FeatureVars::Numeric(v)
            }
            FeatureDomain::Discrete { lower, upper } => {
                let v = model.add_integer(format!("x{f}"), *lower, *upper)?;
                if !spec.mutable {
                    let val = x_now.value(f).as_f64();
                    model.set_var_bounds(v, val, val);
                }
                FeatureVars::Numeric(v)
            }
            FeatureDomain::Categorical { categories } => {
                let binaries: Vec<VarId> = (0..categories.len())
                    .map(|c| model.add_binary(format!("x{f}.cat{c}")))
                    .collect::<Result<_>>()?;
                let mut one = LinExpr::new();
                for &b in &binaries {
                    one.add_term(b, 1.0);
                }
                model.add_constraint(format!("x{f}.onehot"), one, Sense::Eq, 1.0)?;
                if !spec.mutable {
                    if let FeatureValue::Categorical(c) = x_now.value(f) {
                        for (k, &b) in binaries.iter().enumerate() {
                            let fix = if k == *c { 1.0 } else { 0.0 };
                            model.set_var_bounds(b, fix, fix);
                        }
                    }
                }
                FeatureVars::OneHot(binaries)
            }
        };
        features.push(vars);
    }
    Ok(ContextVars { features })
}

/// Normalized l1 distance from the context variables to a fixed center,
/// exact at any minimizing optimum.
pub fn distance_expr(
    model: &mut Model,
    space: &FeatureSpace,
    vars: &ContextVars,
    center: &ContextVector,
    tag: &str,
) -> Result<LinExpr> {
    let mut expr = LinExpr::new();
    for (f, spec) in space.specs().iter().enumerate() {
        match (&spec.domain, vars.feature(f)) {
            (FeatureDomain::Categorical { .. }, FeatureVars::OneHot(binaries)) => {
                if let FeatureValue::Categorical(c) = center.value(f) {
                    // 1 - onehot[center category]
                    expr.add_constant(1.0);
                    expr.add_term(binaries[*c], -1.0);
                }
            }
            (_, FeatureVars::Numeric(v)) => {
                let range = spec.range().unwrap();
                if range == 0.0 {
                    continue;
                }
                let abs = model.add_abs_linearization(
                    &format!("{tag}.f{f}"),
                    *v,
                    center.value(f).as_f64(),
                    range,
                )?;
                expr = expr + abs.value;
            }
            _ => unreachable!("feature vars match the domain by construction"),
        }
    }
    Ok(expr)
}

/// Fixes the context variables at a specific context (encoding-fidelity
/// checks solve the model with `x` pinned and read the implied weights).
pub fn fix_context(model: &mut Model, space: &FeatureSpace, vars: &ContextVars, x: &ContextVector) {
    for (f, _) in space.specs().iter().enumerate() {
        match (vars.feature(f), x.value(f)) {
            (FeatureVars::Numeric(v), val) => {
                let val = val.as_f64();
                model.set_var_bounds(*v, val, val);
            }
            (FeatureVars::OneHot(binaries), FeatureValue::Categorical(c)) => {
                for (k, &b) in binaries.iter().enumerate() {
                    let fix = if k == *c { 1.0 } else { 0.0 };
                    model.set_var_bounds(b, fix, fix);
                }
            }
            _ => unreachable!(),
        }
    }
}

/// Reads a context out of a solve, rounding integer and one-hot blocks,
/// clamping into bounds, and snapping continuous values that sit a
/// feasibility-tolerance above a split threshold back onto it (the MIP
/// routed them left; real routing must agree).
pub fn read_context(
    space: &FeatureSpace,
    vars: &ContextVars,
    outcome: &SolveOutcome,
    thresholds: Option<&[Vec<f64>]>,
) -> ContextVector {
    let values = space
        .specs()
        .iter()
        .enumerate()
        .map(|(f, spec)| match (&spec.domain, vars.feature(f)) {
            (FeatureDomain::Continuous { lower, upper }, FeatureVars::Numeric(v)) => {
                let mut val = outcome.value(*v).clamp(*lower, *upper);
                if let Some(ts) = thresholds {
                    let snap_tol = SNAP_FRACTION * (upper - lower);
                    // snap downward onto the closest threshold just below
                    if let Some(&t) = ts[f]
                        .iter()
                        .rev()
                        .find(|&&t| t < val && val - t <= snap_tol)
                    {
                        val = t;
                    }
                }
                FeatureValue::Continuous(val)
            }
            (FeatureDomain::Discrete { lower, upper }, FeatureVars::Numeric(v)) => {
                FeatureValue::Discrete((outcome.value(*v).round() as i64).clamp(*lower, *upper))
            }
            (FeatureDomain::Categorical { .. }, FeatureVars::OneHot(binaries)) => {
                let best = binaries
                    .iter()
                    .enumerate()
                    .max_by(|a, b| outcome.value(*a.1).total_cmp(&outcome.value(*b.1)))
                    .map(|(c, _)| c)
                    .unwrap_or(0);
                FeatureValue::Categorical(best)
            }
            _ => unreachable!(),
        })
        .collect();
    ContextVector::from_values(values)
}

/// Leaf-assignment encoding of a random forest.
///
/// One binary per (tree, leaf) with exactly one active leaf per tree;
/// each leaf's ancestor splits constrain the context variables with
/// range-derived big-M constants; the weight variables aggregate the
/// leaf membership table.
pub struct ForestEncoding {
    /// Per tree: `(leaf node id, indicator)`.
    pub leaf_vars: Vec<Vec<(usize, VarId)>>,
    pub weights: Vec<VarId>,
    /// Split thresholds per feature, for output snapping.
    pub thresholds: Vec<Vec<f64>>,
}

pub fn encode_forest(
    model: &mut Model,
    space: &FeatureSpace,
    forest: &RandomForest,
    vars: &ContextVars,
) -> Result<ForestEncoding> {
    let n = forest.n_samples();
    let n_trees = forest.n_trees();
    let mut leaf_vars = Vec::with_capacity(n_trees);
    // accumulate the weight-definition terms per sample
    let mut weight_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];

    for (t, tree) in forest.trees.iter().enumerate() {
        let leaves = tree.leaves();
        let mut this_tree = Vec::with_capacity(leaves.len());
        let mut one = LinExpr::new();
        for leaf in &leaves {
            let l = model.add_binary(format!("t{t}.l{}", leaf.node_id))?;
            one.add_term(l, 1.0);
            let share = 1.0 / (n_trees as f64 * leaf.samples.len() as f64);
            for &s in leaf.samples {
                weight_terms[s].push((l, share));
            }
            for (a, (feature, rule, went_left)) in
                tree.ancestors_of(leaf.node_id).into_iter().enumerate()
            {
                add_branch_constraint(
                    model,
                    space,
                    vars,
                    l,
                    feature,
                    rule,
                    went_left,
                    &format!("t{t}.l{}.a{a}", leaf.node_id),
                )?;
            }
            this_tree.push((leaf.node_id, l));
        }
        model.add_constraint(format!("t{t}.onehot"), one, Sense::Eq, 1.0)?;
        leaf_vars.push(this_tree);
    }

    let mut weights = Vec::with_capacity(n);
    for (i, terms) in weight_terms.into_iter().enumerate() {
        let w = model.add_continuous(format!("w{i}"), 0.0, 1.0)?;
        let mut def = LinExpr::term(w, 1.0);
        for (l, share) in terms {
            def.add_term(l, -share);
        }
        model.add_constraint(format!("w{i}.def"), def, Sense::Eq, 0.0)?;
        weights.push(w);
    }

    Ok(ForestEncoding {
        leaf_vars,
        weights,
        thresholds: forest.thresholds_by_feature(space.dim()),
    })
}

#[allow(clippy::too_many_arguments)]
fn add_branch_constraint(
    model: &mut Model,
    space: &FeatureSpace,
    vars: &ContextVars,
    leaf: VarId,
    feature: usize,
    rule: &crate::predictors::SplitRule,
    went_left: bool,
    tag: &str,
) -> Result<()> {
    use crate::predictors::SplitRule;
    match (rule, vars.feature(feature)) {
        (SplitRule::Threshold(theta), FeatureVars::Numeric(x)) => {
            let spec = space.spec(feature);
            let range = spec.range().unwrap();
            let (theta_eff, eps) = match spec.domain {
                FeatureDomain::Discrete { .. } => (theta.floor(), 1.0),
                _ => (*theta, EPSILON_FRACTION * range),
            };
            let big_m = range + eps;
            if went_left {
                // x <= theta + M (1 - l)
                let mut expr = LinExpr::term(*x, 1.0);
                expr.add_term(leaf, big_m);
                model.add_constraint(tag, expr, Sense::Le, theta_eff + big_m)?;
            } else {
                // x >= theta + eps - M (1 - l)
                let mut expr = LinExpr::term(*x, 1.0);
                expr.add_term(leaf, -big_m);
                model.add_constraint(tag, expr, Sense::Ge, theta_eff + eps - big_m)?;
            }
        }
        (SplitRule::Categories(set), FeatureVars::OneHot(binaries)) => {
            // active leaf forces the category into (or out of) the set
            let mut expr = LinExpr::new();
            for (c, &b) in binaries.iter().enumerate() {
                let in_set = set.contains(&c);
                if in_set == went_left {
                    expr.add_term(b, 1.0);
                }
            }
            expr.add_term(leaf, -1.0);
            model.add_constraint(tag, expr, Sense::Ge, 0.0)?;
        }
        _ => {
            return Err(Error::Model(format!(
                "split rule on feature {feature} does not match the feature kind"
            )))
        }
    }
    Ok(())
}

/// Neighborhood encoding of a k-NN predictor.
///
/// Binary `lambda_i` marks sample `i` as one of the k neighbors; a free
/// radius variable separates selected from excluded samples through
/// big-M constraints on the exact per-sample distances. Distances are
/// made exact (not merely bounded below) by sign binaries on each
/// numeric deviation, preventing the solver from inflating the distance
/// of a sample to push it outside the neighborhood.
pub struct KnnEncoding {
    pub lambda: Vec<VarId>,
    pub dist: Vec<VarId>,
    pub radius: VarId,
    pub weights: Vec<VarId>,
    pub epsilon: f64,
}

pub fn encode_knn(
    model: &mut Model,
    space: &FeatureSpace,
    knn: &KnnPredictor,
    vars: &ContextVars,
) -> Result<KnnEncoding> {
    let n = knn.n_samples();
    let k = knn.k();
    let diameter = space.l1_diameter();
    let eps = KNN_EPSILON;
    let big_m = diameter + eps;

    let radius = model.add_continuous("radius", 0.0, diameter)?;
    let mut lambda = Vec::with_capacity(n);
    let mut dist = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    // sign binaries per (feature, sample), kept for ordering constraints
    let mut signs: Vec<Vec<(f64, VarId)>> = vec![Vec::new(); space.dim()];

    for i in 0..n {
        let sample = knn.contexts()[i].clone();
        let d_i = model.add_continuous(format!("d{i}"), 0.0, diameter)?;
        // exact distance definition: d_i = sum_f |x_f - v_if| / range_f
        //                                 + sum_cat (1 - onehot[v_if])
        let mut def = LinExpr::term(d_i, -1.0);
        let mut rhs = 0.0;
        for (f, spec) in space.specs().iter().enumerate() {
            match (vars.feature(f), sample.value(f)) {
                (FeatureVars::OneHot(binaries), FeatureValue::Categorical(c)) => {
                    // contributes 1 - onehot[c]
                    rhs -= 1.0;
                    def.add_term(binaries[*c], -1.0);
                }
                (FeatureVars::Numeric(x), value) => {
                    let range = spec.range().unwrap();
                    if range == 0.0 {
                        continue;
                    }
                    let v = value.as_f64();
                    let (lo, hi) = match spec.domain {
                        FeatureDomain::Continuous { lower, upper } => (lower, upper),
                        FeatureDomain::Discrete { lower, upper } => (lower as f64, upper as f64),
                        _ => unreachable!(),
                    };
                    let pos = model.add_continuous(format!("d{i}.f{f}.pos"), 0.0, (hi - v).max(0.0))?;
                    let neg = model.add_continuous(format!("d{i}.f{f}.neg"), 0.0, (v - lo).max(0.0))?;
                    let mut split = LinExpr::term(*x, 1.0);
                    split.add_term(pos, -1.0).add_term(neg, 1.0);
                    model.add_constraint(format!("d{i}.f{f}.def"), split, Sense::Eq, v)?;
                    // sign binary makes the split exact: pos and neg
                    // cannot both be positive
                    let sigma = model.add_binary(format!("d{i}.f{f}.sgn"))?;
                    let mut up = LinExpr::term(pos, 1.0);
                    up.add_term(sigma, -(hi - v).max(0.0));
                    model.add_constraint(format!("d{i}.f{f}.up"), up, Sense::Le, 0.0)?;
                    let mut down = LinExpr::term(neg, 1.0);
                    down.add_term(sigma, (v - lo).max(0.0));
                    model.add_constraint(format!("d{i}.f{f}.dn"), down, Sense::Le, (v - lo).max(0.0))?;
                    signs[f].push((v, sigma));
                    def.add_term(pos, 1.0 / range);
                    def.add_term(neg, 1.0 / range);
                }
                _ => unreachable!(),
            }
        }
        model.add_constraint(format!("d{i}.def"), def, Sense::Eq, rhs)?;

        let l = model.add_binary(format!("lam{i}"))?;
        let w = model.add_continuous(format!("w{i}"), 0.0, 1.0 / k as f64)?;
        // w_i = lambda_i / k
        let mut wdef = LinExpr::term(w, 1.0);
        wdef.add_term(l, -1.0 / k as f64);
        model.add_constraint(format!("w{i}.def"), wdef, Sense::Eq, 0.0)?;
        // d_i <= radius + M (1 - lambda_i)
        let mut inside = LinExpr::term(d_i, 1.0);
        inside.add_term(radius, -1.0).add_term(l, big_m);
        model.add_constraint(format!("in{i}"), inside, Sense::Le, big_m)?;
        // d_i >= radius + eps - M lambda_i
        let mut outside = LinExpr::term(d_i, 1.0);
        outside.add_term(radius, -1.0).add_term(l, big_m);
        model.add_constraint(format!("out{i}"), outside, Sense::Ge, eps)?;
        lambda.push(l);
        dist.push(d_i);
        weights.push(w);
    }

    // exactly k neighbors
    let mut count = LinExpr::new();
    for &l in &lambda {
        count.add_term(l, 1.0);
    }
    model.add_constraint("k_neighbors", count, Sense::Eq, k as f64)?;

    // monotone sign ordering along each feature's sorted sample values:
    // x >= larger value implies x >= smaller value
    for (f, mut list) in signs.into_iter().enumerate() {
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (j, pair) in list.windows(2).enumerate() {
            let (_, sig_small) = pair[0];
            let (_, sig_big) = pair[1];
            let mut expr = LinExpr::term(sig_big, 1.0);
            expr.add_term(sig_small, -1.0);
            model.add_constraint(format!("ord.f{f}.{j}"), expr, Sense::Le, 0.0)?;
        }
    }

    Ok(KnnEncoding { lambda, dist, radius, weights, epsilon: eps })
}

/// Uniform view over the two predictor encodings.
pub enum PredictorEncoding {
    Forest(ForestEncoding),
    Knn(KnnEncoding),
}

impl PredictorEncoding {
    pub fn weights(&self) -> &[VarId] {
        match self {
            PredictorEncoding::Forest(f) => &f.weights,
            PredictorEncoding::Knn(k) => &k.weights,
        }
    }

    /// Thresholds for output snapping (forests only).
    pub fn snap_thresholds(&self) -> Option<&[Vec<f64>]> {
        match self {
            PredictorEncoding::Forest(f) => Some(&f.thresholds),
            PredictorEncoding::Knn(_) => None,
        }
    }

    /// Cut excluding the weight region of the given solution: the active
    /// leaf combination for forests, the selected neighbor set for k-NN.
    pub fn region_cut(&self, outcome: &SolveOutcome, tag: &str) -> Cut {
        match self {
            PredictorEncoding::Forest(f) => {
                let mut expr = LinExpr::new();
                let mut active = 0.0;
                for tree in &f.leaf_vars {
                    for &(_, l) in tree {
                        if outcome.value(l) > 0.5 {
                            expr.add_term(l, 1.0);
                            active += 1.0;
                        }
                    }
                }
                Cut {
                    name: format!("{tag}.leafcut"),
                    expr,
                    sense: Sense::Le,
                    rhs: active - 1.0,
                }
            }
            PredictorEncoding::Knn(k) => {
                let mut expr = LinExpr::new();
                let mut active = 0.0;
                for &l in &k.lambda {
                    if outcome.value(l) > 0.5 {
                        expr.add_term(l, 1.0);
                        active += 1.0;
                    }
                }
                Cut {
                    name: format!("{tag}.neighborcut"),
                    expr,
                    sense: Sense::Le,
                    rhs: active - 1.0,
                }
            }
        }
    }
}
