//! Typed feature schema for contexts, with distances and validation.
//!
//! Every other module consumes contexts through a [`FeatureSpace`]: an
//! ordered list of named features that are continuous (bounded reals),
//! discrete (bounded integers) or categorical (finite label sets).
//! Distances between contexts use a range-normalized l1 metric: numeric
//! features contribute `|a - b| / (upper - lower)` and categorical
//! features contribute `1` when the categories differ. This keeps the
//! metric scale-free across heterogeneous features.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Domain of a single feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureDomain {
    /// Real-valued, bounded. Requires `lower < upper`.
    Continuous { lower: f64, upper: f64 },
    /// Integer-valued, bounded. Requires `lower <= upper`.
    Discrete { lower: i64, upper: i64 },
    /// Finite set of labels, at least two.
    Categorical { categories: Vec<String> },
}

/// One named feature with its domain and actionability flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub domain: FeatureDomain,
    /// Whether explanations may change this feature. Immutable features
    /// are frozen by equality constraints in explanation models.
    pub mutable: bool,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            domain: FeatureDomain::Continuous { lower, upper },
            mutable: true,
        }
    }

    pub fn discrete(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        FeatureSpec {
            name: name.into(),
            domain: FeatureDomain::Discrete { lower, upper },
            mutable: true,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        FeatureSpec {
            name: name.into(),
            domain: FeatureDomain::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
            mutable: true,
        }
    }

    pub fn immutable(mut self) -> Self {
        self.mutable = false;
        self
    }

    /// Width of the numeric range; `None` for categorical features.
    pub fn range(&self) -> Option<f64> {
        match &self.domain {
            FeatureDomain::Continuous { lower, upper } => Some(upper - lower),
            FeatureDomain::Discrete { lower, upper } => Some((upper - lower) as f64),
            FeatureDomain::Categorical { .. } => None,
        }
    }

    /// Largest possible contribution of this feature to the normalized
    /// l1 distance between two valid contexts.
    fn max_distance_contribution(&self) -> f64 {
        match &self.domain {
            FeatureDomain::Continuous { .. } => 1.0,
            FeatureDomain::Discrete { lower, upper } => {
                if upper > lower {
                    1.0
                } else {
                    0.0
                }
            }
            FeatureDomain::Categorical { .. } => 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        match &self.domain {
            FeatureDomain::Continuous { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(Error::invalid(format!(
                        "feature '{}': continuous bounds must satisfy lower < upper, got [{lower}, {upper}]",
                        self.name
                    )));
                }
            }
            FeatureDomain::Discrete { lower, upper } => {
                if lower > upper {
                    return Err(Error::invalid(format!(
                        "feature '{}': discrete bounds must satisfy lower <= upper, got [{lower}, {upper}]",
                        self.name
                    )));
                }
            }
            FeatureDomain::Categorical { categories } => {
                if categories.len() < 2 {
                    return Err(Error::invalid(format!(
                        "feature '{}': categorical features need at least 2 categories",
                        self.name
                    )));
                }
                let mut seen = std::collections::HashSet::new();
                for c in categories {
                    if !seen.insert(c) {
                        return Err(Error::invalid(format!(
                            "feature '{}': duplicate category '{c}'",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ordered schema of all features; the domain of every context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    specs: Vec<FeatureSpec>,
}

impl FeatureSpace {
    pub fn new(specs: Vec<FeatureSpec>) -> Result<Self> {
        let mut names = std::collections::HashSet::new();
        for spec in &specs {
            spec.check()?;
            if !names.insert(spec.name.clone()) {
                return Err(Error::invalid(format!("duplicate feature name '{}'", spec.name)));
            }
        }
        Ok(FeatureSpace { specs })
    }

    /// Space of `d` continuous features named `x1..xd`, all on `[lower, upper]`.
    pub fn continuous_box(d: usize, lower: f64, upper: f64) -> Result<Self> {
        FeatureSpace::new(
            (1..=d)
                .map(|j| FeatureSpec::continuous(format!("x{j}"), lower, upper))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn spec(&self, idx: usize) -> &FeatureSpec {
        &self.specs[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// Checks a context against the schema; violations are data, not errors.
    pub fn validate(&self, x: &ContextVector) -> Vec<Violation> {
        let mut out = Vec::new();
        if x.values.len() != self.specs.len() {
            out.push(Violation {
                feature: "<dimension>".to_string(),
                message: format!(
                    "context has {} values but space has {} features",
                    x.values.len(),
                    self.specs.len()
                ),
            });
            return out;
        }
        for (spec, value) in self.specs.iter().zip(&x.values) {
            match (&spec.domain, value) {
                (FeatureDomain::Continuous { lower, upper }, FeatureValue::Continuous(v)) => {
                    if !v.is_finite() {
                        out.push(Violation::new(&spec.name, format!("{v} is not finite")));
                    } else if v < lower {
                        out.push(Violation::new(&spec.name, format!("{v} below lower bound {lower}")));
                    } else if v > upper {
                        out.push(Violation::new(&spec.name, format!("{v} above upper bound {upper}")));
                    }
                }
                (FeatureDomain::Discrete { lower, upper }, FeatureValue::Discrete(v)) => {
                    if v < lower {
                        out.push(Violation::new(&spec.name, format!("{v} below lower bound {lower}")));
                    } else if v > upper {
                        out.push(Violation::new(&spec.name, format!("{v} above upper bound {upper}")));
                    }
                }
                (FeatureDomain::Categorical { categories }, FeatureValue::Categorical(c)) => {
                    if *c >= categories.len() {
                        out.push(Violation::new(
                            &spec.name,
                            format!("category index {c} out of range ({} categories)", categories.len()),
                        ));
                    }
                }
                (_, v) => {
                    out.push(Violation::new(
                        &spec.name,
                        format!("value kind {:?} does not match feature kind", v),
                    ));
                }
            }
        }
        out
    }

    /// Errors if the context is invalid for this space.
    pub fn require_valid(&self, x: &ContextVector) -> Result<()> {
        let violations = self.validate(x);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidContext(
                violations
                    .iter()
                    .map(|v| format!("{}: {}", v.feature, v.message))
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    /// Range-normalized l1 distance between two valid contexts.
    pub fn l1_distance(&self, a: &ContextVector, b: &ContextVector) -> Result<f64> {
        self.require_valid(a)?;
        self.require_valid(b)?;
        Ok(self.l1_distance_unchecked(a, b))
    }

    /// Same as [`FeatureSpace::l1_distance`] without validation; used in
    /// inner loops where contexts are known valid.
    pub fn l1_distance_unchecked(&self, a: &ContextVector, b: &ContextVector) -> f64 {
        self.specs
            .iter()
            .zip(a.values.iter().zip(&b.values))
            .map(|(spec, (va, vb))| match (va, vb) {
                (FeatureValue::Continuous(x), FeatureValue::Continuous(y)) => {
                    (x - y).abs() / spec.range().unwrap()
                }
                (FeatureValue::Discrete(x), FeatureValue::Discrete(y)) => {
                    let range = spec.range().unwrap();
                    if range == 0.0 {
                        0.0
                    } else {
                        (x - y).abs() as f64 / range
                    }
                }
                (FeatureValue::Categorical(x), FeatureValue::Categorical(y)) => {
                    if x == y {
                        0.0
                    } else {
                        1.0
                    }
                }
                _ => unreachable!("validated contexts have matching kinds"),
            })
            .sum()
    }

    /// Maximum possible l1 distance between two valid contexts: one per
    /// continuous/discrete feature (after range normalization) plus one
    /// per categorical feature.
    pub fn l1_diameter(&self) -> f64 {
        self.specs.iter().map(|s| s.max_distance_contribution()).sum()
    }

    /// Dimension of the normalized numeric embedding (one coordinate per
    /// numeric feature, one per category of each categorical feature).
    pub fn embedding_dim(&self) -> usize {
        self.specs
            .iter()
            .map(|s| match &s.domain {
                FeatureDomain::Categorical { categories } => categories.len(),
                _ => 1,
            })
            .sum()
    }

    /// Embeds a context into a numeric vector: numeric features divided by
    /// their range, categorical features one-hot encoded. Differences of
    /// embeddings are what the correlation metric operates on.
    pub fn embed(&self, x: &ContextVector) -> Result<Vec<f64>> {
        self.require_valid(x)?;
        let mut out = Vec::with_capacity(self.embedding_dim());
        for (spec, value) in self.specs.iter().zip(&x.values) {
            match (&spec.domain, value) {
                (FeatureDomain::Continuous { .. }, FeatureValue::Continuous(v)) => {
                    out.push(v / spec.range().unwrap());
                }
                (FeatureDomain::Discrete { .. }, FeatureValue::Discrete(v)) => {
                    let range = spec.range().unwrap();
                    out.push(if range == 0.0 { 0.0 } else { *v as f64 / range });
                }
                (FeatureDomain::Categorical { categories }, FeatureValue::Categorical(c)) => {
                    for k in 0..categories.len() {
                        out.push(if k == *c { 1.0 } else { 0.0 });
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(out)
    }
}

/// One schema violation, reported per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature: String,
    pub message: String,
}

impl Violation {
    fn new(feature: &str, message: String) -> Self {
        Violation { feature: feature.to_string(), message }
    }
}

/// Value of one feature. Categorical values are stored as indices into
/// the spec's category list; the io layer maps labels at the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Continuous(f64),
    Discrete(i64),
    Categorical(usize),
}

impl FeatureValue {
    /// Numeric view used by tree routing and distance code.
    pub fn as_f64(&self) -> f64 {
        match self {
            FeatureValue::Continuous(v) => *v,
            FeatureValue::Discrete(v) => *v as f64,
            FeatureValue::Categorical(c) => *c as f64,
        }
    }
}

/// A point of the feature space: one value per spec, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    values: Vec<FeatureValue>,
}

impl ContextVector {
    /// Builds and validates a context against its space.
    pub fn new(space: &FeatureSpace, values: Vec<FeatureValue>) -> Result<Self> {
        let x = ContextVector { values };
        space.require_valid(&x)?;
        Ok(x)
    }

    /// Builds a context without validating; callers must know it is valid.
    pub fn from_values(values: Vec<FeatureValue>) -> Self {
        ContextVector { values }
    }

    /// All-continuous helper: one f64 per feature.
    pub fn from_f64s(space: &FeatureSpace, values: &[f64]) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                what: "context",
                expected: space.dim(),
                got: values.len(),
            });
        }
        let vals = space
            .specs()
            .iter()
            .zip(values)
            .map(|(spec, &v)| match &spec.domain {
                FeatureDomain::Continuous { .. } => Ok(FeatureValue::Continuous(v)),
                FeatureDomain::Discrete { .. } => Ok(FeatureValue::Discrete(v.round() as i64)),
                FeatureDomain::Categorical { .. } => Err(Error::invalid(format!(
                    "feature '{}' is categorical; cannot build from f64",
                    spec.name
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        ContextVector::new(space, vals)
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> &FeatureValue {
        &self.values[idx]
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_space(d: usize) -> FeatureSpace {
        FeatureSpace::continuous_box(d, 0.0, 1.0).unwrap()
    }

    fn ctx(space: &FeatureSpace, vals: &[f64]) -> ContextVector {
        ContextVector::from_f64s(space, vals).unwrap()
    }

    #[test]
    fn validate_interior_point_ok() {
        let space = unit_space(1);
        assert!(space.validate(&ctx(&space, &[0.5])).is_empty());
    }

    #[test]
    fn validate_reports_bound_breach() {
        let space = unit_space(1);
        let x = ContextVector::from_values(vec![FeatureValue::Continuous(1.5)]);
        let violations = space.validate(&x);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].feature, "x1");
        assert!(violations[0].message.contains("above upper"));
    }

    #[test]
    fn validate_rejects_unknown_category() {
        let space = FeatureSpace::new(vec![FeatureSpec::categorical(
            "period",
            ["AM", "Midday", "PM"],
        )])
        .unwrap();
        // "Night" would map to an out-of-range index at the io boundary.
        let x = ContextVector::from_values(vec![FeatureValue::Categorical(3)]);
        let violations = space.validate(&x);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].feature, "period");
    }

    #[test]
    fn l1_identity_is_zero() {
        let space = unit_space(3);
        let a = ctx(&space, &[0.1, 0.5, 0.9]);
        assert_eq!(space.l1_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn l1_single_category_change_is_one() {
        let space = FeatureSpace::new(vec![FeatureSpec::categorical(
            "period",
            ["AM", "Midday", "PM"],
        )])
        .unwrap();
        let a = ContextVector::new(&space, vec![FeatureValue::Categorical(0)]).unwrap();
        let b = ContextVector::new(&space, vec![FeatureValue::Categorical(1)]).unwrap();
        assert_eq!(space.l1_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn l1_normalizes_by_range() {
        // Two continuous features on [0,10]: (0,0) vs (5,10) -> 0.5 + 1.0.
        let space = FeatureSpace::continuous_box(2, 0.0, 10.0).unwrap();
        let a = ctx(&space, &[0.0, 0.0]);
        let b = ctx(&space, &[5.0, 10.0]);
        assert!((space.l1_distance(&a, &b).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn diameter_counts_feature_maxima() {
        assert_eq!(unit_space(1).l1_diameter(), 1.0);
        assert_eq!(unit_space(4).l1_diameter(), 4.0);
        let mixed = FeatureSpace::new(vec![
            FeatureSpec::continuous("a", 0.0, 2.0),
            FeatureSpec::continuous("b", -1.0, 1.0),
            FeatureSpec::categorical("c", ["u", "v"]),
        ])
        .unwrap();
        assert_eq!(mixed.l1_diameter(), 3.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FeatureSpace::new(vec![FeatureSpec::continuous("a", 1.0, 1.0)]).is_err());
        assert!(FeatureSpace::new(vec![FeatureSpec::categorical("a", ["only"])]).is_err());
        assert!(FeatureSpace::new(vec![
            FeatureSpec::continuous("a", 0.0, 1.0),
            FeatureSpec::continuous("a", 0.0, 1.0),
        ])
        .is_err());
    }

    fn arb_mixed_context() -> impl Strategy<Value = (ContextVector, ContextVector, ContextVector)> {
        // Fixed mixed space: 2 continuous on [0,4], 1 discrete on [-2,3], 1 categorical(3).
        let point = (
            0.0..=4.0f64,
            0.0..=4.0f64,
            -2i64..=3,
            0usize..3,
        )
            .prop_map(|(a, b, d, c)| {
                ContextVector::from_values(vec![
                    FeatureValue::Continuous(a),
                    FeatureValue::Continuous(b),
                    FeatureValue::Discrete(d),
                    FeatureValue::Categorical(c),
                ])
            });
        (point.clone(), point.clone(), point)
    }

    fn mixed_space() -> FeatureSpace {
        FeatureSpace::new(vec![
            FeatureSpec::continuous("a", 0.0, 4.0),
            FeatureSpec::continuous("b", 0.0, 4.0),
            FeatureSpec::discrete("d", -2, 3),
            FeatureSpec::categorical("c", ["u", "v", "w"]),
        ])
        .unwrap()
    }

    proptest! {
        #[test]
        fn l1_is_a_metric((a, b, c) in arb_mixed_context()) {
            let space = mixed_space();
            let dab = space.l1_distance(&a, &b).unwrap();
            let dba = space.l1_distance(&b, &a).unwrap();
            let dac = space.l1_distance(&a, &c).unwrap();
            let dcb = space.l1_distance(&c, &b).unwrap();
            // symmetry, nonnegativity, identity, triangle inequality
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert!(dab >= 0.0);
            if a == b {
                prop_assert_eq!(dab, 0.0);
            } else {
                prop_assert!(dab > 0.0);
            }
            prop_assert!(dab <= dac + dcb + 1e-12);
        }

        #[test]
        fn l1_bounded_by_diameter((a, b, _) in arb_mixed_context()) {
            let space = mixed_space();
            let d = space.l1_distance(&a, &b).unwrap();
            prop_assert!(d <= space.l1_diameter() + 1e-12);
        }
    }
}
