//! Counterfactual explanations for data-driven contextual stochastic optimization.
//!
//! This crate implements the full pipeline of weight-based prescriptive
//! analytics and its inverse, explanation:
//!
//! 1. **Predictors** ([`predictors`]): random-forest and k-nearest-neighbor
//!    models trained on historical `(context, outcome)` pairs. Instead of
//!    point predictions they produce *weights* over the historical samples.
//! 2. **Decisions** ([`problems`]): weighted sample-average-approximation
//!    solvers for a family of stochastic programs (multi-item newsvendor,
//!    two-stage shipment planning, grid shortest path, CVaR shortest path),
//!    all driven by the predictor weights.
//! 3. **Explanations** ([`explain`]): given a prescribed decision and an
//!    alternative decision, find the *nearest context* (in normalized l1
//!    distance) in which the alternative is as good as the prescription
//!    (a relative explanation) or globally optimal (an absolute
//!    explanation). Both are computed exactly with mixed-integer
//!    programming encodings of the predictor weight functions.
//! 4. **Benchmarks** ([`bench`]): synthetic instance generators and the
//!    evaluation metrics (correlation, sparsity) used to study explanation
//!    quality at scale.
//!
//! All mixed-integer models are built through the solver-agnostic modeling
//! layer in [`milp`], currently backed by the bundled HiGHS solver.
//!
//! See the `examples/` directory for one runnable program per capability,
//! starting with `examples/relative_explanation.rs`.

pub mod bench;
pub mod error;
pub mod explain;
pub mod feature_space;
pub mod io;
pub mod milp;
pub mod predictors;
pub mod problems;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
