//! Flow-based MIP expressions for the CVaR of two fixed decisions whose
//! sample weights are model variables.
//!
//! For the alternative decision the tail is tracked exactly: samples are
//! pre-sorted by decreasing loss, flow variables carry the weight mass
//! admitted into the tail, and ordered binaries locate the boundary atom,
//! which the constraints split exactly. For the prescribed decision only
//! the flow variables are kept: any feasible flow under-estimates its
//! CVaR, which keeps the relative criterion sound while the solver can
//! always exhibit the exact value. The big-M constant is the predictor's
//! weight upper bound.

use crate::milp::{LinExpr, Model, Sense, VarId};
use crate::{Error, Result};

/// Handles of one CVaR criterion encoding.
pub struct CvarPair {
    /// `(1/(1-alpha)) * sum_i f_i * loss_alt[tau(i)]` — exact CVaR of the
    /// alternative decision.
    pub cvar_alt: LinExpr,
    /// Flow relaxation of the prescribed decision's CVaR (a lower bound
    /// attaining the true value).
    pub cvar_star: LinExpr,
    pub theta: Vec<VarId>,
    pub flows_alt: Vec<VarId>,
    pub flows_star: Vec<VarId>,
}

/// Sorts sample indices by decreasing loss, ties toward lower index.
fn tail_order(losses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    order
}

/// Builds both CVaR blocks over the weight variables. The caller adds the
/// relative criterion `cvar_alt <= cvar_star` (or uses the expressions in
/// an objective).
pub fn encode_cvar_pair(
    model: &mut Model,
    weights: &[VarId],
    losses_alt: &[f64],
    losses_star: &[f64],
    alpha: f64,
    w_max: f64,
    tag: &str,
) -> Result<CvarPair> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must be in [0, 1), got {alpha}")));
    }
    if !(w_max > 0.0) {
        return Err(Error::invalid("w_max must be positive"));
    }
    let n = weights.len();
    if losses_alt.len() != n || losses_star.len() != n {
        return Err(Error::DimensionMismatch {
            what: "cvar losses vs weights",
            expected: n,
            got: losses_alt.len().min(losses_star.len()),
        });
    }
    let tail = 1.0 - alpha;
    let order_alt = tail_order(losses_alt);
    let order_star = tail_order(losses_star);

    // --- alternative decision: exact tail tracking -----------------------
    let flows_alt: Vec<VarId> = (0..n)
        .map(|p| model.add_continuous(format!("{tag}.f{p}"), 0.0, w_max))
        .collect::<Result<_>>()?;
    let theta: Vec<VarId> = (0..n)
        .map(|p| model.add_binary(format!("{tag}.th{p}")))
        .collect::<Result<_>>()?;
    let mut mass = LinExpr::new();
    for (p, &f) in flows_alt.iter().enumerate() {
        let s = order_alt[p];
        mass.add_term(f, 1.0);
        // f_p <= w_{tau(p)}
        let mut cap = LinExpr::term(f, 1.0);
        cap.add_term(weights[s], -1.0);
        model.add_constraint(format!("{tag}.cap{p}"), cap, Sense::Le, 0.0)?;
        // w_{tau(p)} - W (1 - theta_p) <= f_p
        let mut lower = LinExpr::term(weights[s], 1.0);
        lower.add_term(theta[p], w_max).add_term(f, -1.0);
        model.add_constraint(format!("{tag}.low{p}"), lower, Sense::Le, w_max)?;
        // f_p <= W theta_{p-1}; theta before the first position is one,
        // so p = 0 reduces to the variable bound
        if p > 0 {
            let mut upper = LinExpr::term(f, 1.0);
            upper.add_term(theta[p - 1], -w_max);
            model.add_constraint(format!("{tag}.upp{p}"), upper, Sense::Le, 0.0)?;
        }
    }
    model.add_constraint(format!("{tag}.mass"), mass, Sense::Eq, tail)?;
    for p in 0..n.saturating_sub(1) {
        // theta_p >= theta_{p+1}
        let mut ord = LinExpr::term(theta[p], 1.0);
        ord.add_term(theta[p + 1], -1.0);
        model.add_constraint(format!("{tag}.ord{p}"), ord, Sense::Ge, 0.0)?;
        // prefix inequality: cumulative flows are nondecreasing
        let prefix = LinExpr::term(flows_alt[p + 1], -1.0);
        model.add_constraint(format!("{tag}.pre{p}"), prefix, Sense::Le, 0.0)?;
    }
    let mut cvar_alt = LinExpr::new();
    for (p, &f) in flows_alt.iter().enumerate() {
        cvar_alt.add_term(f, losses_alt[order_alt[p]] / tail);
    }

    // --- prescribed decision: flow relaxation, no binaries ---------------
    let flows_star: Vec<VarId> = (0..n)
        .map(|p| model.add_continuous(format!("{tag}.g{p}"), 0.0, w_max))
        .collect::<Result<_>>()?;
    let mut mass_star = LinExpr::new();
    for (p, &f) in flows_star.iter().enumerate() {
        let s = order_star[p];
        mass_star.add_term(f, 1.0);
        let mut cap = LinExpr::term(f, 1.0);
        cap.add_term(weights[s], -1.0);
        model.add_constraint(format!("{tag}.scap{p}"), cap, Sense::Le, 0.0)?;
    }
    model.add_constraint(format!("{tag}.smass"), mass_star, Sense::Eq, tail)?;
    let mut cvar_star = LinExpr::new();
    for (p, &f) in flows_star.iter().enumerate() {
        cvar_star.add_term(f, losses_star[order_star[p]] / tail);
    }

    Ok(CvarPair { cvar_alt, cvar_star, theta, flows_alt, flows_star })
}
