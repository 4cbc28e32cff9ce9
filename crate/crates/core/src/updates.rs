//! Edge-wise block-coordinate-ascent updates.
//!
//! Every update first folds both endpoint unaries into the pairwise table,
//! forming the aggregated cost `g(s,t) = θ_u(s) + θ_v(t) + θ_uv(s,t)`, then
//! redistributes `g` into new unaries and a residual pairwise table whose
//! minimum is zero. The rules differ only in how much cost they pull back
//! into the unaries:
//!
//! * [`Rule::Uniform`]: both unaries become the constant `½ min g`.
//! * [`Rule::Mplp`]: half of each row minimum goes to `u`, half of each column
//!   minimum goes to `v`.
//! * [`Rule::MplpPlusPlus`]: the handshake. Starting from the MPLP share of
//!   `u`, `v` takes everything left in each column, then `u` takes everything
//!   left in each row, so every row and column of the residual has minimum 0.
//!
//! One pass over a pairwise table computing a min-message counts as one
//! oracle call: 1 for uniform, 2 for MPLP, 3 for MPLP++.

use crate::error::ModelError;
use crate::model::{min_of, ReparamState, Table};
use std::fmt;
use std::str::FromStr;

/// BCA update rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Rule {
    #[serde(rename = "u")]
    Uniform,
    #[serde(rename = "m")]
    Mplp,
    #[serde(rename = "h")]
    MplpPlusPlus,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Uniform, Rule::Mplp, Rule::MplpPlusPlus];

    /// Oracle calls spent per edge update.
    pub fn oracle_cost(self) -> u64 {
        match self {
            Rule::Uniform => 1,
            Rule::Mplp => 2,
            Rule::MplpPlusPlus => 3,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Rule::Uniform => "u",
            Rule::Mplp => "m",
            Rule::MplpPlusPlus => "h",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "u" | "uniform" => Ok(Rule::Uniform),
            "m" | "mplp" => Ok(Rule::Mplp),
            "h" | "mplp++" | "mplppp" | "handshake" => Ok(Rule::MplpPlusPlus),
            other => Err(format!("unknown rule '{other}' (expected u, m or h)")),
        }
    }
}

/// Message direction along an edge `(u, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `v → u`: result indexed by labels of `u`, minimizing over rows.
    ToU,
    /// `u → v`: result indexed by labels of `v`, minimizing over columns.
    ToV,
}

#[inline]
fn message_to_u(table: &Table, addend: impl Fn(usize) -> f64, out: &mut [f64]) {
    for (s, o) in out.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        for (t, &x) in table.row(s).iter().enumerate() {
            best = best.min(x + addend(t));
        }
        *o = best;
    }
}

#[inline]
fn message_to_v(table: &Table, addend: impl Fn(usize) -> f64, out: &mut [f64]) {
    out.fill(f64::INFINITY);
    for s in 0..table.rows() {
        let a = addend(s);
        for (o, &x) in out.iter_mut().zip(table.row(s)) {
            *o = o.min(x + a);
        }
    }
}

/// Min-message over one pairwise table; one oracle call.
///
/// `ToU` returns `min_t [pairwise(s,t) + addend(t)]` for every `s`; `ToV`
/// returns `min_s [pairwise(s,t) + addend(s)]` for every `t`.
pub fn pass_message(pairwise: &Table, addend: &[f64], direction: Direction) -> Result<Vec<f64>, ModelError> {
    let (expected, out_len) = match direction {
        Direction::ToU => (pairwise.cols(), pairwise.rows()),
        Direction::ToV => (pairwise.rows(), pairwise.cols()),
    };
    if addend.len() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            found: addend.len(),
        });
    }
    let mut out = vec![0.0; out_len];
    match direction {
        Direction::ToU => message_to_u(pairwise, |t| addend[t], &mut out),
        Direction::ToV => message_to_v(pairwise, |s| addend[s], &mut out),
    }
    Ok(out)
}

/// Runs `rule` in place on one edge block and returns the oracle calls spent.
///
/// On return `unary_u`, `unary_v` hold the new unaries and `pairwise` the
/// residual `g - unary_u - unary_v`.
pub(crate) fn update_block(unary_u: &mut [f64], unary_v: &mut [f64], pairwise: &mut Table, rule: Rule) -> u64 {
    debug_assert_eq!(unary_u.len(), pairwise.rows());
    debug_assert_eq!(unary_v.len(), pairwise.cols());

    // pairwise <- g
    for (s, &a) in unary_u.iter().enumerate() {
        for (x, &b) in pairwise.row_mut(s).iter_mut().zip(unary_v.iter()) {
            *x += a + b;
        }
    }
    let g = &*pairwise;

    match rule {
        Rule::Uniform => {
            let half = 0.5 * g.min();
            unary_u.fill(half);
            unary_v.fill(half);
        }
        Rule::Mplp => {
            message_to_u(g, |_| 0.0, unary_u);
            message_to_v(g, |_| 0.0, unary_v);
            unary_u.iter_mut().for_each(|x| *x *= 0.5);
            unary_v.iter_mut().for_each(|x| *x *= 0.5);
        }
        Rule::MplpPlusPlus => {
            message_to_u(g, |_| 0.0, unary_u);
            unary_u.iter_mut().for_each(|x| *x *= 0.5);
            message_to_v(g, |s| -unary_u[s], unary_v);
            message_to_u(g, |t| -unary_v[t], unary_u);
        }
    }

    for (s, &a) in unary_u.iter().enumerate() {
        for (x, &b) in pairwise.row_mut(s).iter_mut().zip(unary_v.iter()) {
            *x = *x - a - b;
        }
    }
    rule.oracle_cost()
}

/// Aggregated edge cost `g(s,t) = θ_u(s) + θ_v(t) + θ_uv(s,t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedEdgeCost {
    pub g: Table,
}

impl AggregatedEdgeCost {
    pub fn new(g: Table) -> Self {
        AggregatedEdgeCost { g }
    }

    /// Materializes `g` for `edge` from the current state.
    pub fn from_state(state: &ReparamState, edge: usize) -> Self {
        let (u, v) = state.edges()[edge];
        Self::from_parts(state.unary(u), state.unary(v), state.pairwise(edge))
    }

    pub fn from_parts(unary_u: &[f64], unary_v: &[f64], pairwise: &Table) -> Self {
        let mut g = pairwise.clone();
        for (s, &a) in unary_u.iter().enumerate() {
            for (x, &b) in g.row_mut(s).iter_mut().zip(unary_v) {
                *x += a + b;
            }
        }
        AggregatedEdgeCost { g }
    }
}

/// Output of a reparametrization mapping applied to an aggregated cost.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateResult {
    pub new_unary_u: Vec<f64>,
    pub new_unary_v: Vec<f64>,
    pub new_pairwise: Table,
    pub oracle_calls: u64,
}

/// Applies `rule` to a materialized aggregate.
pub fn update(g: &AggregatedEdgeCost, rule: Rule) -> UpdateResult {
    let mut new_unary_u = vec![0.0; g.g.rows()];
    let mut new_unary_v = vec![0.0; g.g.cols()];
    let mut new_pairwise = g.g.clone();
    let oracle_calls = update_block(&mut new_unary_u, &mut new_unary_v, &mut new_pairwise, rule);
    UpdateResult {
        new_unary_u,
        new_unary_v,
        new_pairwise,
        oracle_calls,
    }
}

pub fn update_uniform(g: &AggregatedEdgeCost) -> UpdateResult {
    update(g, Rule::Uniform)
}

pub fn update_mplp(g: &AggregatedEdgeCost) -> UpdateResult {
    update(g, Rule::Mplp)
}

pub fn update_mplppp(g: &AggregatedEdgeCost) -> UpdateResult {
    update(g, Rule::MplpPlusPlus)
}

/// Applies `rule` to `edge` of `state` in place; returns oracle calls spent.
pub fn apply_update(state: &mut ReparamState, edge: usize, rule: Rule) -> u64 {
    let (u, v) = state.edges[edge];
    debug_assert!(u < v);
    let (lo, hi) = state.unary.split_at_mut(v);
    update_block(&mut lo[u], &mut hi[0], &mut state.pairwise[edge], rule)
}

/// Componentwise `a ≥ b - tol` on both new unaries.
pub fn dominates(a: &UpdateResult, b: &UpdateResult, tol: f64) -> bool {
    let ge = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| *p >= *q - tol);
    ge(&a.new_unary_u, &b.new_unary_u) && ge(&a.new_unary_v, &b.new_unary_v)
}

/// Row and column minima of a residual table.
pub fn row_col_minima(table: &Table) -> (Vec<f64>, Vec<f64>) {
    let rows = (0..table.rows()).map(|s| min_of(table.row(s))).collect();
    let mut cols = vec![0.0; table.cols()];
    message_to_v(table, |_| 0.0, &mut cols);
    (rows, cols)
}
