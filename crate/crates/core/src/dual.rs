//! Dual lower bound and optimality diagnostics.
//!
//! The dual of a reparametrized state is the sum of all node minima and edge
//! minima. It never exceeds the energy of any labeling. The diagnostics here
//! check the local optimality conditions that dual ascent drives toward:
//! block optimality of single edges, and node-edge agreement (arc
//! consistency of the locally minimal labels and label pairs) of the whole
//! graph, together with the smallest slack `ε` at which agreement holds.

use crate::model::{min_of, ReparamState};

/// Default absolute tolerance for minimizer membership.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `Σ_u min θ_u + Σ_uv min θ_uv`, summed nodes first then edges, in index order.
pub fn dual_value(state: &ReparamState) -> f64 {
    let nodes: f64 = state.unary.iter().map(|u| min_of(u)).sum();
    let edges: f64 = state.pairwise.iter().map(|p| p.min()).sum();
    state.constant_offset + nodes + edges
}

/// Dual restricted to one edge block: `min θ_uv + min θ_u + min θ_v`.
pub fn restricted_dual(state: &ReparamState, edge: usize) -> f64 {
    let (u, v) = state.edges[edge];
    state.pairwise[edge].min() + min_of(&state.unary[u]) + min_of(&state.unary[v])
}

/// True iff some `(s,t)` is simultaneously a `tol`-minimizer of `θ_u`, of
/// `θ_v` and of `θ_uv`.
pub fn is_block_optimal(state: &ReparamState, edge: usize, tol: f64) -> bool {
    let (u, v) = state.edges[edge];
    let (cu, cv, p) = (&state.unary[u], &state.unary[v], &state.pairwise[edge]);
    let (mu, mv, mp) = (min_of(cu), min_of(cv), p.min());
    cu.iter().enumerate().filter(|(_, &x)| x <= mu + tol).any(|(s, _)| {
        cv.iter()
            .enumerate()
            .any(|(t, &y)| y <= mv + tol && p.get(s, t) <= mp + tol)
    })
}

/// Labels and label pairs within `eps` of their local minimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSets {
    pub edges: Vec<(usize, usize)>,
    /// Per node, one flag per label.
    pub nodes: Vec<Vec<bool>>,
    /// Per edge, row-major flags over `|Y_u| × |Y_v|`.
    pub pairs: Vec<Vec<bool>>,
}

pub fn support_sets(state: &ReparamState, eps: f64) -> SupportSets {
    let mask = |values: &[f64]| {
        let m = min_of(values);
        values.iter().map(|&x| x - m <= eps).collect::<Vec<bool>>()
    };
    SupportSets {
        edges: state.edges.clone(),
        nodes: state.unary.iter().map(|u| mask(u)).collect(),
        pairs: state.pairwise.iter().map(|p| mask(p.as_slice())).collect(),
    }
}

/// Arc-consistency closure of `sets`, in place. Returns whether every node
/// and every edge keeps at least one marked entry.
///
/// Deletes marked pairs with an unmarked endpoint, and marked labels that
/// lack a marked pair in some incident edge, until nothing changes. Labels
/// are visited in ascending node order, then ascending label.
pub fn arc_consistency_closure(sets: &mut SupportSets) -> bool {
    let n = sets.nodes.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(u, v)) in sets.edges.iter().enumerate() {
        incident[u].push(e);
        incident[v].push(e);
    }
    loop {
        let mut changed = false;
        for (e, &(u, v)) in sets.edges.iter().enumerate() {
            let cols = sets.nodes[v].len();
            for (i, flag) in sets.pairs[e].iter_mut().enumerate() {
                if *flag && !(sets.nodes[u][i / cols] && sets.nodes[v][i % cols]) {
                    *flag = false;
                    changed = true;
                }
            }
        }
        for node in 0..n {
            for label in 0..sets.nodes[node].len() {
                if !sets.nodes[node][label] {
                    continue;
                }
                let supported = incident[node].iter().all(|&e| {
                    let (u, v) = sets.edges[e];
                    let cols = sets.nodes[v].len();
                    let pairs = &sets.pairs[e];
                    if u == node {
                        pairs[label * cols..(label + 1) * cols].iter().any(|&f| f)
                    } else {
                        (0..sets.nodes[u].len()).any(|s| pairs[s * cols + label])
                    }
                });
                if !supported {
                    sets.nodes[node][label] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    sets.nodes.iter().all(|m| m.iter().any(|&f| f)) && sets.pairs.iter().all(|m| m.iter().any(|&f| f))
}

/// Whether the support sets admit node-edge agreement.
pub fn has_node_edge_agreement(sets: &SupportSets) -> bool {
    arc_consistency_closure(&mut sets.clone())
}

/// Smallest slack `ε` such that the `ε`-support sets admit node-edge agreement.
///
/// Agreement can only change where `ε` crosses a slack value `θ(x) - min θ`,
/// so the search runs over that finite set and the result is exact.
pub fn tolerance_factor(state: &ReparamState) -> f64 {
    let mut slacks: Vec<f64> = Vec::new();
    for u in &state.unary {
        let m = min_of(u);
        slacks.extend(u.iter().map(|&x| x - m));
    }
    for p in &state.pairwise {
        let m = p.min();
        slacks.extend(p.as_slice().iter().map(|&x| x - m));
    }
    if slacks.is_empty() {
        return 0.0;
    }
    slacks.sort_by(f64::total_cmp);
    slacks.dedup();
    // Every entry is marked at the largest slack, so agreement holds there.
    let (mut lo, mut hi) = (0usize, slacks.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if has_node_edge_agreement(&support_sets(state, slacks[mid])) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    slacks[lo]
}
