//! Edge schedule: a queue of node-disjoint edge rounds.
//!
//! Edges of one round share no endpoint, so their updates touch disjoint
//! state and can run concurrently. Rounds are peeled off the edge pool with
//! a greedy maximal matching until the pool is empty.

use crate::model::GraphicalModel;
use serde::Serialize;

/// Name recorded in output metadata for the pool order used by [`compute_schedule`].
pub const POOL_ORDER: &str = "lexicographic";

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EdgeSchedule {
    /// Each round is a list of edge indices into the model.
    pub rounds: Vec<Vec<usize>>,
}

impl EdgeSchedule {
    pub fn num_edges(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    /// Edge indices in processing order (rounds concatenated).
    pub fn edge_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.rounds.iter().flatten().copied()
    }

    /// Checks the matching property, non-empty rounds, and that the rounds
    /// cover `edges` exactly once.
    pub fn validate(&self, edges: &[(usize, usize)], num_nodes: usize) -> Result<(), String> {
        let mut seen = vec![false; edges.len()];
        let mut stamp = vec![usize::MAX; num_nodes];
        for (r, round) in self.rounds.iter().enumerate() {
            if round.is_empty() {
                return Err(format!("round {r} is empty"));
            }
            for &e in round {
                let &(u, v) = edges.get(e).ok_or_else(|| format!("edge index {e} out of range"))?;
                if std::mem::replace(&mut seen[e], true) {
                    return Err(format!("edge {e} scheduled twice"));
                }
                for node in [u, v] {
                    if std::mem::replace(&mut stamp[node], r) == r {
                        return Err(format!("node {node} appears twice in round {r}"));
                    }
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(e) => Err(format!("edge {e} never scheduled")),
            None => Ok(()),
        }
    }
}

/// Scans `edges` in order, taking an edge iff neither endpoint is taken yet.
/// Returns positions into `edges`: (matched, remaining), both in scan order.
pub fn greedy_matching(edges: &[(usize, usize)], num_nodes: usize) -> (Vec<usize>, Vec<usize>) {
    let mut used = vec![false; num_nodes];
    let mut matched = Vec::new();
    let mut remaining = Vec::new();
    for (i, &(u, v)) in edges.iter().enumerate() {
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            matched.push(i);
        } else {
            remaining.push(i);
        }
    }
    (matched, remaining)
}

/// Repeatedly extracts greedy matchings from the pool of all edges, taken in
/// lexicographic `(u, v)` order, until the pool is empty.
pub fn compute_schedule(model: &GraphicalModel) -> EdgeSchedule {
    let edges = model.edges();
    let mut pool: Vec<usize> = (0..edges.len()).collect();
    pool.sort_by_key(|&e| edges[e]);
    let mut rounds = Vec::new();
    while !pool.is_empty() {
        let pairs: Vec<(usize, usize)> = pool.iter().map(|&e| edges[e]).collect();
        let (matched, remaining) = greedy_matching(&pairs, model.num_nodes());
        rounds.push(matched.iter().map(|&i| pool[i]).collect());
        pool = remaining.iter().map(|&i| pool[i]).collect();
    }
    EdgeSchedule { rounds }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleStats {
    pub rounds: usize,
    pub max_width: usize,
    pub mean_width: f64,
}

pub fn schedule_stats(schedule: &EdgeSchedule) -> ScheduleStats {
    let rounds = schedule.rounds.len();
    let max_width = schedule.rounds.iter().map(Vec::len).max().unwrap_or(0);
    let mean_width = if rounds == 0 {
        0.0
    } else {
        schedule.num_edges() as f64 / rounds as f64
    };
    ScheduleStats {
        rounds,
        max_width,
        mean_width,
    }
}
