//! The solve loop.
//!
//! One iteration applies the chosen update rule to every edge, following the
//! edge schedule round by round. In parallel mode the edges of a round are
//! split into contiguous chunks handed to a worker pool; the pool join at
//! the end of each round is the barrier. Edges of a round touch pairwise
//! disjoint unaries and tables, so both modes compute bit-identical states.

use crate::dual::dual_value;
use crate::model::{energy, init_reparam, GraphicalModel, Labeling, ReparamState, Table};
use crate::schedule::{compute_schedule, EdgeSchedule};
use crate::updates::{update_block, Rule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "seq")]
    Sequential,
    #[serde(rename = "par")]
    Parallel,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("num_workers must be at least 1")]
    NoWorkers,
    #[error("{0} must be a non-negative number")]
    Negative(&'static str),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub rule: Rule,
    pub mode: Mode,
    pub num_workers: usize,
    /// Hard cap on oracle calls divided by `|E|`.
    pub max_normalized_iterations: f64,
    /// Stop once `(D_t - D_{t-1}) / max(1, |D_t|)`, per iteration, drops below this.
    pub rel_improvement_threshold: f64,
    /// Normalized iterations between dual checkpoints; 0 checkpoints every iteration.
    pub checkpoint_every: f64,
    /// Recorded in outputs only.
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            rule: Rule::MplpPlusPlus,
            mode: Mode::Sequential,
            num_workers: 1,
            max_normalized_iterations: 1000.0,
            rel_improvement_threshold: 1e-8,
            checkpoint_every: 0.0,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_workers == 0 {
            return Err(ConfigError::NoWorkers);
        }
        let non_negative = |x: f64| x.is_finite() && x >= 0.0 || x == f64::INFINITY;
        if !non_negative(self.max_normalized_iterations) {
            return Err(ConfigError::Negative("max_normalized_iterations"));
        }
        if !non_negative(self.rel_improvement_threshold) {
            return Err(ConfigError::Negative("rel_improvement_threshold"));
        }
        if !non_negative(self.checkpoint_every) {
            return Err(ConfigError::Negative("checkpoint_every"));
        }
        Ok(())
    }
}

/// Runs rounds either inline or on a dedicated worker pool.
pub enum Executor {
    Sequential,
    Parallel { pool: rayon::ThreadPool, workers: usize },
}

impl Executor {
    pub fn new(mode: Mode, workers: usize) -> Result<Self, ConfigError> {
        match mode {
            Mode::Sequential => Ok(Executor::Sequential),
            Mode::Parallel => {
                let workers = workers.max(1);
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| ConfigError::Pool(e.to_string()))?;
                Ok(Executor::Parallel { pool, workers })
            }
        }
    }
}

struct EdgeTask<'a> {
    unary_u: &'a mut Vec<f64>,
    unary_v: &'a mut Vec<f64>,
    pairwise: &'a mut Table,
}

/// Mutable references to `slice[i]` for strictly increasing `sorted`.
fn disjoint_mut<'a, T>(mut slice: &'a mut [T], sorted: &[usize]) -> Vec<&'a mut T> {
    let mut out = Vec::with_capacity(sorted.len());
    let mut offset = 0;
    for &i in sorted {
        let rest = std::mem::take(&mut slice);
        let (item, tail) = rest[i - offset..].split_first_mut().expect("index in range");
        out.push(item);
        slice = tail;
        offset = i + 1;
    }
    out
}

/// Splits the state into one exclusive task per edge of a matching round.
fn round_tasks<'a>(state: &'a mut ReparamState, round: &[usize]) -> Vec<EdgeTask<'a>> {
    let mut nodes: Vec<usize> = round
        .iter()
        .flat_map(|&e| {
            let (u, v) = state.edges[e];
            [u, v]
        })
        .collect();
    nodes.sort_unstable();
    let mut edges = round.to_vec();
    edges.sort_unstable();
    assert!(
        nodes.windows(2).all(|w| w[0] < w[1]) && edges.windows(2).all(|w| w[0] < w[1]),
        "round is not a matching"
    );

    let endpoints: Vec<(usize, usize)> = round.iter().map(|&e| state.edges[e]).collect();
    let mut unary: Vec<Option<&mut Vec<f64>>> = disjoint_mut(&mut state.unary, &nodes).into_iter().map(Some).collect();
    let mut pairwise: Vec<Option<&mut Table>> =
        disjoint_mut(&mut state.pairwise, &edges).into_iter().map(Some).collect();
    let mut take_node = |n: usize| unary[nodes.binary_search(&n).unwrap()].take().unwrap();

    round
        .iter()
        .zip(endpoints)
        .map(|(&e, (u, v))| EdgeTask {
            unary_u: take_node(u),
            unary_v: take_node(v),
            pairwise: pairwise[edges.binary_search(&e).unwrap()].take().unwrap(),
        })
        .collect()
}

/// Applies `rule` once to every scheduled edge; returns oracle calls spent.
pub fn run_iteration(state: &mut ReparamState, schedule: &EdgeSchedule, rule: Rule, executor: &Executor) -> u64 {
    let mut calls = 0;
    for round in &schedule.rounds {
        match executor {
            Executor::Sequential => {
                for &e in round {
                    calls += crate::updates::apply_update(state, e, rule);
                }
            }
            Executor::Parallel { pool, workers } => {
                let mut tasks = round_tasks(state, round);
                let chunk = tasks.len().div_ceil(*workers).max(1);
                pool.install(|| {
                    tasks.par_chunks_mut(chunk).for_each(|chunk| {
                        for t in chunk {
                            update_block(t.unary_u, t.unary_v, t.pairwise, rule);
                        }
                    })
                });
                calls += rule.oracle_cost() * round.len() as u64;
            }
        }
    }
    calls
}

/// Greedy sequential rounding over reparametrized costs.
///
/// Nodes are labeled in ascending order; each takes the label minimizing its
/// unary plus the pairwise costs to already-labeled lower neighbors. Ties go
/// to the smallest label.
pub fn round_primal(state: &ReparamState) -> Labeling {
    let n = state.num_nodes();
    let mut lower: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(_, v)) in state.edges.iter().enumerate() {
        lower[v].push(e);
    }
    let mut y = vec![0usize; n];
    let mut cost = Vec::new();
    for u in 0..n {
        cost.clear();
        cost.extend_from_slice(&state.unary[u]);
        for &e in &lower[u] {
            let prev = y[state.edges[e].0];
            for (c, &p) in cost.iter_mut().zip(state.pairwise[e].row(prev)) {
                *c += p;
            }
        }
        let mut best = 0;
        for (x, &c) in cost.iter().enumerate() {
            if c < cost[best] {
                best = x;
            }
        }
        y[u] = best;
    }
    Labeling(y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub normalized_iterations: f64,
    pub oracle_calls: u64,
    pub dual: f64,
    pub wall_time_ms: f64,
    /// Original-cost energy of the labeling rounded at this checkpoint.
    pub primal: f64,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub checkpoints: Vec<Checkpoint>,
    /// Labeling rounded from the final state, or an earlier checkpoint's
    /// rounding if that one has strictly lower energy.
    pub final_labeling: Labeling,
    pub final_energy: f64,
    pub final_dual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_state: ReparamState,
}

impl SolveTrace {
    pub fn gap(&self) -> f64 {
        self.final_energy - self.final_dual
    }

    /// First normalized-iteration count at which the dual reaches `target`.
    pub fn iterations_to_reach(&self, target: f64) -> Option<f64> {
        self.checkpoints
            .iter()
            .find(|c| c.dual >= target)
            .map(|c| c.normalized_iterations)
    }
}

pub fn solve(model: &GraphicalModel, config: &SolveConfig) -> Result<SolveTrace, ConfigError> {
    let schedule = compute_schedule(model);
    solve_with_schedule(model, &schedule, config)
}

pub fn solve_with_schedule(
    model: &GraphicalModel,
    schedule: &EdgeSchedule,
    config: &SolveConfig,
) -> Result<SolveTrace, ConfigError> {
    config.validate()?;
    let executor = Executor::new(config.mode, config.num_workers)?;
    let start = Instant::now();
    let mut state = init_reparam(model);
    let num_edges = model.num_edges();
    let normalize = |calls: u64| if num_edges == 0 { 0.0 } else { calls as f64 / num_edges as f64 };

    let mut best: Option<(Labeling, f64)> = None;
    let mut last: Option<(Labeling, f64)> = None;
    let mut checkpoint = |state: &ReparamState, calls: u64| {
        let y = round_primal(state);
        let e = energy(model, &y).expect("rounding yields a valid labeling");
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((y.clone(), e));
        }
        last = Some((y, e));
        Checkpoint {
            normalized_iterations: normalize(calls),
            oracle_calls: calls,
            dual: dual_value(state),
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            primal: e,
        }
    };

    let mut checkpoints = vec![checkpoint(&state, 0)];
    let mut calls = 0u64;
    let mut iterations = 0usize;
    let mut converged = num_edges == 0;
    let mut pending = 0usize;
    let mut since_checkpoint = 0.0;
    while !converged && normalize(calls) < config.max_normalized_iterations {
        calls += run_iteration(&mut state, schedule, config.rule, &executor);
        iterations += 1;
        pending += 1;
        since_checkpoint += config.rule.oracle_cost() as f64;
        if since_checkpoint >= config.checkpoint_every {
            let prev = checkpoints.last().unwrap().dual;
            let cp = checkpoint(&state, calls);
            let rel = (cp.dual - prev) / cp.dual.abs().max(1.0) / pending as f64;
            checkpoints.push(cp);
            converged = rel < config.rel_improvement_threshold;
            pending = 0;
            since_checkpoint = 0.0;
        }
    }
    if pending > 0 {
        let cp = checkpoint(&state, calls);
        checkpoints.push(cp);
    }

    // The last rounding wins unless an earlier one was strictly better.
    let (last, best) = (last.expect("at least one checkpoint"), best.expect("at least one checkpoint"));
    let (final_labeling, final_energy) = if best.1 < last.1 { best } else { last };
    Ok(SolveTrace {
        final_dual: checkpoints.last().unwrap().dual,
        checkpoints,
        final_labeling,
        final_energy,
        converged,
        iterations,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::restricted_dual;
    use crate::generate::{gen_complete, gen_potts_grid, sparsify};
    use crate::model::{brute_force_map, fixtures::*};

    fn seq() -> Executor {
        Executor::Sequential
    }

    #[test]
    fn one_iteration_on_two_node_model() {
        let m = two_node();
        let sched = compute_schedule(&m);
        for (rule, calls) in [(Rule::MplpPlusPlus, 3), (Rule::Mplp, 2), (Rule::Uniform, 1)] {
            let mut s = init_reparam(&m);
            assert_eq!(dual_value(&s), 0.0);
            assert_eq!(run_iteration(&mut s, &sched, rule, &seq()), calls);
            assert_eq!(dual_value(&s), 5.0);
        }
    }

    #[test]
    fn edgeless_iteration_is_noop() {
        let m = GraphicalModel::new(vec![vec![1.0, 2.0]; 3], vec![], vec![]).unwrap();
        let mut s = init_reparam(&m);
        assert_eq!(run_iteration(&mut s, &compute_schedule(&m), Rule::MplpPlusPlus, &seq()), 0);
        assert_eq!(s, init_reparam(&m));
    }

    #[test]
    fn solve_two_node_model() {
        let t = solve(&two_node(), &SolveConfig::default()).unwrap();
        assert!(t.converged);
        assert_eq!(t.final_dual, 5.0);
        assert_eq!(t.final_energy, 5.0);
        assert_eq!(t.gap(), 0.0);
        assert_eq!(t.final_labeling, Labeling(vec![0, 1]));
        assert_eq!(t.checkpoints[1].normalized_iterations, 3.0);
    }

    #[test]
    fn solve_zero_model() {
        let t = solve(&zero_chain(4, 2), &SolveConfig::default()).unwrap();
        assert!(t.converged);
        assert_eq!(t.final_dual, 0.0);
        assert_eq!(t.final_labeling, Labeling(vec![0; 4]));
    }

    #[test]
    fn solve_random_complete_respects_weak_duality() {
        let m = gen_complete(5, 3, 21);
        let (_, opt) = brute_force_map(&m).unwrap();
        let t = solve(&m, &SolveConfig::default()).unwrap();
        assert!(t.final_dual <= opt + 1e-9);
        assert!(t.final_energy >= opt - 1e-12);
        assert!(t.gap() >= -1e-9);
        for c in &t.checkpoints {
            assert!(c.dual <= opt + 1e-9);
            assert!(c.dual <= c.primal + 1e-9);
        }
        assert!(t.checkpoints.windows(2).all(|w| w[1].dual >= w[0].dual - 1e-9));
    }

    #[test]
    fn rounding_examples() {
        let mut s = init_reparam(&two_node());
        crate::updates::apply_update(&mut s, 0, Rule::MplpPlusPlus);
        assert_eq!(round_primal(&s), Labeling(vec![0, 1]));
        assert_eq!(round_primal(&init_reparam(&single_node(&[3.0, 1.0, 2.0]))), Labeling(vec![1]));
        assert_eq!(round_primal(&init_reparam(&zero_chain(3, 3))), Labeling(vec![0, 0, 0]));
    }

    #[test]
    fn rounding_energy_matches_original_costs() {
        let m = gen_complete(7, 4, 3);
        let t = solve(&m, &SolveConfig::default()).unwrap();
        t.final_labeling.validate(&m).unwrap();
        assert!((energy(&m, &t.final_labeling).unwrap() - t.final_energy).abs() <= 1e-9);
    }

    #[test]
    fn potts_with_zero_lambda_decouples() {
        let m = gen_potts_grid(3, 3, 4, 0.0, 5);
        let t = solve(&m, &SolveConfig::default()).unwrap();
        let argmins: Vec<usize> = m
            .unaries()
            .iter()
            .map(|u| (0..u.len()).min_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap())
            .collect();
        assert_eq!(t.final_labeling, Labeling(argmins));
        assert!(t.gap().abs() <= 1e-12);
    }

    #[test]
    fn accounting_is_exact() {
        let m = sparsify(&gen_complete(9, 3, 1), 0.6, 2);
        let sched = compute_schedule(&m);
        for rule in Rule::ALL {
            let mut s = init_reparam(&m);
            let mut total = 0;
            for k in 1..=4u64 {
                total += run_iteration(&mut s, &sched, rule, &seq());
                assert_eq!(total, k * rule.oracle_cost() * m.num_edges() as u64);
            }
        }
    }

    #[test]
    fn parallel_rounds_match_sequential_bitwise() {
        let m = gen_complete(12, 5, 4);
        let sched = compute_schedule(&m);
        for workers in [2, 3, 8] {
            let par = Executor::new(Mode::Parallel, workers).unwrap();
            for rule in Rule::ALL {
                let mut a = init_reparam(&m);
                let mut b = init_reparam(&m);
                for _ in 0..3 {
                    run_iteration(&mut a, &sched, rule, &seq());
                    run_iteration(&mut b, &sched, rule, &par);
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn max_iterations_cap() {
        let m = gen_complete(10, 4, 9);
        let cfg = SolveConfig {
            rule: Rule::Mplp,
            max_normalized_iterations: 7.0,
            rel_improvement_threshold: 0.0,
            ..SolveConfig::default()
        };
        let t = solve(&m, &cfg).unwrap();
        assert!(!t.converged);
        assert_eq!(t.iterations, 4);
        assert_eq!(t.checkpoints.last().unwrap().normalized_iterations, 8.0);
    }

    #[test]
    fn sparse_checkpoints() {
        let m = gen_complete(6, 3, 2);
        let cfg = SolveConfig {
            rule: Rule::Uniform,
            checkpoint_every: 3.0,
            rel_improvement_threshold: 0.0,
            max_normalized_iterations: 10.0,
            ..SolveConfig::default()
        };
        let t = solve(&m, &cfg).unwrap();
        let xs: Vec<f64> = t.checkpoints.iter().map(|c| c.normalized_iterations).collect();
        assert_eq!(xs, vec![0.0, 3.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn config_validation() {
        let bad = SolveConfig { num_workers: 0, ..SolveConfig::default() };
        assert_eq!(bad.validate(), Err(ConfigError::NoWorkers));
        let bad = SolveConfig { rel_improvement_threshold: -1.0, ..SolveConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolveConfig { max_normalized_iterations: f64::NAN, ..SolveConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn updates_never_decrease_the_dual() {
        for seed in 0..200 {
            let m = sparsify(&gen_complete(6, 3, seed), 0.7, seed);
            let mut s = init_reparam(&m);
            let mut d = dual_value(&s);
            for k in 0..(3 * m.num_edges()) {
                let e = k % m.num_edges();
                let before = restricted_dual(&s, e);
                crate::updates::apply_update(&mut s, e, Rule::ALL[(k + seed as usize) % 3]);
                assert!(restricted_dual(&s, e) >= before - 1e-9);
                let now = dual_value(&s);
                assert!(now >= d - 1e-9);
                d = now;
            }
        }
    }
}
