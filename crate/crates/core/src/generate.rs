//! Deterministic synthetic instances and edge sparsification.
//!
//! All randomness comes from [`SplitMix64`], whose constants are fixed so
//! that generated benchmarks are reproducible from any language.

use crate::model::{GraphicalModel, Table};

/// splitmix64 generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    pub state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` as `floor(next_f64() * n)`. `n` must be positive.
    pub fn next_index(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }
}

/// Complete graph on `n` nodes with i.i.d. uniform `[0,1)` costs.
///
/// Draw order: unaries node by node (labels ascending), then pairwise
/// tables in lexicographic edge order, each row-major.
pub fn gen_complete(n: usize, labels: usize, seed: u64) -> GraphicalModel {
    assert!(n >= 1 && labels >= 1, "need at least one node and one label");
    let mut rng = SplitMix64::new(seed);
    let unary: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..labels).map(|_| rng.next_f64()).collect())
        .collect();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    let pairwise = edges
        .iter()
        .map(|_| {
            let data = (0..labels * labels).map(|_| rng.next_f64()).collect();
            Table::new(labels, labels, data).expect("sized by construction")
        })
        .collect();
    GraphicalModel::new(unary, edges, pairwise).expect("valid by construction")
}

/// 4-connected `rows × cols` grid with uniform `[0,1)` unaries and Potts
/// pairwise costs `lambda · [s ≠ t]`. Node `(r, c)` has index `r·cols + c`.
pub fn gen_potts_grid(rows: usize, cols: usize, labels: usize, lambda: f64, seed: u64) -> GraphicalModel {
    assert!(rows * cols >= 1 && labels >= 1, "need at least one node and one label");
    let mut rng = SplitMix64::new(seed);
    let n = rows * cols;
    let unary: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..labels).map(|_| rng.next_f64()).collect())
        .collect();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    edges.sort_unstable();
    let mut potts = Table::zeros(labels, labels);
    for s in 0..labels {
        for t in 0..labels {
            if s != t {
                potts.set(s, t, lambda);
            }
        }
    }
    let pairwise = vec![potts; edges.len()];
    GraphicalModel::new(unary, edges, pairwise).expect("valid by construction")
}

/// Number of edges [`sparsify`] keeps out of `num_edges`.
pub fn kept_edge_count(num_edges: usize, keep_fraction: f64) -> usize {
    let k = (keep_fraction * num_edges as f64).round() as usize;
    k.clamp(usize::from(num_edges > 0), num_edges)
}

/// Keeps `round(keep_fraction·|E|)` edges (at least one if any exist),
/// chosen by a seeded Fisher–Yates shuffle. Kept edges retain their
/// original relative order; node count and unaries are unchanged.
pub fn sparsify(model: &GraphicalModel, keep_fraction: f64, seed: u64) -> GraphicalModel {
    assert!(
        keep_fraction > 0.0 && keep_fraction <= 1.0,
        "keep_fraction must lie in (0, 1]"
    );
    let m = model.num_edges();
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..m).rev() {
        let j = rng.next_index(i + 1);
        order.swap(i, j);
    }
    let mut keep = order[..kept_edge_count(m, keep_fraction)].to_vec();
    keep.sort_unstable();
    model.with_edges(&keep)
}
