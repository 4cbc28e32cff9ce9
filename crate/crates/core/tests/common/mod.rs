#![allow(dead_code)]

use minsum::generate::{sparsify, SplitMix64};
use minsum::model::{GraphicalModel, Table};

/// Random model: `2..=max_nodes` nodes, `1..=max_labels` labels per node,
/// uniform `[0, scale)` costs, and `density` of all node pairs as edges.
pub fn random_model(seed: u64, max_nodes: usize, max_labels: usize, density: f64, scale: f64) -> GraphicalModel {
    let mut rng = SplitMix64::new(seed);
    let n = 2 + rng.next_index(max_nodes - 1);
    random_model_with(&mut rng, n, max_labels, density, scale, seed)
}

pub fn random_model_with(
    rng: &mut SplitMix64,
    n: usize,
    max_labels: usize,
    density: f64,
    scale: f64,
    seed: u64,
) -> GraphicalModel {
    let labels: Vec<usize> = (0..n).map(|_| 1 + rng.next_index(max_labels)).collect();
    let unary = labels
        .iter()
        .map(|&k| (0..k).map(|_| scale * rng.next_f64()).collect())
        .collect();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let tables = edges
        .iter()
        .map(|&(u, v)| {
            let (r, c) = (labels[u], labels[v]);
            Table::new(r, c, (0..r * c).map(|_| scale * rng.next_f64()).collect()).unwrap()
        })
        .collect();
    let full = GraphicalModel::new(unary, edges, tables).unwrap();
    sparsify(&full, density, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED)
}
