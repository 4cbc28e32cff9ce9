//! Pairwise graphical models, labelings and reparametrized cost state.
//!
//! A model is an undirected graph whose nodes carry a finite label space and
//! a unary cost table, and whose edges carry a dense pairwise cost table. The
//! energy of a labeling is the sum of the selected unary and pairwise costs.
//!
//! Edges are stored canonically with `u < v`. Pairwise tables are row-major
//! with the label of `u` selecting the row and the label of `v` the column.

use crate::error::ModelError;
use crate::generate::SplitMix64;
use std::collections::HashSet;

/// Upper bound on the number of labelings [`brute_force_map`] will enumerate.
pub const MAX_ENUMERATION: u128 = 10_000_000;

/// Dense row-major table of `rows × cols` costs.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != rows * cols {
            return Err(ModelError::TableSize {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Table { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Table {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a table from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(ModelError::TableSize {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Table {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.cols + t]
    }

    #[inline]
    pub fn set(&mut self, s: usize, t: usize, value: f64) {
        self.data[s * self.cols + t] = value;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.cols..(s + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.cols..(s + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Smallest entry, `+inf` for an empty table.
    pub fn min(&self) -> f64 {
        min_of(&self.data)
    }
}

#[inline]
pub(crate) fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Immutable pairwise model: graph, label spaces and original costs.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphicalModel {
    label_counts: Vec<usize>,
    edges: Vec<(usize, usize)>,
    unary: Vec<Vec<f64>>,
    pairwise: Vec<Table>,
}

impl GraphicalModel {
    /// Validates and builds a model. Node count is `unary.len()`.
    pub fn new(
        unary: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        pairwise: Vec<Table>,
    ) -> Result<Self, ModelError> {
        let num_nodes = unary.len();
        let label_counts: Vec<usize> = unary.iter().map(Vec::len).collect();
        for (node, &count) in label_counts.iter().enumerate() {
            if count == 0 {
                return Err(ModelError::EmptyLabelSpace { node });
            }
        }
        if edges.len() != pairwise.len() {
            return Err(ModelError::EdgeTableCount {
                edges: edges.len(),
                tables: pairwise.len(),
            });
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for (index, (&(u, v), table)) in edges.iter().zip(&pairwise).enumerate() {
            if u >= num_nodes || v >= num_nodes {
                return Err(ModelError::NodeOutOfRange {
                    edge: index,
                    num_nodes,
                });
            }
            if u >= v {
                return Err(ModelError::NonCanonicalEdge { edge: index, u, v });
            }
            if !seen.insert((u, v)) {
                return Err(ModelError::DuplicateEdge { u, v });
            }
            if table.rows() != label_counts[u] || table.cols() != label_counts[v] {
                return Err(ModelError::TableSize {
                    expected: label_counts[u] * label_counts[v],
                    found: table.rows() * table.cols(),
                });
            }
            if table.as_slice().iter().any(|x| !x.is_finite()) {
                return Err(ModelError::NonFiniteCost);
            }
        }
        if unary.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteCost);
        }
        Ok(GraphicalModel {
            label_counts,
            edges,
            unary,
            pairwise,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.label_counts.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn label_counts(&self) -> &[usize] {
        &self.label_counts
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn unary(&self, node: usize) -> &[f64] {
        &self.unary[node]
    }

    pub fn unaries(&self) -> &[Vec<f64>] {
        &self.unary
    }

    pub fn pairwise(&self, edge: usize) -> &Table {
        &self.pairwise[edge]
    }

    pub fn pairwise_tables(&self) -> &[Table] {
        &self.pairwise
    }

    /// Number of joint labelings, saturating.
    pub fn state_space_size(&self) -> u128 {
        self.label_counts
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(c as u128))
    }

    /// Same graph and costs restricted to the given edge subset (by index).
    pub fn with_edges(&self, keep: &[usize]) -> GraphicalModel {
        GraphicalModel {
            label_counts: self.label_counts.clone(),
            edges: keep.iter().map(|&e| self.edges[e]).collect(),
            unary: self.unary.clone(),
            pairwise: keep.iter().map(|&e| self.pairwise[e].clone()).collect(),
        }
    }
}

/// One label index per node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Labeling(pub Vec<usize>);

impl Labeling {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, model: &GraphicalModel) -> Result<(), ModelError> {
        if self.0.len() != model.num_nodes() {
            return Err(ModelError::LabelingLength {
                expected: model.num_nodes(),
                found: self.0.len(),
            });
        }
        for (node, (&label, &count)) in self.0.iter().zip(model.label_counts()).enumerate() {
            if label >= count {
                return Err(ModelError::LabelOutOfRange { node, label, count });
            }
        }
        Ok(())
    }
}

fn energy_unchecked(
    unary: &[Vec<f64>],
    edges: &[(usize, usize)],
    pairwise: &[Table],
    y: &[usize],
) -> f64 {
    let mut total = 0.0;
    for (costs, &label) in unary.iter().zip(y) {
        total += costs[label];
    }
    for (&(u, v), table) in edges.iter().zip(pairwise) {
        total += table.get(y[u], y[v]);
    }
    total
}

/// Energy of `y` under the original costs.
pub fn energy(model: &GraphicalModel, y: &Labeling) -> Result<f64, ModelError> {
    y.validate(model)?;
    Ok(energy_unchecked(&model.unary, &model.edges, &model.pairwise, &y.0))
}

/// Exact minimizer by enumeration; ties go to the lexicographically smallest labeling.
pub fn brute_force_map(model: &GraphicalModel) -> Result<(Labeling, f64), ModelError> {
    let size = model.state_space_size();
    if size > MAX_ENUMERATION {
        return Err(ModelError::StateSpaceTooLarge {
            size,
            limit: MAX_ENUMERATION,
        });
    }
    let mut best_y = vec![0; model.num_nodes()];
    let mut best = f64::INFINITY;
    for_each_labeling(model.label_counts(), |y| {
        let e = energy_unchecked(&model.unary, &model.edges, &model.pairwise, y);
        if e < best {
            best = e;
            best_y.copy_from_slice(y);
        }
    });
    Ok((Labeling(best_y), best))
}

/// Visits every labeling in lexicographic order (node 0 most significant).
pub(crate) fn for_each_labeling(label_counts: &[usize], mut visit: impl FnMut(&[usize])) {
    let n = label_counts.len();
    let mut y = vec![0usize; n];
    loop {
        visit(&y);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            y[i] += 1;
            if y[i] < label_counts[i] {
                break;
            }
            y[i] = 0;
        }
    }
}

/// Current reparametrized costs, mutated in place by BCA updates.
#[derive(Clone, Debug, PartialEq)]
pub struct ReparamState {
    pub(crate) edges: Vec<(usize, usize)>,
    pub(crate) unary: Vec<Vec<f64>>,
    pub(crate) pairwise: Vec<Table>,
    /// Always 0: every update leaves the pairwise minimum at zero, so no
    /// constant is ever split off.
    pub constant_offset: f64,
}

impl ReparamState {
    pub fn num_nodes(&self) -> usize {
        self.unary.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn unary(&self, node: usize) -> &[f64] {
        &self.unary[node]
    }

    pub fn unary_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.unary[node]
    }

    pub fn pairwise(&self, edge: usize) -> &Table {
        &self.pairwise[edge]
    }

    pub fn pairwise_mut(&mut self, edge: usize) -> &mut Table {
        &mut self.pairwise[edge]
    }

    /// Energy of `y` under the reparametrized costs. `y` must be in range.
    pub fn energy(&self, y: &[usize]) -> f64 {
        self.constant_offset + energy_unchecked(&self.unary, &self.edges, &self.pairwise, y)
    }

    /// Accumulated unary reparametrization `unary_hat - unary` for `node`.
    pub fn unary_shift(&self, model: &GraphicalModel, node: usize) -> Vec<f64> {
        self.unary[node]
            .iter()
            .zip(model.unary(node))
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Zero reparametrization: copies of the original tables.
pub fn init_reparam(model: &GraphicalModel) -> ReparamState {
    ReparamState {
        edges: model.edges.clone(),
        unary: model.unary.clone(),
        pairwise: model.pairwise.clone(),
        constant_offset: 0.0,
    }
}

/// Labelings enumerated exhaustively by [`check_energy_preserved`] when the
/// state space is at most this large.
const PRESERVATION_ENUMERATION_LIMIT: u128 = 100_000;

/// Compares energies under original and reparametrized costs.
///
/// Evaluates `samples` pseudorandom labelings, plus every labeling when the
/// state space is small, and reports whether the largest absolute difference
/// is within `1e-6`.
pub fn check_energy_preserved(
    model: &GraphicalModel,
    state: &ReparamState,
    samples: usize,
    seed: u64,
) -> bool {
    max_energy_deviation(model, state, samples, seed) <= 1e-6
}

/// Largest `|E(y|state) - E(y|model)|` over the labelings [`check_energy_preserved`] visits.
pub fn max_energy_deviation(
    model: &GraphicalModel,
    state: &ReparamState,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut worst = 0.0f64;
    let mut check = |y: &[usize]| {
        let original = energy_unchecked(&model.unary, &model.edges, &model.pairwise, y);
        let d = (state.energy(y) - original).abs();
        // NaN must register as a violation.
        if !(d <= worst) {
            worst = if d.is_nan() { f64::INFINITY } else { d };
        }
    };
    if model.state_space_size() <= PRESERVATION_ENUMERATION_LIMIT {
        for_each_labeling(model.label_counts(), &mut check);
    }
    let mut rng = SplitMix64::new(seed);
    let mut y = vec![0; model.num_nodes()];
    for _ in 0..samples {
        for (label, &count) in y.iter_mut().zip(model.label_counts()) {
            *label = rng.next_index(count);
        }
        check(&y);
    }
    worst
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two nodes, one edge: θ_u=(4,0), θ_v=(2,0), θ_uv=[[0,1],[7,5]].
    pub fn two_node() -> GraphicalModel {
        GraphicalModel::new(
            vec![vec![4.0, 0.0], vec![2.0, 0.0]],
            vec![(0, 1)],
            vec![Table::from_rows(&[&[0.0, 1.0], &[7.0, 5.0]]).unwrap()],
        )
        .unwrap()
    }

    pub fn zero_chain(n: usize, labels: usize) -> GraphicalModel {
        GraphicalModel::new(
            vec![vec![0.0; labels]; n],
            (1..n).map(|v| (v - 1, v)).collect(),
            (1..n).map(|_| Table::zeros(labels, labels)).collect(),
        )
        .unwrap()
    }

    pub fn single_node(costs: &[f64]) -> GraphicalModel {
        GraphicalModel::new(vec![costs.to_vec()], vec![], vec![]).unwrap()
    }
}
