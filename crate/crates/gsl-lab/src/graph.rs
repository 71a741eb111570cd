//! Undirected attributed graphs and the handful of structural operations
//! everything else is built from: graph assembly, degree-normalized
//! adjacency, neighborhood averaging, and the two homophily metrics.
//!
//! Storage conventions:
//! - each undirected edge is stored in both CSR directions but counted once
//!   by `edge_count`;
//! - the diagonal is empty (self-loop inputs are dropped at build time);
//! - adjacency values are presence flags (1.0). Edge weights produced by
//!   rewiring live in `construct::Structure` until a plain graph is needed.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: CsrMatrix,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Number of undirected edges (each stored twice internally).
    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency.row_indices(u).len()
    }

    /// Neighbor ids of `u`, ascending.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        self.adjacency.row_indices(u)
    }

    /// Undirected edge list with `u < v`, ascending.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter_entries()
            .filter(|&(u, v, _)| u < v)
            .map(|(u, v, _)| (u, v))
            .collect()
    }

    /// Same structure and labels, different feature matrix.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Graph> {
        if features.rows() != self.num_nodes() {
            return Err(Error::validation(format!(
                "feature matrix has {} rows, graph has {} nodes",
                features.rows(),
                self.num_nodes()
            )));
        }
        Ok(Graph {
            adjacency: self.adjacency.clone(),
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
        })
    }
}

/// Assembles an undirected attributed graph from an edge list.
///
/// Edges are symmetrized and deduplicated. Self-loops in the input are
/// dropped (logged as a warning, not an error): downstream normalization
/// adds its own diagonal and a doubled loop would corrupt degrees.
pub fn build_graph(
    edges: &[(usize, usize)],
    num_nodes: usize,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
) -> Result<Graph> {
    if num_classes == 0 {
        return Err(Error::validation("num_classes must be at least 1"));
    }
    if labels.len() != num_nodes {
        return Err(Error::validation(format!(
            "{} labels for {} nodes",
            labels.len(),
            num_nodes
        )));
    }
    if features.rows() != num_nodes {
        return Err(Error::validation(format!(
            "feature matrix has {} rows, expected {}",
            features.rows(),
            num_nodes
        )));
    }
    for (u, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::validation(format!(
                "node {u} has label {y}, valid range is 0..{num_classes}"
            )));
        }
    }

    let mut pairs = Vec::with_capacity(edges.len());
    let mut self_loops = 0usize;
    for &(u, v) in edges {
        if u >= num_nodes || v >= num_nodes {
            return Err(Error::validation(format!(
                "edge ({u}, {v}) references a node outside 0..{num_nodes}"
            )));
        }
        if u == v {
            self_loops += 1;
            continue;
        }
        pairs.push((u.min(v), u.max(v)));
    }
    if self_loops > 0 {
        log::warn!("dropped {self_loops} self-loop(s) during graph assembly");
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut entries = Vec::with_capacity(pairs.len() * 2);
    for &(u, v) in &pairs {
        entries.push((u, v, 1.0));
        entries.push((v, u, 1.0));
    }
    let adjacency = CsrMatrix::from_triplets(num_nodes, num_nodes, &entries)?;
    Ok(Graph {
        adjacency,
        features,
        labels,
        num_classes,
    })
}

/// Symmetrically normalized adjacency with self-loops:
/// entry (u, v) is `1 / sqrt((deg(u) + 1) * (deg(v) + 1))` for every edge
/// and for the diagonal. Built directly over the CSR structure; column
/// indices stay sorted because the diagonal is merged in order.
pub fn normalized_adjacency(g: &Graph) -> CsrMatrix {
    normalize_presence(g.adjacency())
}

/// Same normalization for a bare symmetric pattern. Values of the input are
/// ignored; only presence counts.
pub(crate) fn normalize_presence(adj: &CsrMatrix) -> CsrMatrix {
    let n = adj.rows();
    let deg_tilde: Vec<f64> = (0..n)
        .map(|u| (adj.row_indices(u).len() + 1) as f64)
        .collect();
    // One sqrt per entry keeps each value within 1 ulp of the closed form
    // (so e.g. equal-degree entries come out as exact reciprocals).
    let weight = |u: usize, v: usize| (deg_tilde[u] * deg_tilde[v]).sqrt().recip();
    let mut entries = Vec::with_capacity(adj.nnz() + n);
    for u in 0..n {
        let mut diagonal_placed = false;
        for &v in adj.row_indices(u) {
            if !diagonal_placed && v > u {
                entries.push((u, u, weight(u, u)));
                diagonal_placed = true;
            }
            entries.push((u, v, weight(u, v)));
        }
        if !diagonal_placed {
            entries.push((u, u, weight(u, u)));
        }
    }
    CsrMatrix::from_triplets(n, n, &entries).expect("normalized entries are in range by construction")
}

/// Averages each node's neighbor rows of `m`. With `include_self` the node's
/// own row joins the average. Nodes whose averaging set is empty keep their
/// own row, so the output never contains an undefined row.
pub fn mean_aggregate(g: &Graph, m: &DenseMatrix, include_self: bool) -> Result<DenseMatrix> {
    mean_aggregate_pattern(g.adjacency(), m, include_self)
}

pub(crate) fn mean_aggregate_pattern(
    adj: &CsrMatrix,
    m: &DenseMatrix,
    include_self: bool,
) -> Result<DenseMatrix> {
    if m.rows() != adj.rows() {
        return Err(Error::validation(format!(
            "matrix has {} rows, graph has {} nodes",
            m.rows(),
            adj.rows()
        )));
    }
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for u in 0..adj.rows() {
        let neighbors = adj.row_indices(u);
        let count = neighbors.len() + usize::from(include_self);
        let dst = out.row_mut(u);
        if count == 0 {
            dst.copy_from_slice(m.row(u));
            continue;
        }
        for &v in neighbors {
            for (d, &s) in dst.iter_mut().zip(m.row(v)) {
                *d += s;
            }
        }
        if include_self {
            for (d, &s) in dst.iter_mut().zip(m.row(u)) {
                *d += s;
            }
        }
        let inv = (count as f64).recip();
        for d in dst.iter_mut() {
            *d *= inv;
        }
    }
    Ok(out)
}

/// Fraction of edges joining same-label endpoints. Each undirected edge
/// counts once; weights are ignored. Errors on an empty edge set.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    let total = g.edge_count();
    if total == 0 {
        return Err(Error::validation(
            "edge homophily is undefined on a graph with no edges",
        ));
    }
    let labels = g.labels();
    let mut same = 0usize;
    for u in 0..g.num_nodes() {
        for &v in g.neighbors(u) {
            if u < v && labels[u] == labels[v] {
                same += 1;
            }
        }
    }
    Ok(same as f64 / total as f64)
}

/// Mean over nodes of the same-label fraction of each node's neighborhood.
/// Isolated nodes are skipped (their fraction is undefined); the skip count
/// is logged. A graph where every node is isolated yields 0.
pub fn node_homophily(g: &Graph) -> f64 {
    let labels = g.labels();
    let mut sum = 0.0;
    let mut counted = 0usize;
    for u in 0..g.num_nodes() {
        let neighbors = g.neighbors(u);
        if neighbors.is_empty() {
            continue;
        }
        let same = neighbors.iter().filter(|&&v| labels[v] == labels[u]).count();
        sum += same as f64 / neighbors.len() as f64;
        counted += 1;
    }
    let skipped = g.num_nodes() - counted;
    if skipped > 0 {
        log::warn!("node homophily skipped {skipped} isolated node(s)");
    }
    if counted == 0 {
        return 0.0;
    }
    sum / counted as f64
}
