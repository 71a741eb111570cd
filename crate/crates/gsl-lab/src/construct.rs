//! Builds replacement graph structures from a bases matrix.
//!
//! Three constructions are supported, all quadratic in the node count by
//! design (every pair is scored):
//!
//! - `knn:K` — each node links to its K nearest rows (Euclidean by default),
//!   union-symmetrized;
//! - `cos-graph:R` — the top `ceil(R * reference_edges)` pairs by cosine
//!   similarity over the whole graph;
//! - `cos-node:R` — the top `max(1, round(R * reference_edges / N))` pairs
//!   per node by cosine, union-symmetrized, so no node is left isolated.
//!
//! Outputs are `Structure` values: square weighted adjacencies without
//! self-loops, symmetric as constructed. Refinement steps may break weight
//! or pattern symmetry (TopK, RowNormalize); `Symmetrize` restores it.
//! Ties anywhere are broken toward the smaller node index so results are
//! reproducible across runs and thread counts.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};
use crate::matrix::DenseMatrix;
use crate::sparse::CsrMatrix;

/// A (possibly weighted, possibly directed mid-refinement) adjacency
/// pattern without node attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    adjacency: CsrMatrix,
}

impl Structure {
    pub(crate) fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Result<Structure> {
        for &(u, v, _) in entries {
            if u == v {
                return Err(Error::validation(format!(
                    "structure entry ({u}, {v}) is a self-loop"
                )));
            }
        }
        Ok(Structure {
            adjacency: CsrMatrix::from_triplets(n, n, entries)?,
        })
    }

    /// Structure view of an existing graph's (symmetric, presence-weighted)
    /// adjacency.
    pub fn from_graph(g: &Graph) -> Structure {
        Structure {
            adjacency: g.adjacency().clone(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Unordered node pairs with at least one stored direction.
    pub fn undirected_edge_count(&self) -> usize {
        let mut count = 0usize;
        for (u, v, _) in self.adjacency.iter_entries() {
            if u < v || self.adjacency.get(v, u) == 0.0 {
                count += 1;
            }
        }
        count
    }

    /// True when every stored entry has a stored mirror (weights may differ).
    pub fn is_symmetric_pattern(&self) -> bool {
        self.adjacency
            .iter_entries()
            .all(|(u, v, _)| self.adjacency.get(v, u) != 0.0)
    }

    /// Attaches node attributes, producing a plain presence graph. The
    /// pattern is union-symmetrized and weights are dropped.
    pub fn to_graph(
        &self,
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Graph> {
        let edges: Vec<(usize, usize)> = self
            .adjacency
            .iter_entries()
            .map(|(u, v, _)| (u.min(v), u.max(v)))
            .collect();
        build_graph(&edges, self.num_nodes(), features, labels, num_classes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Similarity {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Knn { k: usize },
    CosGraph { ratio: f64 },
    CosNode { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructSpec {
    pub method: Method,
    /// Metric for `Knn`; the cosine methods ignore this field.
    pub similarity: Similarity,
}

impl ConstructSpec {
    pub fn knn(k: usize) -> Self {
        ConstructSpec {
            method: Method::Knn { k },
            similarity: Similarity::Euclidean,
        }
    }

    pub fn cos_graph(ratio: f64) -> Self {
        ConstructSpec {
            method: Method::CosGraph { ratio },
            similarity: Similarity::Cosine,
        }
    }

    pub fn cos_node(ratio: f64) -> Self {
        ConstructSpec {
            method: Method::CosNode { ratio },
            similarity: Similarity::Cosine,
        }
    }
}

impl FromStr for ConstructSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(k) = s.strip_prefix("knn:") {
            let k: usize = k
                .parse()
                .map_err(|_| Error::validation(format!("bad neighbor count in '{s}'")))?;
            return Ok(ConstructSpec::knn(k));
        }
        if let Some(r) = s.strip_prefix("cos-graph:") {
            let ratio: f64 = r
                .parse()
                .map_err(|_| Error::validation(format!("bad edge ratio in '{s}'")))?;
            return Ok(ConstructSpec::cos_graph(ratio));
        }
        if let Some(r) = s.strip_prefix("cos-node:") {
            let ratio: f64 = r
                .parse()
                .map_err(|_| Error::validation(format!("bad edge ratio in '{s}'")))?;
            return Ok(ConstructSpec::cos_node(ratio));
        }
        Err(Error::validation(format!(
            "unknown construction '{s}' (expected knn:K, cos-graph:R, or cos-node:R)"
        )))
    }
}

impl fmt::Display for ConstructSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            Method::Knn { k } => write!(f, "knn:{k}"),
            Method::CosGraph { ratio } => write!(f, "cos-graph:{ratio}"),
            Method::CosNode { ratio } => write!(f, "cos-node:{ratio}"),
        }
    }
}

/// Dense pairwise cosine similarity with the diagonal poisoned to negative
/// infinity so self-pairs never win a top-k selection. Rows are normalized
/// once; a zero-norm row is an error naming the row.
pub fn pairwise_cosine(b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.rows();
    let mut normalized = b.clone();
    for i in 0..n {
        let row = normalized.row_mut(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::validation(format!(
                "row {i} has zero norm; cosine similarity is undefined"
            )));
        }
        let inv = norm.recip();
        for x in row.iter_mut() {
            *x *= inv;
        }
    }
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j {
                f64::NEG_INFINITY
            } else {
                dot(normalized.row(i), normalized.row(j))
            };
            out.set(i, j, v);
        }
    }
    Ok(out)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Constructs a new structure over the rows of `bases`.
///
/// `reference_edges` is the undirected edge count of the graph being
/// rewired; the two cosine methods size their budgets from it and `knn`
/// ignores it.
pub fn build_gsl_graph(
    bases: &DenseMatrix,
    spec: &ConstructSpec,
    reference_edges: usize,
) -> Result<Structure> {
    let n = bases.rows();
    if n < 2 {
        return Err(Error::validation("construction needs at least 2 nodes"));
    }
    match spec.method {
        Method::Knn { k } => {
            if k == 0 {
                return Err(Error::validation("knn neighbor count must be at least 1"));
            }
            if k >= n {
                return Err(Error::validation(format!(
                    "knn neighbor count {k} must be below the node count {n}"
                )));
            }
            match spec.similarity {
                Similarity::Euclidean => knn_euclidean(bases, k),
                Similarity::Cosine => {
                    let sim = pairwise_cosine(bases)?;
                    knn_from_similarity(&sim, k)
                }
            }
        }
        Method::CosGraph { ratio } => {
            validate_ratio(ratio)?;
            let budget = ratio * reference_edges as f64;
            if budget < 1.0 {
                return Err(Error::validation(format!(
                    "cos-graph budget {ratio} x {reference_edges} edges is below 1"
                )));
            }
            let target = budget.ceil() as usize;
            let sim = pairwise_cosine(bases)?;
            let mut pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            pairs.sort_by(|&(a, b), &(c, d)| {
                sim.get(c, d)
                    .total_cmp(&sim.get(a, b))
                    .then(a.cmp(&c))
                    .then(b.cmp(&d))
            });
            pairs.truncate(target);
            let mut entries = Vec::with_capacity(pairs.len() * 2);
            for &(i, j) in &pairs {
                let w = sim.get(i, j);
                entries.push((i, j, w));
                entries.push((j, i, w));
            }
            Structure::from_entries(n, &entries)
        }
        Method::CosNode { ratio } => {
            validate_ratio(ratio)?;
            let per_node = (ratio * reference_edges as f64 / n as f64).round() as usize;
            let q = per_node.max(1).min(n - 1);
            let sim = pairwise_cosine(bases)?;
            knn_from_similarity(&sim, q)
        }
    }
}

fn validate_ratio(ratio: f64) -> Result<()> {
    if ratio <= 0.0 || !ratio.is_finite() {
        return Err(Error::validation(format!(
            "edge ratio must be positive and finite, got {ratio}"
        )));
    }
    Ok(())
}

fn knn_euclidean(bases: &DenseMatrix, k: usize) -> Result<Structure> {
    let n = bases.rows();
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(n * k);
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scored.clear();
        for j in 0..n {
            if j != i {
                scored.push((squared_euclidean(bases.row(i), bases.row(j)), j));
            }
        }
        // Smallest distance wins; equal distances prefer the smaller index.
        scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut head: Vec<(f64, usize)> = scored[..k].to_vec();
        head.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &head {
            chosen.push((i.min(j), i.max(j)));
        }
    }
    symmetrized_presence(n, chosen)
}

/// Per-node top-q selection over a similarity matrix whose diagonal is
/// negative infinity. Higher similarity wins; ties prefer the smaller index.
fn knn_from_similarity(sim: &DenseMatrix, q: usize) -> Result<Structure> {
    let n = sim.rows();
    let mut chosen: Vec<(usize, usize, f64)> = Vec::with_capacity(n * q);
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scored.clear();
        for j in 0..n {
            if j != i {
                scored.push((sim.get(i, j), j));
            }
        }
        scored.select_nth_unstable_by(q - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut head: Vec<(f64, usize)> = scored[..q].to_vec();
        head.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(w, j) in &head {
            chosen.push((i.min(j), i.max(j), w));
        }
    }
    chosen.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    chosen.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let mut entries = Vec::with_capacity(chosen.len() * 2);
    for &(u, v, w) in &chosen {
        entries.push((u, v, w));
        entries.push((v, u, w));
    }
    Structure::from_entries(n, &entries)
}

fn symmetrized_presence(n: usize, mut pairs: Vec<(usize, usize)>) -> Result<Structure> {
    pairs.sort_unstable();
    pairs.dedup();
    let mut entries = Vec::with_capacity(pairs.len() * 2);
    for &(u, v) in &pairs {
        entries.push((u, v, 1.0));
        entries.push((v, u, 1.0));
    }
    Structure::from_entries(n, &entries)
}

/// Optional post-construction steps, applied in the fixed order
/// TopK, Symmetrize, RowNormalize, SymNormalize.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefineSpec {
    pub top_k: Option<usize>,
    pub symmetrize: bool,
    pub row_normalize: bool,
    pub sym_normalize: bool,
}

pub fn refine(structure: &Structure, spec: &RefineSpec) -> Result<Structure> {
    let mut current = structure.clone();
    if let Some(k) = spec.top_k {
        if k == 0 {
            return Err(Error::validation("top-k must keep at least 1 edge"));
        }
        current = top_k(&current, k)?;
    }
    if spec.symmetrize {
        current = symmetrize_max(&current)?;
    }
    if spec.row_normalize {
        current = row_normalize(&current)?;
    }
    if spec.sym_normalize {
        current = sym_normalize(&current)?;
    }
    Ok(current)
}

/// Keeps each node's k highest-weight outgoing entries (ties prefer the
/// smaller column). The result is generally directed until symmetrized.
fn top_k(s: &Structure, k: usize) -> Result<Structure> {
    let adj = s.adjacency();
    let n = adj.rows();
    let mut entries = Vec::new();
    for u in 0..n {
        let mut row: Vec<(f64, usize)> = adj
            .row_values(u)
            .iter()
            .zip(adj.row_indices(u))
            .map(|(&w, &v)| (w, v))
            .collect();
        row.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        row.truncate(k);
        for &(w, v) in &row {
            entries.push((u, v, w));
        }
    }
    Structure::from_entries(n, &entries)
}

/// Entry-wise max(A, A^T): unions the pattern and reconciles weights upward.
fn symmetrize_max(s: &Structure) -> Result<Structure> {
    let adj = s.adjacency();
    let n = adj.rows();
    let mut entries = Vec::new();
    for (u, v, w) in adj.iter_entries() {
        let mirrored = adj.get(v, u);
        let kept = w.max(mirrored);
        entries.push((u, v, kept));
        if mirrored == 0.0 {
            entries.push((v, u, kept));
        }
    }
    Structure::from_entries(n, &entries)
}

fn row_normalize(s: &Structure) -> Result<Structure> {
    let adj = s.adjacency();
    let mut sums = vec![0.0f64; adj.rows()];
    for (u, sum) in sums.iter_mut().enumerate() {
        *sum = adj.row_values(u).iter().sum();
        if *sum <= 0.0 && !adj.row_indices(u).is_empty() {
            return Err(Error::numeric(format!(
                "row {u} has non-positive weight sum {sum}; cannot row-normalize"
            )));
        }
    }
    Ok(Structure {
        adjacency: adj.map_values(|u, _, w| w / sums[u]),
    })
}

fn sym_normalize(s: &Structure) -> Result<Structure> {
    let adj = s.adjacency();
    let mut degrees = vec![0.0f64; adj.rows()];
    for (u, deg) in degrees.iter_mut().enumerate() {
        *deg = adj.row_values(u).iter().sum();
        if *deg <= 0.0 && !adj.row_indices(u).is_empty() {
            return Err(Error::numeric(format!(
                "row {u} has non-positive weight sum {deg}; cannot sym-normalize"
            )));
        }
    }
    Ok(Structure {
        adjacency: adj.map_values(|u, v, w| {
            let d = degrees[u] * degrees[v];
            if d > 0.0 {
                w / d.sqrt()
            } else {
                w
            }
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bases_1d(points: &[f64]) -> DenseMatrix {
        DenseMatrix::from_rows(&points.iter().map(|&p| vec![p]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn knn1_on_a_line() {
        // Points 0, 1, 3: node 0 picks 1, node 1 picks 0, node 2 picks 1.
        let b = bases_1d(&[0.0, 1.0, 3.0]);
        let s = build_gsl_graph(&b, &ConstructSpec::knn(1), 0).unwrap();
        let mut edges: Vec<(usize, usize)> = s
            .adjacency()
            .iter_entries()
            .filter(|&(u, v, _)| u < v)
            .map(|(u, v, _)| (u, v))
            .collect();
        edges.sort_unstable();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert!(s.is_symmetric_pattern());
    }

    #[test]
    fn knn_distance_ties_prefer_smaller_index() {
        // Node 0 is equidistant from 1 and 2; with k = 1 it must pick 1.
        // Nodes 2 and 3 pair up, so no other selection can re-add (0, 2).
        let b = DenseMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![-1.4, 0.0],
        ])
        .unwrap();
        let s = build_gsl_graph(&b, &ConstructSpec::knn(1), 0).unwrap();
        assert!(s.adjacency().get(0, 1) != 0.0);
        assert!(s.adjacency().get(2, 3) != 0.0);
        assert_eq!(s.adjacency().get(0, 2), 0.0);
    }

    #[test]
    fn knn_matches_brute_force_selection() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = 10 + rng.gen_range(0..30);
            let f = 1 + rng.gen_range(0..5);
            let data: Vec<f64> = (0..n * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = DenseMatrix::from_vec(n, f, data).unwrap();
            let k = 1 + rng.gen_range(0..4);
            let s = build_gsl_graph(&b, &ConstructSpec::knn(k), 0).unwrap();

            let mut expected: Vec<(usize, usize)> = Vec::new();
            for i in 0..n {
                let mut scored: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (squared_euclidean(b.row(i), b.row(j)), j))
                    .collect();
                scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(_, j) in &scored[..k] {
                    expected.push((i.min(j), i.max(j)));
                }
            }
            expected.sort_unstable();
            expected.dedup();
            let mut got: Vec<(usize, usize)> = s
                .adjacency()
                .iter_entries()
                .filter(|&(u, v, _)| u < v)
                .map(|(u, v, _)| (u, v))
                .collect();
            got.sort_unstable();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn pairwise_cosine_identical_and_orthogonal() {
        let b = DenseMatrix::from_rows(&[
            vec![2.0, 0.0],
            vec![4.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let sim = pairwise_cosine(&b).unwrap();
        assert!((sim.get(0, 1) - 1.0).abs() <= 1e-12);
        assert!(sim.get(0, 2).abs() <= 1e-12);
        assert_eq!(sim.get(1, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn pairwise_cosine_rejects_zero_rows() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let err = pairwise_cosine(&b).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn cos_graph_takes_the_top_pairs() {
        // Three near-parallel rows and one orthogonal; budget of 2 pairs.
        let b = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.01],
            vec![1.0, 0.02],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let s = build_gsl_graph(&b, &ConstructSpec::cos_graph(1.0), 2).unwrap();
        assert_eq!(s.undirected_edge_count(), 2);
        // Top-2 similarities are between consecutive near-parallel rows.
        assert!(s.adjacency().get(0, 1) != 0.0);
        assert!(s.adjacency().get(1, 2) != 0.0);
        assert_eq!(s.adjacency().get(0, 3), 0.0);
    }

    #[test]
    fn cos_graph_budget_below_one_errors() {
        let b = bases_1d(&[0.0, 1.0, 2.0]);
        assert!(build_gsl_graph(&b, &ConstructSpec::cos_graph(0.1), 3).is_err());
    }

    #[test]
    fn cos_node_guarantees_min_degree() {
        let b = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.9, 0.1],
            vec![0.0, 1.0],
            vec![-0.1, 0.9],
            vec![-1.0, -1.0],
        ])
        .unwrap();
        // Tiny ratio: per-node budget still clamps to 1.
        let s = build_gsl_graph(&b, &ConstructSpec::cos_node(0.1), 5).unwrap();
        for u in 0..5 {
            assert!(
                !s.adjacency().row_indices(u).is_empty(),
                "node {u} isolated"
            );
        }
    }

    #[test]
    fn construction_never_emits_self_loops_or_duplicates() {
        let b = DenseMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        // Duplicate rows: Euclidean distance zero between 0/1 and 2/3.
        let s = build_gsl_graph(&b, &ConstructSpec::knn(2), 0).unwrap();
        for (u, v, _) in s.adjacency().iter_entries() {
            assert_ne!(u, v);
        }
        assert!(s.is_symmetric_pattern());
    }

    #[test]
    fn refine_pipeline_orders_steps() {
        let b = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.9, 0.1],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let s = build_gsl_graph(&b, &ConstructSpec::cos_graph(1.0), 4).unwrap();
        let refined = refine(
            &s,
            &RefineSpec {
                top_k: Some(1),
                symmetrize: true,
                row_normalize: true,
                sym_normalize: false,
            },
        )
        .unwrap();
        assert!(refined.is_symmetric_pattern());
        for u in 0..4 {
            let sum: f64 = refined.adjacency().row_values(u).iter().sum();
            if !refined.adjacency().row_indices(u).is_empty() {
                assert!((sum - 1.0).abs() <= 1e-12, "row {u} sums to {sum}");
            }
        }
    }

    #[test]
    fn sym_normalize_matches_formula() {
        let s = Structure::from_entries(
            3,
            &[
                (0, 1, 2.0),
                (1, 0, 2.0),
                (1, 2, 4.0),
                (2, 1, 4.0),
            ],
        )
        .unwrap();
        let out = refine(
            &s,
            &RefineSpec {
                sym_normalize: true,
                ..RefineSpec::default()
            },
        )
        .unwrap();
        // degrees: [2, 6, 4]
        assert!((out.adjacency().get(0, 1) - 2.0 / (2.0f64 * 6.0).sqrt()).abs() < 1e-15);
        assert!((out.adjacency().get(1, 2) - 4.0 / (6.0f64 * 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["knn:5", "cos-graph:0.5", "cos-node:2"] {
            let spec: ConstructSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("knn:0".parse::<ConstructSpec>().is_ok()); // parse ok, build rejects
        assert!("banana".parse::<ConstructSpec>().is_err());
        let b = bases_1d(&[0.0, 1.0]);
        assert!(build_gsl_graph(&b, &"knn:0".parse().unwrap(), 0).is_err());
        assert!(build_gsl_graph(&b, &ConstructSpec::knn(5), 0).is_err());
    }
}
