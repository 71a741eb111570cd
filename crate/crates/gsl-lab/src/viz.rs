//! Class-sorted adjacency rendering.
//!
//! Permuting nodes so same-label nodes are adjacent makes block structure
//! visible: homophilous graphs show dark diagonal blocks, heterophilous
//! ones dark off-diagonal bands. Node mode emits the permuted adjacency as
//! an ASCII PGM (P2, maxval 1, edge = 1); class mode reduces each class
//! pair to a single density — the fraction of possible node pairs in that
//! block that are actually connected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VizMode {
    /// Full permuted adjacency, one pixel per node pair (PGM P2).
    Node,
    /// Per-class-block edge densities (C x C CSV).
    Class,
}

impl FromStr for VizMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(VizMode::Node),
            "class" => Ok(VizMode::Class),
            other => Err(Error::validation(format!(
                "unknown mode '{other}' (expected node or class)"
            ))),
        }
    }
}

/// Nodes ordered by (label, node id); the permutation applied to rows and
/// columns of the adjacency in node mode.
fn class_order(g: &Graph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.num_nodes()).collect();
    order.sort_by_key(|&u| (g.labels()[u], u));
    order
}

/// Renders the visualization as file content (PGM text or CSV text).
pub fn render_sorted_adjacency(g: &Graph, mode: VizMode) -> String {
    match mode {
        VizMode::Node => render_node_mode(g),
        VizMode::Class => render_class_mode(g),
    }
}

/// Renders and writes to `out_path`.
pub fn write_sorted_adjacency(g: &Graph, mode: VizMode, out_path: &Path) -> Result<()> {
    let content = render_sorted_adjacency(g, mode);
    std::fs::write(out_path, content).map_err(|source| Error::io(out_path, source))
}

fn render_node_mode(g: &Graph) -> String {
    let n = g.num_nodes();
    let order = class_order(g);
    let mut out = String::with_capacity(n * (2 * n + 1) + 32);
    let _ = writeln!(out, "P2");
    let _ = writeln!(out, "{n} {n}");
    let _ = writeln!(out, "1");
    for &u in &order {
        let mut first = true;
        for &v in &order {
            if !first {
                out.push(' ');
            }
            first = false;
            let bit = if g.adjacency().get(u, v) != 0.0 { '1' } else { '0' };
            out.push(bit);
        }
        out.push('\n');
    }
    out
}

fn render_class_mode(g: &Graph) -> String {
    let c = g.num_classes();
    let mut counts = vec![0usize; c];
    for &y in g.labels() {
        counts[y] += 1;
    }
    // Count each undirected edge once into its class block.
    let mut edges = DenseMatrix::zeros(c, c);
    for (u, v) in g.edge_list() {
        let (a, b) = (g.labels()[u], g.labels()[v]);
        let (a, b) = (a.min(b), a.max(b));
        edges.set(a, b, edges.get(a, b) + 1.0);
    }
    let mut out = String::new();
    for a in 0..c {
        for b in 0..c {
            if b > 0 {
                out.push(',');
            }
            let (lo, hi) = (a.min(b), a.max(b));
            let possible = if lo == hi {
                counts[lo] as f64 * (counts[lo] as f64 - 1.0) / 2.0
            } else {
                counts[lo] as f64 * counts[hi] as f64
            };
            let density = if possible > 0.0 {
                edges.get(lo, hi) / possible
            } else {
                0.0
            };
            let _ = write!(out, "{density}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csbm::{generate_csbm, CsbmConfig};
    use crate::graph::build_graph;

    fn two_cliques() -> Graph {
        // Intra-class edges only: two triangles.
        let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
        build_graph(
            &edges,
            6,
            DenseMatrix::from_vec(6, 1, vec![0.0; 6]).unwrap(),
            vec![0, 0, 0, 1, 1, 1],
            2,
        )
        .unwrap()
    }

    #[test]
    fn pgm_header_and_shape() {
        let g = two_cliques();
        let pgm = render_sorted_adjacency(&g, VizMode::Node);
        let mut lines = pgm.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("6 6"));
        assert_eq!(lines.next(), Some("1"));
        let pixel_rows: Vec<&str> = lines.collect();
        assert_eq!(pixel_rows.len(), 6);
        for row in &pixel_rows {
            assert_eq!(row.split(' ').count(), 6);
            assert!(row.split(' ').all(|p| p == "0" || p == "1"));
        }
    }

    #[test]
    fn intra_only_graph_has_zero_off_diagonal_density() {
        let g = two_cliques();
        let csv = render_sorted_adjacency(&g, VizMode::Class);
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][0], 1.0); // triangle: all 3 of 3 pairs present
        assert_eq!(rows[1][1], 1.0);
        assert_eq!(rows[0][1], 0.0);
        assert_eq!(rows[1][0], 0.0);
    }

    #[test]
    fn block_ordering_follows_labels() {
        // A single cross-class edge must land in the off-diagonal block of
        // the permuted image, away from the class-0 diagonal block.
        let g = build_graph(
            &[(0, 1), (2, 3), (1, 2)],
            4,
            DenseMatrix::from_vec(4, 1, vec![0.0; 4]).unwrap(),
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap();
        let pgm = render_sorted_adjacency(&g, VizMode::Node);
        let rows: Vec<&str> = pgm.lines().skip(3).collect();
        let pixel = |r: usize, c: usize| rows[r].split(' ').nth(c).unwrap() == "1";
        assert!(pixel(0, 1) && pixel(1, 0)); // class-0 internal edge
        assert!(pixel(2, 3) && pixel(3, 2)); // class-1 internal edge
        assert!(pixel(1, 2) && pixel(2, 1)); // the cross edge
        assert!(!pixel(0, 2) && !pixel(0, 3));
    }

    #[test]
    fn csbm_extremes_show_block_structure() {
        let base = CsbmConfig {
            num_nodes: 200,
            feature_dim: 3,
            num_classes: 2,
            ..CsbmConfig::default()
        };
        let mut homophilous = base.clone();
        homophilous.homophily = 1.0;
        let g1 = generate_csbm(&homophilous, 0).unwrap();
        let csv = render_sorted_adjacency(&g1, VizMode::Class);
        let d: Vec<Vec<f64>> = csv
            .lines()
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert!(d[0][0] > d[0][1] && d[1][1] > d[1][0], "h=1 diagonal-dominant");

        let mut heterophilous = base;
        heterophilous.homophily = 0.0;
        let g0 = generate_csbm(&heterophilous, 0).unwrap();
        let csv = render_sorted_adjacency(&g0, VizMode::Class);
        let d: Vec<Vec<f64>> = csv
            .lines()
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert!(d[0][1] > d[0][0] && d[0][1] > d[1][1], "h=0 off-diagonal-dominant");
    }

    #[test]
    fn write_creates_the_file() {
        let g = two_cliques();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.pgm");
        write_sorted_adjacency(&g, VizMode::Node, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.starts_with("P2\n"));
        assert!("node".parse::<VizMode>().is_ok());
        assert!("heat".parse::<VizMode>().is_err());
    }
}
