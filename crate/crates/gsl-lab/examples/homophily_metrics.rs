//! Edge homophily vs node homophily on graphs where they disagree.
//!
//! Edge homophily is the fraction of same-label edges; node homophily
//! averages each node's same-label neighbor fraction. Hub-dominated graphs
//! pull the two apart because the edge metric weights hubs by degree while
//! the node metric counts every node once.

use gsl_lab::graph::{build_graph, edge_homophily, node_homophily};
use gsl_lab::matrix::DenseMatrix;

fn main() -> gsl_lab::Result<()> {
    // A hub of class 0 wired to six class-1 satellites, plus a same-label
    // pair off to the side. Satellite edges are all heterophilous.
    let labels = vec![0, 1, 1, 1, 1, 1, 1, 0, 0];
    let mut edges: Vec<(usize, usize)> = (1..=6).map(|v| (0, v)).collect();
    edges.push((7, 8));
    let n = labels.len();
    let feats = DenseMatrix::zeros(n, 1);
    let g = build_graph(&edges, n, feats, labels, 2)?;

    let eh = edge_homophily(&g)?;
    let nh = node_homophily(&g);
    println!("hub graph: edge homophily {eh:.4}, node homophily {nh:.4}");
    // 1 of 7 edges joins same labels; per-node fractions average higher
    // because the six satellites each contribute a clean 0 but the pair
    // contributes two 1s and the hub a single 0.
    assert!((eh - 1.0 / 7.0).abs() < 1e-12);
    assert!(nh > eh);

    // Perfectly homophilous and perfectly heterophilous rings agree on both.
    for (name, offset) in [("same-label ring", 0), ("alternating ring", 1)] {
        let n = 8;
        let labels: Vec<usize> = (0..n).map(|i| (i % 2) * offset).collect();
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let g = build_graph(&edges, n, DenseMatrix::zeros(n, 1), labels, 2)?;
        println!(
            "{name}: edge {:.1}, node {:.1}",
            edge_homophily(&g)?,
            node_homophily(&g)
        );
    }
    Ok(())
}
