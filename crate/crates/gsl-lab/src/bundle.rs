//! On-disk dataset bundles: a directory of plain JSON/CSV files that any
//! language can read without dependencies.
//!
//! Layout:
//!
//! ```text
//! DIR/meta.json       {"name", "num_nodes", "num_classes", "feature_dim"}
//! DIR/edges.csv       one `u,v` per line, 0-indexed, each undirected edge once
//! DIR/features.csv    one node per line, comma-separated floats
//! DIR/labels.csv      one integer per line
//! DIR/splits.csv      optional; `node,role` lines with role train|val|test
//! ```
//!
//! Floats are written with 17 significant digits so a saved graph reloads
//! bit for bit, in this or any other process. Malformed input is reported
//! with the file and 1-based line number.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};
use crate::matrix::DenseMatrix;
use crate::nn::DataSplit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleMeta {
    name: String,
    num_nodes: usize,
    num_classes: usize,
    feature_dim: usize,
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|source| Error::io(path, source))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::io(path, source))
}

/// Writes `g` (and optionally a split) as a bundle directory, creating it
/// if needed. The bundle name is the directory's base name.
pub fn save_bundle(g: &Graph, split: Option<&DataSplit>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::io(dir, source))?;
    let meta = BundleMeta {
        name: dir
            .file_name()
            .map_or_else(|| "graph".to_string(), |n| n.to_string_lossy().into_owned()),
        num_nodes: g.num_nodes(),
        num_classes: g.num_classes(),
        feature_dim: g.feature_dim(),
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::numeric(format!("meta serialization failed: {e}")))?;
    write_file(&dir.join("meta.json"), &meta_json)?;

    let mut edges = String::new();
    for (u, v) in g.edge_list() {
        let _ = writeln!(edges, "{u},{v}");
    }
    write_file(&dir.join("edges.csv"), &edges)?;

    let mut features = String::new();
    for i in 0..g.num_nodes() {
        let row = g.features().row(i);
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                features.push(',');
            }
            // 17 significant digits: lossless f64 round-trip.
            let _ = write!(features, "{x:.16e}");
        }
        features.push('\n');
    }
    write_file(&dir.join("features.csv"), &features)?;

    let mut labels = String::new();
    for &y in g.labels() {
        let _ = writeln!(labels, "{y}");
    }
    write_file(&dir.join("labels.csv"), &labels)?;

    if let Some(split) = split {
        let mut lines = String::new();
        for (role, part) in [
            ("train", &split.train),
            ("val", &split.val),
            ("test", &split.test),
        ] {
            for &u in part.iter() {
                let _ = writeln!(lines, "{u},{role}");
            }
        }
        write_file(&dir.join("splits.csv"), &lines)?;
    }
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::parse(path, line, msg)
}

/// Writes a dense matrix as CSV, one row per line, 17-significant-digit
/// floats (same lossless convention as bundle features).
pub fn save_matrix(m: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        for (j, x) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x:.16e}");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Reads a matrix written by `save_matrix` (or any rectangular float CSV).
pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = read_file(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad float '{field}'")))?;
            row.push(x);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("{} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::validation(format!(
            "{}: matrix file is empty",
            path.display()
        )));
    }
    DenseMatrix::from_rows(&rows)
}

/// Loads a bundle directory back into a graph and optional split.
pub fn load_bundle(dir: &Path) -> Result<(Graph, Option<DataSplit>)> {
    let meta_path = dir.join("meta.json");
    let meta: BundleMeta = serde_json::from_str(&read_file(&meta_path)?)
        .map_err(|e| parse_err(&meta_path, e.line(), e.to_string()))?;
    if meta.num_nodes == 0 {
        return Err(Error::validation("bundle declares zero nodes"));
    }
    if meta.num_classes == 0 {
        return Err(Error::validation("bundle declares zero classes"));
    }

    let edges_path = dir.join("edges.csv");
    let mut edges = Vec::new();
    for (idx, line) in read_file(&edges_path)?.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let (u, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err(&edges_path, lineno, format!("expected 'u,v', got '{line}'")))?;
        let u: usize = u
            .trim()
            .parse()
            .map_err(|_| parse_err(&edges_path, lineno, format!("bad node index '{u}'")))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|_| parse_err(&edges_path, lineno, format!("bad node index '{v}'")))?;
        if u == v {
            return Err(parse_err(
                &edges_path,
                lineno,
                format!("self-loop {u},{v} is not allowed"),
            ));
        }
        if u >= meta.num_nodes || v >= meta.num_nodes {
            return Err(parse_err(
                &edges_path,
                lineno,
                format!("edge {u},{v} outside 0..{}", meta.num_nodes),
            ));
        }
        edges.push((u, v));
    }

    let features_path = dir.join("features.csv");
    let text = read_file(&features_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(meta.num_nodes);
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(meta.feature_dim);
        for field in line.split(',') {
            let x: f64 = field.trim().parse().map_err(|_| {
                parse_err(&features_path, lineno, format!("bad float '{field}'"))
            })?;
            row.push(x);
        }
        if row.len() != meta.feature_dim {
            return Err(parse_err(
                &features_path,
                lineno,
                format!("{} values, expected {}", row.len(), meta.feature_dim),
            ));
        }
        rows.push(row);
    }
    if rows.len() != meta.num_nodes {
        return Err(Error::validation(format!(
            "meta declares {} nodes but features.csv has {} rows",
            meta.num_nodes,
            rows.len()
        )));
    }
    let features = DenseMatrix::from_rows(&rows)?;

    let labels_path = dir.join("labels.csv");
    let mut labels = Vec::with_capacity(meta.num_nodes);
    for (idx, line) in read_file(&labels_path)?.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let y: usize = line
            .trim()
            .parse()
            .map_err(|_| parse_err(&labels_path, lineno, format!("bad label '{line}'")))?;
        if y >= meta.num_classes {
            return Err(parse_err(
                &labels_path,
                lineno,
                format!("label {y} outside 0..{}", meta.num_classes),
            ));
        }
        labels.push(y);
    }
    if labels.len() != meta.num_nodes {
        return Err(Error::validation(format!(
            "meta declares {} nodes but labels.csv has {} lines",
            meta.num_nodes,
            labels.len()
        )));
    }

    let graph = build_graph(&edges, meta.num_nodes, features, labels, meta.num_classes)?;

    let splits_path = dir.join("splits.csv");
    let split = if splits_path.exists() {
        let mut train = Vec::new();
        let mut val = Vec::new();
        let mut test = Vec::new();
        for (idx, line) in read_file(&splits_path)?.lines().enumerate() {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let (node, role) = line.split_once(',').ok_or_else(|| {
                parse_err(&splits_path, lineno, format!("expected 'node,role', got '{line}'"))
            })?;
            let node: usize = node
                .trim()
                .parse()
                .map_err(|_| parse_err(&splits_path, lineno, format!("bad node '{node}'")))?;
            match role.trim() {
                "train" => train.push(node),
                "val" => val.push(node),
                "test" => test.push(node),
                other => {
                    return Err(parse_err(
                        &splits_path,
                        lineno,
                        format!("unknown role '{other}' (expected train, val, or test)"),
                    ))
                }
            }
        }
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        let split = DataSplit { train, val, test };
        split.validate(meta.num_nodes)?;
        Some(split)
    } else {
        None
    };

    Ok((graph, split))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csbm::{generate_csbm, CsbmConfig};

    fn sample_graph() -> Graph {
        let cfg = CsbmConfig {
            num_nodes: 50,
            feature_dim: 3,
            num_classes: 2,
            homophily: 0.7,
            ..CsbmConfig::default()
        };
        generate_csbm(&cfg, 11).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let g = sample_graph();
        let split = DataSplit::random(g.num_nodes(), 4);
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&g, Some(&split), dir.path()).unwrap();
        let (loaded, loaded_split) = load_bundle(dir.path()).unwrap();
        assert_eq!(loaded.adjacency(), g.adjacency());
        assert_eq!(loaded.features(), g.features());
        assert_eq!(loaded.labels(), g.labels());
        assert_eq!(loaded.num_classes(), g.num_classes());
        assert_eq!(loaded_split.unwrap(), split);
    }

    #[test]
    fn save_is_byte_deterministic() {
        let g = sample_graph();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        save_bundle(&g, None, d1.path()).unwrap();
        save_bundle(&g, None, d2.path()).unwrap();
        for f in ["edges.csv", "features.csv", "labels.csv"] {
            let a = fs::read(d1.path().join(f)).unwrap();
            let b = fs::read(d2.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} differs");
        }
    }

    #[test]
    fn self_loop_is_rejected_with_line_number() {
        let g = sample_graph();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&g, None, dir.path()).unwrap();
        let edges_path = dir.path().join("edges.csv");
        let mut text = fs::read_to_string(&edges_path).unwrap();
        text.push_str("0,0\n");
        let extra_line = text.lines().count();
        fs::write(&edges_path, text).unwrap();
        let err = load_bundle(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("self-loop"), "{msg}");
        // Parse errors render as path:LINE: message.
        assert!(msg.contains(&format!(":{extra_line}:")), "{msg}");
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let g = sample_graph();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&g, None, dir.path()).unwrap();
        let features_path = dir.path().join("features.csv");
        let mut text = fs::read_to_string(&features_path).unwrap();
        text.push_str("1.0,2.0,3.0\n");
        fs::write(&features_path, text).unwrap();
        let err = load_bundle(dir.path()).unwrap_err();
        assert!(err.to_string().contains("50"), "{err}");
    }

    #[test]
    fn bad_label_and_bad_float_name_their_lines() {
        let g = sample_graph();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&g, None, dir.path()).unwrap();
        let labels_path = dir.path().join("labels.csv");
        let mut text = fs::read_to_string(&labels_path).unwrap();
        text = text.replacen('0', "9", 1); // first label becomes out of range
        fs::write(&labels_path, &text).unwrap();
        let err = load_bundle(dir.path()).unwrap_err();
        assert!(err.to_string().contains("label 9"), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_bundle(dir.path()).unwrap_err();
        assert!(err.to_string().contains("meta.json"), "{err}");
    }

    #[test]
    fn matrix_csv_round_trips_bitwise() {
        let m = DenseMatrix::from_rows(&[
            vec![1.0 / 3.0, -2.5e-17, 0.0],
            vec![f64::MIN_POSITIVE, 1e300, -7.125],
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        save_matrix(&m, &path).unwrap();
        let back = load_matrix(&path).unwrap();
        assert_eq!(m, back);

        fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        let err = load_matrix(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }
}
