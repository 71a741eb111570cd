//! Synthetic graphs with a dialable homophily level.
//!
//! Nodes get balanced class labels and Gaussian features around a per-class
//! mean; each node then proposes a bounded number of edges whose endpoints
//! are drawn intra-class with probability `homophily` and uniformly from the
//! other classes otherwise. The resulting edge homophily tracks the knob
//! closely at the default size, which is what makes controlled sweeps
//! possible.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsbmConfig {
    #[serde(default = "default_num_nodes")]
    pub num_nodes: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_num_classes")]
    pub num_classes: usize,
    /// Probability that a proposed edge targets the proposer's own class.
    #[serde(default = "default_homophily")]
    pub homophily: f64,
    #[serde(default = "default_degree_min")]
    pub degree_min: usize,
    #[serde(default = "default_degree_max")]
    pub degree_max: usize,
    /// Norm of each class mean vector.
    #[serde(default = "default_scale")]
    pub class_mean_scale: f64,
    /// Isotropic feature standard deviation around the class mean.
    #[serde(default = "default_scale")]
    pub class_std: f64,
}

fn default_num_nodes() -> usize {
    1000
}
fn default_feature_dim() -> usize {
    10
}
fn default_num_classes() -> usize {
    5
}
fn default_homophily() -> f64 {
    0.5
}
fn default_degree_min() -> usize {
    2
}
fn default_degree_max() -> usize {
    10
}
fn default_scale() -> f64 {
    1.0
}

impl Default for CsbmConfig {
    fn default() -> Self {
        CsbmConfig {
            num_nodes: default_num_nodes(),
            feature_dim: default_feature_dim(),
            num_classes: default_num_classes(),
            homophily: default_homophily(),
            degree_min: default_degree_min(),
            degree_max: default_degree_max(),
            class_mean_scale: default_scale(),
            class_std: default_scale(),
        }
    }
}

impl CsbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_nodes == 0 {
            return Err(Error::validation("num_nodes must be positive"));
        }
        if self.feature_dim == 0 {
            return Err(Error::validation("feature_dim must be positive"));
        }
        if self.num_classes == 0 || self.num_classes > self.num_nodes {
            return Err(Error::validation(format!(
                "num_classes {} must be in 1..={}",
                self.num_classes, self.num_nodes
            )));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::validation(format!(
                "homophily {} outside [0, 1]",
                self.homophily
            )));
        }
        if self.degree_min > self.degree_max {
            return Err(Error::validation(format!(
                "degree_min {} exceeds degree_max {}",
                self.degree_min, self.degree_max
            )));
        }
        if self.degree_max >= self.num_nodes {
            return Err(Error::validation(format!(
                "degree_max {} must be below num_nodes {}",
                self.degree_max, self.num_nodes
            )));
        }
        if self.class_std <= 0.0 || !self.class_std.is_finite() {
            return Err(Error::validation("class_std must be positive and finite"));
        }
        if !self.class_mean_scale.is_finite() || self.class_mean_scale < 0.0 {
            return Err(Error::validation("class_mean_scale must be non-negative"));
        }
        Ok(())
    }
}

/// Bookkeeping from edge proposal: how many proposals were made and how many
/// were abandoned after the retry cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsbmStats {
    pub proposals: usize,
    pub dropped: usize,
}

impl CsbmStats {
    pub fn drop_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.dropped as f64 / self.proposals as f64
        }
    }
}

const PROPOSAL_RETRIES: usize = 16;

/// Generates a graph from `cfg`, deterministically in `(cfg, seed)`.
pub fn generate_csbm(cfg: &CsbmConfig, seed: u64) -> Result<Graph> {
    generate_csbm_with_stats(cfg, seed).map(|(g, _)| g)
}

/// As `generate_csbm`, also returning proposal statistics so callers can
/// check the drop rate stays negligible for their configuration.
pub fn generate_csbm_with_stats(cfg: &CsbmConfig, seed: u64) -> Result<(Graph, CsbmStats)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.num_nodes;
    let c = cfg.num_classes;

    // Class means: scaled unit vectors with seeded directions.
    let mut means = Vec::with_capacity(c);
    for _ in 0..c {
        let mut v: Vec<f64> = (0..cfg.feature_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        while norm < 1e-12 {
            v = (0..cfg.feature_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        for x in v.iter_mut() {
            *x *= cfg.class_mean_scale / norm;
        }
        means.push(v);
    }

    // Balanced labels: n mod c classes get one extra node, then shuffle.
    let mut labels = Vec::with_capacity(n);
    for class in 0..c {
        let count = n / c + usize::from(class < n % c);
        labels.extend(std::iter::repeat_n(class, count));
    }
    labels.shuffle(&mut rng);

    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (u, &y) in labels.iter().enumerate() {
        class_members[y].push(u);
    }

    // Features around the class mean.
    let mut features = DenseMatrix::zeros(n, cfg.feature_dim);
    for (u, &label) in labels.iter().enumerate() {
        let mean = &means[label];
        let row = features.row_mut(u);
        for (x, &m) in row.iter_mut().zip(mean) {
            let noise: f64 = rng.sample(StandardNormal);
            *x = m + cfg.class_std * noise;
        }
    }

    // Edge proposals. A proposal re-rolls on self-targets and edges already
    // present, and is dropped after the retry cap (a singleton class asking
    // for an intra-class partner exhausts retries and drops, never errors).
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut stats = CsbmStats {
        proposals: 0,
        dropped: 0,
    };
    for (u, &label) in labels.iter().enumerate() {
        let degree = rng.gen_range(cfg.degree_min..=cfg.degree_max);
        for _ in 0..degree {
            stats.proposals += 1;
            let mut placed = false;
            for _ in 0..=PROPOSAL_RETRIES {
                let target_class = if c == 1 || rng.gen_bool(cfg.homophily) {
                    label
                } else {
                    // Uniform over the other c - 1 classes.
                    let mut pick = rng.gen_range(0..c - 1);
                    if pick >= label {
                        pick += 1;
                    }
                    pick
                };
                let members = &class_members[target_class];
                let v = members[rng.gen_range(0..members.len())];
                if v == u {
                    continue;
                }
                let key = (u.min(v), u.max(v));
                if seen.contains(&key) {
                    continue;
                }
                seen.insert(key);
                edges.push(key);
                placed = true;
                break;
            }
            if !placed {
                stats.dropped += 1;
            }
        }
    }

    let g = build_graph(&edges, n, features, labels, c)?;
    Ok((g, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_homophily;

    #[test]
    fn deterministic_given_config_and_seed() {
        let cfg = CsbmConfig {
            num_nodes: 200,
            ..CsbmConfig::default()
        };
        let a = generate_csbm(&cfg, 42).unwrap();
        let b = generate_csbm(&cfg, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_csbm(&cfg, 43).unwrap();
        assert_ne!(a.edge_list(), c.edge_list());
    }

    #[test]
    fn labels_are_balanced_within_one() {
        let cfg = CsbmConfig {
            num_nodes: 1003,
            ..CsbmConfig::default()
        };
        let g = generate_csbm(&cfg, 0).unwrap();
        let mut counts = vec![0usize; cfg.num_classes];
        for &y in g.labels() {
            counts[y] += 1;
        }
        let max = *counts.iter().max().unwrap();
        let min = *counts.iter().min().unwrap();
        assert!(max - min <= 1, "counts {counts:?}");
    }

    #[test]
    fn extreme_homophily_is_exact() {
        let cfg = CsbmConfig {
            num_nodes: 300,
            homophily: 1.0,
            ..CsbmConfig::default()
        };
        let g = generate_csbm(&cfg, 5).unwrap();
        assert_eq!(edge_homophily(&g).unwrap(), 1.0);

        let cfg = CsbmConfig {
            homophily: 0.0,
            num_nodes: 300,
            ..CsbmConfig::default()
        };
        let g = generate_csbm(&cfg, 5).unwrap();
        assert_eq!(edge_homophily(&g).unwrap(), 0.0);
    }

    #[test]
    fn homophily_knob_tracks_measured_homophily() {
        let cfg = CsbmConfig {
            homophily: 0.3,
            ..CsbmConfig::default()
        };
        let g = generate_csbm(&cfg, 7).unwrap();
        let h = edge_homophily(&g).unwrap();
        assert!((h - 0.3).abs() <= 0.05, "measured {h}");
    }

    #[test]
    fn drop_rate_is_negligible_at_default_size() {
        let (_, stats) = generate_csbm_with_stats(&CsbmConfig::default(), 3).unwrap();
        assert!(stats.drop_rate() < 0.01, "drop rate {}", stats.drop_rate());
    }

    #[test]
    fn singleton_classes_drop_rather_than_error() {
        let cfg = CsbmConfig {
            num_nodes: 3,
            num_classes: 3,
            homophily: 1.0,
            degree_min: 1,
            degree_max: 2,
            feature_dim: 2,
            ..CsbmConfig::default()
        };
        let (g, stats) = generate_csbm_with_stats(&cfg, 1).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(stats.dropped, stats.proposals);
    }

    #[test]
    fn class_means_separate_features() {
        let cfg = CsbmConfig {
            num_nodes: 500,
            class_std: 0.05,
            ..CsbmConfig::default()
        };
        let g = generate_csbm(&cfg, 9).unwrap();
        // With tiny noise, per-class feature centroids must be far apart
        // relative to the noise scale.
        let mut centroids = vec![vec![0.0; cfg.feature_dim]; cfg.num_classes];
        let mut counts = vec![0usize; cfg.num_classes];
        for u in 0..g.num_nodes() {
            let y = g.labels()[u];
            counts[y] += 1;
            for (acc, &x) in centroids[y].iter_mut().zip(g.features().row(u)) {
                *acc += x;
            }
        }
        for (cent, &count) in centroids.iter_mut().zip(&counts) {
            for x in cent.iter_mut() {
                *x /= count as f64;
            }
        }
        for a in 0..cfg.num_classes {
            for b in (a + 1)..cfg.num_classes {
                let dist: f64 = centroids[a]
                    .iter()
                    .zip(&centroids[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!(dist > 0.5, "classes {a} and {b} at distance {dist}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = CsbmConfig {
            homophily: 1.5,
            ..CsbmConfig::default()
        };
        assert!(generate_csbm(&bad, 0).is_err());
        let bad = CsbmConfig {
            degree_min: 11,
            degree_max: 10,
            ..CsbmConfig::default()
        };
        assert!(generate_csbm(&bad, 0).is_err());
        let bad = CsbmConfig {
            num_nodes: 5,
            degree_max: 10,
            ..CsbmConfig::default()
        };
        assert!(generate_csbm(&bad, 0).is_err());
    }
}
