//! Bases matrices: the node representations a structure learner works from.
//!
//! Four choices, ordered by how much machinery they pull in:
//!
//! - `raw` — the feature matrix X unchanged;
//! - `agg:K` — K rounds of symmetric-normalized propagation, A_hat^K X;
//! - `mlp` — first-layer ReLU activations of a 2-layer MLP pretrained on the
//!   training split;
//! - `gcn` — the same extraction from a pretrained 2-layer GCN.
//!
//! Pretrained extraction always runs a clean forward pass (dropout off), so
//! a given trained model yields one bases matrix, bit for bit.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};
use crate::matrix::DenseMatrix;
use crate::nn::{train, DataSplit, ModelKind, ModelSpec, Optimizer, TrainConfig};
use crate::sparse::spmm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasesSpec {
    Raw,
    Aggregated { hops: usize },
    MlpPretrained,
    GcnPretrained,
}

impl FromStr for BasesSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(BasesSpec::Raw),
            "mlp" => Ok(BasesSpec::MlpPretrained),
            "gcn" => Ok(BasesSpec::GcnPretrained),
            other => {
                if let Some(h) = other.strip_prefix("agg:") {
                    let hops: usize = h
                        .parse()
                        .map_err(|_| Error::validation(format!("bad hop count in '{other}'")))?;
                    if hops == 0 {
                        return Err(Error::validation(
                            "aggregated bases need at least 1 hop (0 hops is just raw)",
                        ));
                    }
                    Ok(BasesSpec::Aggregated { hops })
                } else {
                    Err(Error::validation(format!(
                        "unknown bases '{other}' (expected raw, agg:K, mlp, or gcn)"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for BasesSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasesSpec::Raw => write!(f, "raw"),
            BasesSpec::Aggregated { hops } => write!(f, "agg:{hops}"),
            BasesSpec::MlpPretrained => write!(f, "mlp"),
            BasesSpec::GcnPretrained => write!(f, "gcn"),
        }
    }
}

/// Hyperparameters for the pretrained bases. Raw and aggregated bases
/// ignore this entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_hidden() -> usize {
    128
}
fn default_epochs() -> usize {
    1000
}
fn default_lr() -> f64 {
    1e-2
}
fn default_wd() -> f64 {
    5e-4
}
fn default_dropout() -> f64 {
    0.5
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            hidden: default_hidden(),
            epochs: default_epochs(),
            learning_rate: default_lr(),
            weight_decay: default_wd(),
            dropout: default_dropout(),
        }
    }
}

/// Materializes the bases matrix for `spec` over `graph`.
///
/// The split and seed matter only for the pretrained variants: the model
/// trains on `split.train` from initialization seeded by `seed`.
pub fn extract_bases(
    graph: &Graph,
    spec: &BasesSpec,
    pretrain: &PretrainConfig,
    split: &DataSplit,
    seed: u64,
) -> Result<DenseMatrix> {
    match *spec {
        BasesSpec::Raw => Ok(graph.features().clone()),
        BasesSpec::Aggregated { hops } => {
            if hops == 0 {
                return Err(Error::validation(
                    "aggregated bases need at least 1 hop (0 hops is just raw)",
                ));
            }
            let a_hat = normalized_adjacency(graph);
            let mut out = spmm(&a_hat, graph.features())?;
            for _ in 1..hops {
                out = spmm(&a_hat, &out)?;
            }
            Ok(out)
        }
        BasesSpec::MlpPretrained => pretrained(graph, ModelKind::Mlp, pretrain, split, seed),
        BasesSpec::GcnPretrained => pretrained(graph, ModelKind::Gcn, pretrain, split, seed),
    }
}

fn pretrained(
    graph: &Graph,
    kind: ModelKind,
    pretrain: &PretrainConfig,
    split: &DataSplit,
    seed: u64,
) -> Result<DenseMatrix> {
    let spec = ModelSpec {
        kind,
        layers: 2,
        hidden: pretrain.hidden,
        dropout: pretrain.dropout,
    };
    let cfg = TrainConfig {
        epochs: pretrain.epochs,
        learning_rate: pretrain.learning_rate,
        weight_decay: pretrain.weight_decay,
        optimizer: Optimizer::Adam,
        seed,
    };
    let graphs: Vec<&Graph> = match kind {
        ModelKind::Mlp => Vec::new(),
        _ => vec![graph],
    };
    let (model, _) = train(
        &spec,
        graph.features(),
        &graphs,
        graph.labels(),
        split,
        &cfg,
    )?;
    model.hidden_activations(graph.features(), &graphs)
}
