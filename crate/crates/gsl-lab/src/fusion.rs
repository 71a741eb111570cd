//! Combining the original graph with a learned replacement before training.
//!
//! Four modes. `only-new` drops the original graph entirely; `early` unions
//! the edge sets into one graph before any training; the two `late` modes
//! run both graphs through branch stacks and merge embeddings in front of
//! the classifier — `late-shared` with one weight set (θ₁ = θ₂, mean
//! combine, forced by equal widths) and `late-separate` with independent
//! weights (θ₁ ≠ θ₂, concat combine).
//!
//! A `TrainingPlan` carries the resolved propagation matrices and wiring;
//! `train_with_plan` / `evaluate_with_plan` execute it on the shared
//! trainer. Degeneracy guarantees when the "new" graph equals the old one:
//! `early` reproduces baseline training bit for bit (the union is the same
//! graph), and `late-shared` collapses onto the single-branch model because
//! averaging two identical embeddings is the identity.

use std::fmt;
use std::str::FromStr;

use crate::construct::Structure;
use crate::error::{Error, Result};
use crate::graph::{build_graph, normalize_presence, normalized_adjacency, Graph};
use crate::matrix::DenseMatrix;
use crate::nn::{
    self, DataSplit, Model, ModelSpec, TrainConfig, TrainReport, Wiring,
};
use crate::sparse::CsrMatrix;

/// The combine operator is determined by the mode: late-shared averages
/// (equal widths force it), late-separate concatenates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionSpec {
    OnlyNew,
    EarlyUnion,
    LateShared,
    LateSeparate,
}

impl FromStr for FusionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "only-new" => Ok(FusionSpec::OnlyNew),
            "early" => Ok(FusionSpec::EarlyUnion),
            "late-shared" => Ok(FusionSpec::LateShared),
            "late-separate" => Ok(FusionSpec::LateSeparate),
            other => Err(Error::validation(format!(
                "unknown fusion '{other}' (expected only-new, early, late-shared, or late-separate)"
            ))),
        }
    }
}

impl fmt::Display for FusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FusionSpec::OnlyNew => "only-new",
            FusionSpec::EarlyUnion => "early",
            FusionSpec::LateShared => "late-shared",
            FusionSpec::LateSeparate => "late-separate",
        };
        f.write_str(s)
    }
}

/// Edge-union of the original graph and a learned structure; weights
/// collapse to presence. Node attributes come from the original graph.
pub fn fuse_graphs(g: &Graph, g_new: &Structure) -> Result<Graph> {
    if g.num_nodes() != g_new.num_nodes() {
        return Err(Error::validation(format!(
            "graphs have {} and {} nodes; union needs equal node counts",
            g.num_nodes(),
            g_new.num_nodes()
        )));
    }
    let mut edges = g.edge_list();
    for (u, v, _) in g_new.adjacency().iter_entries() {
        if u < v {
            edges.push((u, v));
        }
    }
    build_graph(
        &edges,
        g.num_nodes(),
        g.features().clone(),
        g.labels().to_vec(),
        g.num_classes(),
    )
}

/// Resolved execution recipe: normalized propagation matrices plus wiring.
#[derive(Debug, Clone)]
pub struct TrainingPlan {
    wiring: Wiring,
    props: Vec<CsrMatrix>,
}

impl TrainingPlan {
    pub fn wiring(&self) -> Wiring {
        self.wiring
    }

    /// Number of propagation sources the plan feeds the model.
    pub fn graph_count(&self) -> usize {
        self.props.len()
    }

    /// The propagation matrices the plan feeds the model, in branch order.
    pub fn props(&self) -> &[CsrMatrix] {
        &self.props
    }
}

/// Turns a fusion choice into concrete propagation matrices and a wiring.
///
/// The learned structure must be pattern-symmetric (constructions are;
/// refinements can break it — re-symmetrize first). Its weights are ignored
/// here: propagation always uses the presence-normalized adjacency, keeping
/// all four modes on the same operator family.
pub fn plan_training(fusion: FusionSpec, g: &Graph, g_new: &Structure) -> Result<TrainingPlan> {
    if g.num_nodes() != g_new.num_nodes() {
        return Err(Error::validation(format!(
            "graphs have {} and {} nodes; fusion needs equal node counts",
            g.num_nodes(),
            g_new.num_nodes()
        )));
    }
    if !g_new.is_symmetric_pattern() {
        return Err(Error::validation(
            "learned structure is not symmetric; apply the symmetrize refinement first",
        ));
    }
    let new_prop = normalize_presence(&g_new.adjacency().map_values(|_, _, _| 1.0));
    let plan = match fusion {
        FusionSpec::OnlyNew => TrainingPlan {
            wiring: Wiring::Single,
            props: vec![new_prop],
        },
        FusionSpec::EarlyUnion => {
            let fused = fuse_graphs(g, g_new)?;
            TrainingPlan {
                wiring: Wiring::Single,
                props: vec![normalized_adjacency(&fused)],
            }
        }
        FusionSpec::LateShared => TrainingPlan {
            wiring: Wiring::SharedPair,
            props: vec![normalized_adjacency(g), new_prop],
        },
        FusionSpec::LateSeparate => TrainingPlan {
            wiring: Wiring::SeparatePair,
            props: vec![normalized_adjacency(g), new_prop],
        },
    };
    Ok(plan)
}

/// Trains `spec` under a fusion plan. MLP models take no propagation, so
/// only graph-driven kinds (gcn, sgc) accept a plan.
pub fn train_with_plan(
    spec: &ModelSpec,
    inputs: &DenseMatrix,
    plan: &TrainingPlan,
    labels: &[usize],
    split: &DataSplit,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    nn::train_core(spec, inputs, plan.props(), plan.wiring, labels, split, cfg)
}

/// Accuracy of a plan-trained model on `node_set` (clean forward pass).
pub fn evaluate_with_plan(
    model: &Model,
    inputs: &DenseMatrix,
    plan: &TrainingPlan,
    labels: &[usize],
    node_set: &[usize],
) -> Result<f64> {
    if node_set.is_empty() {
        return Err(Error::validation("evaluation node set is empty"));
    }
    if labels.len() != inputs.rows() {
        return Err(Error::validation("labels do not match input rows"));
    }
    for &u in node_set {
        if u >= inputs.rows() {
            return Err(Error::validation(format!(
                "evaluation set references row {u}, inputs have {}",
                inputs.rows()
            )));
        }
    }
    let logits = model.logits_with_props(inputs, plan.props())?;
    Ok(nn::accuracy(&logits, labels, node_set))
}

/// Analytic-vs-numeric gradient agreement for a plan-wired model.
pub fn gradient_check_with_plan(
    spec: &ModelSpec,
    inputs: &DenseMatrix,
    plan: &TrainingPlan,
    labels: &[usize],
    train_set: &[usize],
    seed: u64,
) -> Result<f64> {
    nn::gradient_check_core(spec, inputs, plan.props(), plan.wiring, labels, train_set, seed)
}
