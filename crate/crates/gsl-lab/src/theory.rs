//! Numeric checks of the two information-theoretic guarantees.
//!
//! The Fano side: no classifier can beat `(I(Y;H) + ln 2) / ln C` accuracy,
//! so every estimated-MI/accuracy pair from a sweep can be audited against
//! the bound (plus estimator slack). The data-processing side: aggregating
//! bases over *any* new structure is a channel, so the label information in
//! aggregated bases cannot exceed the information already in the bases.
//! Both are exact statements about true MI checked here with estimates,
//! hence the explicit slack constants carried in the records.

use std::fmt;
use std::str::FromStr;

use crate::construct::Structure;
use crate::error::{Error, Result};
use crate::graph::{mean_aggregate_pattern, normalize_presence};
use crate::matrix::DenseMatrix;
use crate::mi::{mi_discrete_continuous, MiConfig};
use crate::sparse::spmm;

/// Accuracy ceiling from mutual information: `min(1, (mi + ln 2) / ln C)`.
pub fn fano_bound(mi_nats: f64, num_classes: usize) -> Result<f64> {
    if num_classes < 2 {
        return Err(Error::validation(format!(
            "the accuracy bound needs at least 2 classes, got {num_classes}"
        )));
    }
    if mi_nats < 0.0 || mi_nats.is_nan() {
        return Err(Error::validation(format!(
            "mutual information must be non-negative, got {mi_nats}"
        )));
    }
    let bound = (mi_nats + std::f64::consts::LN_2) / (num_classes as f64).ln();
    Ok(bound.min(1.0))
}

/// One audited (MI, accuracy) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRecord {
    pub mi_nats: f64,
    pub num_classes: usize,
    pub bound: f64,
    pub observed_accuracy: f64,
    pub violated: bool,
    pub slack_used: f64,
}

impl BoundRecord {
    /// Audits `observed_accuracy` against the bound with `slack` headroom
    /// for estimator error.
    pub fn evaluate(
        mi_nats: f64,
        num_classes: usize,
        observed_accuracy: f64,
        slack: f64,
    ) -> Result<BoundRecord> {
        if !(0.0..=1.0).contains(&observed_accuracy) {
            return Err(Error::validation(format!(
                "accuracy must be in [0, 1], got {observed_accuracy}"
            )));
        }
        if slack < 0.0 || slack.is_nan() {
            return Err(Error::validation(format!(
                "slack must be non-negative, got {slack}"
            )));
        }
        let bound = fano_bound(mi_nats, num_classes)?;
        Ok(BoundRecord {
            mi_nats,
            num_classes,
            bound,
            observed_accuracy,
            violated: observed_accuracy > bound + slack,
            slack_used: slack,
        })
    }
}

/// How bases are pushed through the new structure for the channel check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Plain neighbor mean, ego excluded — the theorem's literal channel.
    Mean,
    /// Symmetric-normalized propagation with self-loop, B' = A_hat' B —
    /// the operator the sweep actually applies.
    SymNorm,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "sym-norm" => Ok(Aggregation::SymNorm),
            other => Err(Error::validation(format!(
                "unknown aggregation '{other}' (expected mean or sym-norm)"
            ))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::SymNorm => "sym-norm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpiOutcome {
    /// Estimated I(Y; B).
    pub i_b: f64,
    /// Estimated I(Y; B') where B' aggregates B over the new structure.
    pub i_b_prime: f64,
    /// `i_b - i_b_prime`; the inequality predicts this stays above
    /// estimator noise's negative reach.
    pub gap: f64,
}

/// Estimates label information before and after aggregating `bases` over a
/// learned structure. A negative `gap` beyond estimator slack would
/// contradict the data-processing inequality.
pub fn check_dpi(
    g_new: &Structure,
    bases: &DenseMatrix,
    labels: &[usize],
    aggregation: Aggregation,
    mi_cfg: &MiConfig,
) -> Result<DpiOutcome> {
    if g_new.num_nodes() != bases.rows() {
        return Err(Error::validation(format!(
            "structure has {} nodes but bases have {} rows",
            g_new.num_nodes(),
            bases.rows()
        )));
    }
    if !g_new.is_symmetric_pattern() {
        return Err(Error::validation(
            "learned structure is not symmetric; apply the symmetrize refinement first",
        ));
    }
    let b_prime = match aggregation {
        Aggregation::Mean => {
            let presence = g_new.adjacency().map_values(|_, _, _| 1.0);
            mean_aggregate_pattern(&presence, bases, false)?
        }
        Aggregation::SymNorm => {
            let prop = normalize_presence(&g_new.adjacency().map_values(|_, _, _| 1.0));
            spmm(&prop, bases)?
        }
    };
    let i_b = mi_discrete_continuous(bases, labels, mi_cfg)?;
    let i_b_prime = mi_discrete_continuous(&b_prime, labels, mi_cfg)?;
    Ok(DpiOutcome {
        i_b,
        i_b_prime,
        gap: i_b - i_b_prime,
    })
}
