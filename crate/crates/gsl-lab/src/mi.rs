//! Mutual information between a continuous representation and discrete
//! labels, via the nearest-neighbor estimator for mixed variables.
//!
//! For each sample `i`, let `d_i` be the Chebyshev distance to its `k`-th
//! nearest neighbor among samples sharing its label, and let `m_i` count the
//! samples of any label lying strictly closer than `d_i`, sample `i` itself
//! included. The estimate in nats is
//!
//! `I = psi(N) - <psi(N_y)> + psi(k) - <psi(m)>`
//!
//! where the averages run over samples and `N_y` is the size of sample i's
//! label class. Counting the center sample keeps the estimator calibrated
//! (it is the standard `psi(count + 1)` convention written as one count);
//! when `d_i` is zero because of duplicate rows, `m_i` counts all samples at
//! distance exactly zero, which drives degenerate inputs like constant
//! features to a non-positive estimate instead of a spurious gain.
//!
//! All averages are accumulated over per-class and per-count histograms in
//! ascending order, so the result is invariant to sample order down to the
//! last bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiConfig {
    /// Neighbor order used for the same-label radius.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Clamp small negative estimates (pure estimator noise) to zero.
    #[serde(default = "default_clamp")]
    pub clamp_nonnegative: bool,
}

fn default_k() -> usize {
    3
}
fn default_clamp() -> bool {
    true
}

impl Default for MiConfig {
    fn default() -> Self {
        MiConfig {
            k: default_k(),
            clamp_nonnegative: default_clamp(),
        }
    }
}

/// Digamma function for positive arguments.
///
/// Small arguments are shifted up with `psi(x + 1) = psi(x) + 1/x` until
/// `x >= 6`, then the asymptotic series in `1/x^2` is applied. Absolute
/// error stays below 1e-10 over the positive axis.
pub fn digamma(x: f64) -> Result<f64> {
    if x <= 0.0 || x.is_nan() {
        return Err(Error::numeric(format!(
            "digamma domain error: argument {x} is not positive"
        )));
    }
    Ok(digamma_pos(x))
}

fn digamma_pos(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln x - 1/(2x) - sum of Bernoulli terms through x^{-10}.
    let series = x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2
                    * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    shift + series
}

/// Entropy of a label vector in nats.
pub fn label_entropy(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::validation("label entropy of an empty vector"));
    }
    let max = *labels.iter().max().unwrap();
    let mut counts = vec![0usize; max + 1];
    for &y in labels {
        counts[y] += 1;
    }
    let n = labels.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    Ok(h)
}

/// Nearest-neighbor estimate of `I(representation; labels)` in nats.
///
/// Preconditions: at least `2 * (k + 1)` samples, every label class with at
/// least `k + 1` members, finite entries. The estimate is clamped at zero
/// unless `cfg.clamp_nonnegative` is off.
pub fn mi_discrete_continuous(h: &DenseMatrix, labels: &[usize], cfg: &MiConfig) -> Result<f64> {
    let n = h.rows();
    let k = cfg.k;
    if k == 0 {
        return Err(Error::validation("neighbor order k must be at least 1"));
    }
    if labels.len() != n {
        return Err(Error::validation(format!(
            "{} labels for {} sample rows",
            labels.len(),
            n
        )));
    }
    if n < 2 * (k + 1) {
        return Err(Error::validation(format!(
            "need at least {} samples for k = {k}, got {n}",
            2 * (k + 1)
        )));
    }
    if h.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(
            "representation contains a non-finite entry",
        ));
    }

    let num_classes = labels.iter().max().unwrap() + 1;
    let mut class_counts = vec![0usize; num_classes];
    for &y in labels {
        class_counts[y] += 1;
    }
    for (class, &count) in class_counts.iter().enumerate() {
        if count > 0 && count <= k {
            return Err(Error::validation(format!(
                "class {class} has {count} samples, need more than k = {k}"
            )));
        }
    }

    // Histogram of the any-label counts m_i; psi values are then summed in
    // ascending count order, independent of sample order.
    let mut m_hist = vec![0usize; n + 1];
    let mut dist = vec![0.0f64; n];
    let mut same = Vec::with_capacity(n);
    for i in 0..n {
        let row_i = h.row(i);
        for (j, d) in dist.iter_mut().enumerate() {
            *d = chebyshev(row_i, h.row(j));
        }
        same.clear();
        for (j, &d) in dist.iter().enumerate() {
            if j != i && labels[j] == labels[i] {
                same.push(d);
            }
        }
        // k-th smallest same-label distance.
        let (_, kth, _) = same.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        let radius = *kth;
        let m = if radius > 0.0 {
            dist.iter().filter(|&&d| d < radius).count()
        } else {
            dist.iter().filter(|&&d| d == 0.0).count()
        };
        m_hist[m] += 1;
    }

    let psi_n = digamma_pos(n as f64);
    let psi_k = digamma_pos(k as f64);
    let inv_n = (n as f64).recip();
    let mut mean_psi_class = 0.0;
    for &count in class_counts.iter() {
        if count > 0 {
            mean_psi_class += count as f64 * inv_n * digamma_pos(count as f64);
        }
    }
    let mut mean_psi_m = 0.0;
    for (m, &freq) in m_hist.iter().enumerate() {
        if freq > 0 {
            mean_psi_m += freq as f64 * inv_n * digamma_pos(m as f64);
        }
    }

    let mut estimate = psi_n - mean_psi_class + psi_k - mean_psi_m;
    if cfg.clamp_nonnegative && estimate < 0.0 {
        estimate = 0.0;
    }
    Ok(estimate)
}

#[inline]
fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = (x - y).abs();
        if d > best {
            best = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const EULER_GAMMA: f64 = 0.5772156649015329;

    #[test]
    fn digamma_frozen_values() {
        // psi(1) = -gamma, psi(10) = -gamma + H_9, psi(0.5) = -gamma - 2 ln 2.
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-10);
        assert!((digamma(10.0).unwrap() - 2.251752589066721).abs() < 1e-10);
        assert!((digamma(0.5).unwrap() + EULER_GAMMA + 2.0 * 2.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn digamma_matches_harmonic_oracle_at_integers() {
        let mut harmonic = 0.0;
        for m in 1..=60usize {
            // psi(m) = -gamma + H_{m-1}; harmonic currently holds H_{m-1}.
            let oracle = -EULER_GAMMA + harmonic;
            let got = digamma(m as f64).unwrap();
            assert!(
                (got - oracle).abs() < 1e-10,
                "psi({m}) = {got}, oracle {oracle}"
            );
            harmonic += 1.0 / m as f64;
        }
    }

    #[test]
    fn digamma_recurrence_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = rng.gen_range(0.05..30.0);
            let lhs = digamma(x + 1.0).unwrap();
            let rhs = digamma(x).unwrap() + 1.0 / x;
            assert!((lhs - rhs).abs() < 1e-11, "recurrence broke at x = {x}");
        }
    }

    #[test]
    fn digamma_rejects_non_positive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-3.0).is_err());
        assert!(digamma(f64::NAN).is_err());
    }

    #[test]
    fn label_entropy_basics() {
        assert_eq!(label_entropy(&[2, 2, 2]).unwrap(), 0.0);
        let h = label_entropy(&[0, 1, 0, 1]).unwrap();
        assert!((h - 2.0f64.ln()).abs() < 1e-15);
        assert!(label_entropy(&[]).is_err());
    }

    fn two_gaussians(n: usize, separation: f64, seed: u64) -> (DenseMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % 2;
            let mean = if y == 0 { -separation } else { separation };
            let x: f64 = rng.sample(StandardNormal);
            rows.push(vec![mean + x]);
            labels.push(y);
        }
        (DenseMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separated_classes_recover_ln2() {
        let (h, y) = two_gaussians(400, 10.0, 3);
        let mi = mi_discrete_continuous(&h, &y, &MiConfig::default()).unwrap();
        assert!((mi - 2.0f64.ln()).abs() <= 0.05, "mi = {mi}");
    }

    #[test]
    fn independent_features_estimate_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 600;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let h = DenseMatrix::from_rows(&rows).unwrap();
        let cfg = MiConfig {
            clamp_nonnegative: false,
            ..MiConfig::default()
        };
        let mi = mi_discrete_continuous(&h, &labels, &cfg).unwrap();
        assert!(mi.abs() <= 0.1, "mi = {mi}");
    }

    #[test]
    fn constant_features_clamp_to_zero() {
        let h = DenseMatrix::zeros(60, 3);
        let y: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let mi = mi_discrete_continuous(&h, &y, &MiConfig::default()).unwrap();
        assert_eq!(mi, 0.0);
        let raw = mi_discrete_continuous(
            &h,
            &y,
            &MiConfig {
                clamp_nonnegative: false,
                ..MiConfig::default()
            },
        )
        .unwrap();
        assert!(raw < 0.0);
    }

    #[test]
    fn permutation_of_samples_changes_nothing() {
        let (h, y) = two_gaussians(120, 1.0, 5);
        let base = mi_discrete_continuous(&h, &y, &MiConfig::default()).unwrap();
        // Reverse sample order.
        let rows: Vec<Vec<f64>> = (0..h.rows()).rev().map(|i| h.row(i).to_vec()).collect();
        let perm_y: Vec<usize> = y.iter().rev().copied().collect();
        let perm_h = DenseMatrix::from_rows(&rows).unwrap();
        let permuted = mi_discrete_continuous(&perm_h, &perm_y, &MiConfig::default()).unwrap();
        assert_eq!(base.to_bits(), permuted.to_bits());
    }

    #[test]
    fn positive_scaling_leaves_estimate_unchanged() {
        let (h, y) = two_gaussians(150, 1.5, 6);
        let base = mi_discrete_continuous(&h, &y, &MiConfig::default()).unwrap();
        let scaled = h.map(|x| 3.0 * x);
        let other = mi_discrete_continuous(&scaled, &y, &MiConfig::default()).unwrap();
        assert!((base - other).abs() <= 1e-9);
    }

    #[test]
    fn small_classes_are_rejected_by_name() {
        let h = DenseMatrix::zeros(10, 1);
        let y = vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 1];
        let err = mi_discrete_continuous(&h, &y, &MiConfig::default()).unwrap_err();
        assert!(err.to_string().contains("class 1"), "{err}");
    }

    #[test]
    fn sample_floor_is_enforced() {
        let h = DenseMatrix::zeros(7, 1);
        let y = vec![0, 0, 0, 0, 1, 1, 1];
        assert!(mi_discrete_continuous(&h, &y, &MiConfig::default()).is_err());
    }
}
