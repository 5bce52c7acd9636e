//! Delta-confidence routing between auto-protocoling (AP, top-1) and
//! clinical decision support (CDS, top-k).
//!
//! Raw logits are shifted to a minimum of zero and scaled to sum to one.
//! `delta` is the gap between the two largest normalized scores; an order
//! with `delta >= threshold` is auto-protocoled.

use serde::{Deserialize, Serialize};

pub const DEFAULT_K: usize = 5;
pub const MAX_K: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RouterError {
    #[error("score vector needs at least 2 entries, got {0}")]
    VectorTooShort(usize),
    #[error("score vector contains a non-finite value")]
    NonFiniteInput,
    #[error("{logits} scores but {labels} labels")]
    ShapeMismatch { logits: usize, labels: usize },
    #[error("k = {k} outside [1, {n}]")]
    InvalidK { k: usize, n: usize },
    #[error("threshold must be a non-negative number, got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "AP")]
    AutoProtocol,
    #[serde(rename = "CDS")]
    DecisionSupport,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AutoProtocol => "AP",
            Mode::DecisionSupport => "CDS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedProtocol {
    pub label: String,
    pub index: usize,
    pub normalized_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedRecommendation {
    pub normalized_scores: Vec<f64>,
    pub delta: f64,
    pub mode: Mode,
    /// Length 1 in AP mode, `k` in CDS mode.
    pub ranked: Vec<RankedProtocol>,
    pub threshold_used: f64,
}

fn check_scores(v: &[f64]) -> Result<(), RouterError> {
    if v.len() < 2 {
        return Err(RouterError::VectorTooShort(v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(RouterError::NonFiniteInput);
    }
    Ok(())
}

/// `(v - min v) / Σ(v - min v)`; the uniform vector when all entries are equal.
pub fn normalize_scores(logits: &[f64]) -> Result<Vec<f64>, RouterError> {
    check_scores(logits)?;
    let min = logits.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = logits.iter().map(|&v| v - min).collect();
    let total: f64 = shifted.iter().sum();
    if total == 0.0 {
        let n = logits.len() as f64;
        return Ok(vec![1.0 / n; logits.len()]);
    }
    Ok(shifted.into_iter().map(|v| v / total).collect())
}

/// Largest minus second-largest entry.
pub fn compute_delta(normalized: &[f64]) -> Result<f64, RouterError> {
    check_scores(normalized)?;
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in normalized {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    Ok(first - second)
}

/// Indices sorted by score descending, ties by ascending index.
pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// 1-based position of `target` under [`rank_indices`] ordering.
pub fn rank_of(scores: &[f64], target: usize) -> usize {
    let t = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > t || (s == t && j < target))
        .count()
}

/// Normalize, compute delta, and pick AP (top-1) or CDS (top-`k`).
///
/// Ranking is taken from the raw logits so it is exactly the logit order;
/// normalization is an increasing affine map and cannot change it.
pub fn route(
    logits: &[f64],
    labels: &[String],
    threshold: f64,
    k: usize,
) -> Result<RoutedRecommendation, RouterError> {
    if logits.len() != labels.len() {
        return Err(RouterError::ShapeMismatch {
            logits: logits.len(),
            labels: labels.len(),
        });
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(RouterError::InvalidThreshold(threshold));
    }
    let normalized = normalize_scores(logits)?;
    if k == 0 || k > logits.len() {
        return Err(RouterError::InvalidK { k, n: logits.len() });
    }
    let delta = compute_delta(&normalized)?;
    let mode = if delta >= threshold {
        Mode::AutoProtocol
    } else {
        Mode::DecisionSupport
    };
    let take = match mode {
        Mode::AutoProtocol => 1,
        Mode::DecisionSupport => k,
    };
    let ranked = rank_indices(logits)
        .into_iter()
        .take(take)
        .map(|i| RankedProtocol {
            label: labels[i].clone(),
            index: i,
            normalized_score: normalized[i],
        })
        .collect();
    Ok(RoutedRecommendation {
        normalized_scores: normalized,
        delta,
        mode,
        ranked,
        threshold_used: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_scores(&[2.0, 1.0, 1.0, 0.0]).unwrap(),
            vec![0.5, 0.25, 0.25, 0.0]
        );
        assert_eq!(
            normalize_scores(&[3.0, 3.0, 3.0]).unwrap(),
            vec![1.0 / 3.0; 3]
        );
        assert_eq!(
            normalize_scores(&[1.0]),
            Err(RouterError::VectorTooShort(1))
        );
        assert_eq!(
            normalize_scores(&[1.0, f64::NAN]),
            Err(RouterError::NonFiniteInput)
        );
    }

    #[test]
    fn delta_examples() {
        assert_eq!(compute_delta(&[0.5, 0.25, 0.25, 0.0]).unwrap(), 0.25);
        assert_eq!(compute_delta(&[0.25; 4]).unwrap(), 0.0);
        assert_eq!(compute_delta(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(compute_delta(&[0.4, 0.4, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn route_examples() {
        let l = labels(4);
        let r = route(&[2.0, 1.0, 1.0, 0.0], &l, 0.25, 4).unwrap();
        assert_eq!(r.mode, Mode::AutoProtocol);
        assert_eq!(r.delta, 0.25);
        assert_eq!(r.ranked.len(), 1);
        assert_eq!(r.ranked[0].index, 0);

        let r = route(&[2.0, 1.0, 1.0, 0.0], &l, 0.3, 3).unwrap();
        assert_eq!(r.mode, Mode::DecisionSupport);
        let order: Vec<usize> = r.ranked.iter().map(|p| p.index).collect();
        assert_eq!(order, vec![0, 1, 2]);

        assert!(matches!(
            route(&[1.0, 2.0], &l, 0.1, 1),
            Err(RouterError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            route(&[1.0, 2.0, 3.0, 4.0], &l, 0.1, 0),
            Err(RouterError::InvalidK { .. })
        ));
        assert!(matches!(
            route(&[1.0, 2.0, 3.0, 4.0], &l, 0.1, 5),
            Err(RouterError::InvalidK { .. })
        ));
        assert!(matches!(
            route(&[1.0, 2.0, 3.0, 4.0], &l, -0.1, 1),
            Err(RouterError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn constant_logits_never_auto_protocol() {
        let r = route(&[0.7; 5], &labels(5), 1e-9, 5).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.mode, Mode::DecisionSupport);
        assert_eq!(
            route(&[0.7; 5], &labels(5), 0.0, 5).unwrap().mode,
            Mode::AutoProtocol
        );
    }

    #[test]
    fn rank_of_matches_rank_indices() {
        let s = [0.1, 0.3, 0.3, 0.0, 0.3];
        let order = rank_indices(&s);
        assert_eq!(order, vec![1, 2, 4, 0, 3]);
        for (pos, &i) in order.iter().enumerate() {
            assert_eq!(rank_of(&s, i), pos + 1);
        }
    }

    fn logits_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-20.0f64..20.0, 2..30)
    }

    proptest! {
        #[test]
        fn boundaries(v in logits_strategy()) {
            let l = labels(v.len());
            prop_assert_eq!(route(&v, &l, 0.0, 1).unwrap().mode, Mode::AutoProtocol);
            prop_assert_eq!(route(&v, &l, 1.0 + 1e-9, 1).unwrap().mode, Mode::DecisionSupport);
        }

        #[test]
        fn mode_monotone_in_threshold(v in logits_strategy(), a in 0.0f64..1.2, b in 0.0f64..1.2) {
            let l = labels(v.len());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let m_lo = route(&v, &l, lo, 1).unwrap().mode;
            let m_hi = route(&v, &l, hi, 1).unwrap().mode;
            prop_assert!(!(m_lo == Mode::DecisionSupport && m_hi == Mode::AutoProtocol));
        }

        #[test]
        fn full_k_is_permutation(v in logits_strategy()) {
            let l = labels(v.len());
            let r = route(&v, &l, 2.0, v.len()).unwrap();
            let mut idx: Vec<usize> = r.ranked.iter().map(|p| p.index).collect();
            prop_assert!(r.ranked.windows(2).all(|w| w[0].normalized_score >= w[1].normalized_score));
            idx.sort();
            prop_assert_eq!(idx, (0..v.len()).collect::<Vec<_>>());
        }

        #[test]
        fn normalized_order_matches_logit_order(v in logits_strategy()) {
            let n = normalize_scores(&v).unwrap();
            prop_assert_eq!(rank_indices(&n)[0], rank_indices(&v)[0]);
            let min = n.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min, 0.0);
            prop_assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
