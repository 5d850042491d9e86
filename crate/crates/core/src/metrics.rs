//! Evaluation metrics: accuracy, ROC AUC (Mann-Whitney, ties count half),
//! confusion matrix and the ROC curve.

use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("length mismatch: {predictions} predictions, {labels} labels")]
    Length { predictions: usize, labels: usize },
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("score is NaN")]
    NanScore,
}

fn check_pairs<T>(preds: &[T], labels: &[u8]) -> Result<(), MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::Length {
            predictions: preds.len(),
            labels: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Undefined("empty input"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(MetricError::InvalidLabel(bad));
    }
    Ok(())
}

pub fn accuracy(label_hats: &[u8], labels: &[u8]) -> Result<f64, MetricError> {
    let cm = confusion(label_hats, labels)?;
    Ok((cm.tp + cm.tn) as f64 / cm.total() as f64)
}

/// Rows are the true label, columns the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn matrix(&self) -> [[u64; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }
}

pub fn confusion(label_hats: &[u8], labels: &[u8]) -> Result<Confusion, MetricError> {
    check_pairs(label_hats, labels)?;
    if let Some(&bad) = label_hats.iter().find(|&&y| y > 1) {
        return Err(MetricError::InvalidLabel(bad));
    }
    let mut cm = Confusion::default();
    for (&p, &y) in label_hats.iter().zip(labels) {
        match (y, p) {
            (0, 0) => cm.tn += 1,
            (0, _) => cm.fp += 1,
            (_, 0) => cm.fn_ += 1,
            _ => cm.tp += 1,
        }
    }
    Ok(cm)
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(u64, u64), MetricError> {
    check_pairs(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::NanScore);
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::Undefined("AUC needs both classes"));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score; NaN was rejected upstream.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// Walks tie groups from the highest score down, yielding cumulative
/// `(false positives, true positives)` after each group.
fn tie_groups(scores: &[f64], labels: &[u8]) -> Vec<(u64, u64)> {
    let order = descending(scores);
    let mut out = Vec::new();
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((fp, tp));
    }
    out
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `O(n log n)` via tie-grouped sorting.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    let (pos, neg) = class_counts(scores, labels)?;
    // Twice the Mann-Whitney U, kept integral: a negative loses to every
    // positive in a strictly higher group (2 each) and ties its own group's (1 each).
    let mut twice_u: u128 = 0;
    let (mut prev_fp, mut prev_tp) = (0u64, 0u64);
    for (fp, tp) in tie_groups(scores, labels) {
        let group_neg = u128::from(fp - prev_fp);
        let group_pos = u128::from(tp - prev_tp);
        twice_u += group_neg * (2 * u128::from(prev_tp) + group_pos);
        prev_fp = fp;
        prev_tp = tp;
    }
    Ok(twice_u as f64 / (2.0 * pos as f64 * neg as f64))
}

/// `(fpr, tpr)` points: `(0, 0)`, one point per distinct score threshold
/// (descending), ending at `(1, 1)`.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>, MetricError> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    for (fp, tp) in tie_groups(scores, labels) {
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a polyline of `(x, y)` points.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub threshold: f64,
    pub accuracy: f64,
    pub auc_roc: f64,
    pub confusion: Confusion,
    pub roc_points: Vec<(f64, f64)>,
}

impl EvalReport {
    /// Labels predicted as `p >= threshold`.
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Self, MetricError> {
        let label_hats: Vec<u8> = scores.iter().map(|&p| u8::from(p >= threshold)).collect();
        let confusion = confusion(&label_hats, labels)?;
        let auc_roc = auc_roc(scores, labels)?;
        let roc_points = roc_curve(scores, labels)?;
        Ok(Self {
            n: labels.len(),
            threshold,
            accuracy: (confusion.tp + confusion.tn) as f64 / labels.len() as f64,
            auc_roc,
            confusion,
            roc_points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    total += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 1, 1, 0, 0, 1], &[1, 0, 1, 1, 0, 0, 1]).unwrap(), 1.0);
        let labels = [1, 0, 1, 0, 1, 1, 0, 0];
        let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        assert_eq!(accuracy(&flipped, &labels).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 1, 1, 0]).unwrap(), 0.75);
        assert_eq!(accuracy(&[], &[]), Err(MetricError::Undefined("empty input")));
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[0, 1, 0, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(cm.matrix(), [[2, 0], [0, 2]]);
        let cm = confusion(&[1; 6], &[0, 1, 0, 1, 0, 1]).unwrap();
        assert_eq!((cm.tn, cm.fp, cm.fn_, cm.tp), (0, 3, 0, 3));
        let cm = confusion(&[1, 0, 0, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!((cm.tn, cm.fp, cm.fn_, cm.tp), (1, 1, 1, 1));
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.9, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).unwrap(), 0.75);
        assert_eq!(brute_auc(&[0.9, 0.6, 0.4, 0.2], &[1, 0, 1, 0]), 0.75);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc_roc(&[0.1, 0.9], &[1, 1]), Err(MetricError::Undefined(_))));
        assert!(matches!(
            roc_curve(&[0.1, 0.9], &[0, 0]),
            Err(MetricError::Undefined(_))
        ));
        assert_eq!(auc_roc(&[f64::NAN, 0.9], &[1, 0]), Err(MetricError::NanScore));
    }

    #[test]
    fn roc_examples() {
        let pts = roc_curve(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap();
        assert!(pts.contains(&(0.0, 1.0)));
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        let flat = roc_curve(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(flat, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(trapezoid_area(&flat), 0.5);
    }

    #[test]
    fn report_is_consistent() {
        let r = EvalReport::from_scores(&[0.9, 0.2, 0.6, 0.4, 0.55], &[1, 0, 0, 1, 1], 0.5).unwrap();
        let cm = r.confusion;
        assert_eq!(cm.total(), 5);
        assert_eq!(r.accuracy, (cm.tp + cm.tn) as f64 / 5.0);
        assert_eq!((cm.tn, cm.fp, cm.fn_, cm.tp), (1, 1, 1, 2));
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..=500)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(prop_oneof![0.0f64..1.0, (0u8..10).prop_map(|v| f64::from(v) / 10.0)], n),
                    proptest::collection::vec(0u8..=1, n),
                )
            })
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    }

    proptest! {
        #[test]
        fn sorted_auc_matches_pair_counting((s, y) in scored()) {
            prop_assert!((auc_roc(&s, &y).unwrap() - brute_auc(&s, &y)).abs() <= 1e-12);
        }

        #[test]
        fn trapezoid_matches_pair_counting((s, y) in scored()) {
            let pts = roc_curve(&s, &y).unwrap();
            prop_assert!((trapezoid_area(&pts) - brute_auc(&s, &y)).abs() <= 1e-12);
            for w in pts.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        }

        #[test]
        fn auc_invariant_under_monotone_maps((s, y) in scored()) {
            let mapped: Vec<f64> = s.iter().map(|v| (3.0 * v - 1.0).exp()).collect();
            prop_assert_eq!(auc_roc(&s, &y).unwrap(), auc_roc(&mapped, &y).unwrap());
        }

        #[test]
        fn auc_complement_without_ties(y in proptest::collection::vec(0u8..=1, 2..200)) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            // Distinct scores by construction.
            let s: Vec<f64> = (0..y.len()).map(|i| ((i * 7919) % 10007) as f64 / 10007.0).collect();
            let flipped: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
            let a = auc_roc(&s, &y).unwrap();
            prop_assert!((auc_roc(&flipped, &y).unwrap() - (1.0 - a)).abs() <= 1e-12);
        }

        #[test]
        fn accuracy_is_trace_over_n(
            pairs in proptest::collection::vec((0u8..=1, 0u8..=1), 1..100)
        ) {
            let (p, y): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let cm = confusion(&p, &y).unwrap();
            prop_assert_eq!(cm.total() as usize, y.len());
            prop_assert_eq!(accuracy(&p, &y).unwrap(), (cm.tn + cm.tp) as f64 / y.len() as f64);
        }
    }
}
