//! Confusion-matrix metrics and threshold-sweep curves.
//!
//! Metrics whose denominator can vanish (sensitivity with no positive
//! labels, and so on) come back as `None` rather than poisoning the whole
//! report — a missing metric is information, not a crash.

use crate::audio::Label;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_pairs(decisions: &[Label], labels: &[Label]) -> Result<Self, EvalError> {
        if decisions.len() != labels.len() {
            return Err(EvalError::LengthMismatch { left: decisions.len(), right: labels.len() });
        }
        if decisions.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let mut c = ConfusionCounts::default();
        for (d, l) in decisions.iter().zip(labels) {
            match (d, l) {
                (Label::Chd, Label::Chd) => c.tp += 1,
                (Label::NonChd, Label::NonChd) => c.tn += 1,
                (Label::Chd, Label::NonChd) => c.fp += 1,
                (Label::NonChd, Label::Chd) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn confusion_metrics(decisions: &[Label], labels: &[Label]) -> Result<ConfusionMetrics, EvalError> {
    Ok(metrics_from_counts(&ConfusionCounts::from_pairs(decisions, labels)?))
}

pub fn metrics_from_counts(c: &ConfusionCounts) -> ConfusionMetrics {
    ConfusionMetrics {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Sorts sample indices by descending score and returns (order, positive
/// count, negative count).
fn ranked(scores: &[f64], labels: &[Label]) -> Result<(Vec<usize>, usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::InvalidProbability);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let pos = labels.iter().filter(|&&l| l == Label::Chd).count();
    Ok((order, pos, labels.len() - pos))
}

/// ROC curve (one point per distinct score threshold, ties grouped) and
/// trapezoidal area. Tie groups enter as a single diagonal segment, so tied
/// positive/negative pairs contribute half — the rank-statistic convention.
pub fn roc_auroc(scores: &[f64], labels: &[Label]) -> Result<(Vec<RocPoint>, f64), EvalError> {
    let (order, pos, neg) = ranked(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClassOnly);
    }
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut auroc = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tie group at this score.
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            match labels[order[j]] {
                Label::Chd => tp += 1,
                Label::NonChd => fp += 1,
            }
            j += 1;
        }
        let prev = *points.last().unwrap();
        let next = RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 };
        auroc += (next.fpr - prev.fpr) * (prev.tpr + next.tpr) / 2.0;
        points.push(next);
        i = j;
    }
    Ok((points, auroc))
}

/// Precision-recall curve (one point per distinct threshold, ties grouped)
/// and its step-wise area sum(dRecall * precision) — no interpolation.
pub fn pr_auprc(scores: &[f64], labels: &[Label]) -> Result<(Vec<PrPoint>, f64), EvalError> {
    let (order, pos, _neg) = ranked(scores, labels)?;
    if pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut points = Vec::new();
    let mut auprc = 0.0;
    let mut prev_recall = 0.0;
    let (mut tp, mut predicted) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == Label::Chd {
                tp += 1;
            }
            predicted += 1;
            j += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / predicted as f64;
        auprc += (recall - prev_recall) * precision;
        points.push(PrPoint { recall, precision });
        prev_recall = recall;
        i = j;
    }
    Ok((points, auprc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mann_whitney_u;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| if b == 1 { Label::Chd } else { Label::NonChd }).collect()
    }

    #[test]
    fn confusion_hand_example() {
        // TP=9, TN=9, FP=1, FN=1 -> everything 0.9.
        let mut decisions = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..9 {
            decisions.push(Label::Chd);
            truth.push(Label::Chd);
        }
        for _ in 0..9 {
            decisions.push(Label::NonChd);
            truth.push(Label::NonChd);
        }
        decisions.push(Label::Chd);
        truth.push(Label::NonChd);
        decisions.push(Label::NonChd);
        truth.push(Label::Chd);

        let m = confusion_metrics(&decisions, &truth).unwrap();
        assert!((m.accuracy - 0.9).abs() < 1e-12);
        assert!((m.sensitivity.unwrap() - 0.9).abs() < 1e-12);
        assert!((m.specificity.unwrap() - 0.9).abs() < 1e-12);
        assert!((m.f1.unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn all_correct_is_all_ones() {
        let truth = labels(&[1, 1, 0, 0]);
        let m = confusion_metrics(&truth, &truth).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.f1, Some(1.0));
    }

    #[test]
    fn missing_classes_make_metrics_undefined_not_fatal() {
        let truth = labels(&[0, 0]);
        let m = confusion_metrics(&labels(&[0, 1]), &truth).unwrap();
        assert_eq!(m.sensitivity, None); // no positive labels
        assert!(m.specificity.is_some());

        let truth = labels(&[1, 1]);
        let m = confusion_metrics(&labels(&[0, 0]), &truth).unwrap();
        assert_eq!(m.specificity, None); // no negative labels
        assert_eq!(m.f1, Some(0.0)); // 0/(0+0+2) is defined
    }

    #[test]
    fn perfect_ranking_has_full_areas() {
        let s = [0.9, 0.8, 0.3, 0.1];
        let l = labels(&[1, 1, 0, 0]);
        let (roc, auroc) = roc_auroc(&s, &l).unwrap();
        assert_eq!(auroc, 1.0);
        assert_eq!(roc.first().unwrap(), &RocPoint { fpr: 0.0, tpr: 0.0 });
        assert_eq!(roc.last().unwrap(), &RocPoint { fpr: 1.0, tpr: 1.0 });
        let (_, auprc) = pr_auprc(&s, &l).unwrap();
        assert_eq!(auprc, 1.0);
    }

    #[test]
    fn anti_ranking_quarter_example() {
        let s = [0.9, 0.8, 0.3, 0.1];
        let l = labels(&[0, 1, 0, 1]);
        let (_, auroc) = roc_auroc(&s, &l).unwrap();
        assert!((auroc - 0.25).abs() < 1e-12);
    }

    #[test]
    fn constant_scores_hit_chance_baselines() {
        let s = [0.4; 10];
        let l = labels(&[1, 1, 1, 0, 0, 0, 0, 0, 0, 0]);
        let (roc, auroc) = roc_auroc(&s, &l).unwrap();
        assert!((auroc - 0.5).abs() < 1e-12);
        assert_eq!(roc.len(), 2); // (0,0) and (1,1): one big tie group
        let (_, auprc) = pr_auprc(&s, &l).unwrap();
        assert!((auprc - 0.3).abs() < 1e-12); // prevalence
    }

    #[test]
    fn single_class_errors() {
        assert!(matches!(
            roc_auroc(&[0.1, 0.2], &labels(&[1, 1])),
            Err(EvalError::SingleClassOnly)
        ));
        assert!(matches!(
            pr_auprc(&[0.1, 0.2], &labels(&[0, 0])),
            Err(EvalError::NoPositives)
        ));
    }

    #[test]
    fn auroc_equals_rank_statistic_on_tied_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..60 {
            let n = rng.gen_range(4..40);
            // Coarse grid forces plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 / 5.0).collect();
            let lab: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            if lab.iter().all(|&b| b == 1) || lab.iter().all(|&b| b == 0) {
                continue;
            }
            let l = labels(&lab);
            let (_, auroc) = roc_auroc(&scores, &l).unwrap();
            let pos: Vec<f64> =
                scores.iter().zip(&lab).filter(|(_, &b)| b == 1).map(|(&s, _)| s).collect();
            let neg: Vec<f64> =
                scores.iter().zip(&lab).filter(|(_, &b)| b == 0).map(|(&s, _)| s).collect();
            let u = mann_whitney_u(&pos, &neg).unwrap().u_a;
            let expected = u / (pos.len() * neg.len()) as f64;
            assert!((auroc - expected).abs() < 1e-12, "{auroc} vs {expected}");
        }
    }

    #[test]
    fn auprc_matches_per_threshold_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let n = rng.gen_range(3..25);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            let lab: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            if !lab.contains(&1) {
                continue;
            }
            let l = labels(&lab);
            let (_, auprc) = pr_auprc(&scores, &l).unwrap();

            // Brute force: recount TP/FP at each distinct threshold.
            let mut thresholds: Vec<f64> = scores.clone();
            thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
            thresholds.dedup();
            let pos = lab.iter().filter(|&&b| b == 1).count() as f64;
            let mut brute = 0.0;
            let mut prev_recall = 0.0;
            for &t in &thresholds {
                let tp = scores
                    .iter()
                    .zip(&lab)
                    .filter(|(&s, &b)| s >= t && b == 1)
                    .count() as f64;
                let pred = scores.iter().filter(|&&s| s >= t).count() as f64;
                let recall = tp / pos;
                brute += (recall - prev_recall) * (tp / pred);
                prev_recall = recall;
            }
            assert!((auprc - brute).abs() < 1e-12);
        }
    }

    proptest! {
        /// accuracy = (sens*P + spec*N) / (P + N) whenever both are defined.
        #[test]
        fn accuracy_decomposes_by_class(
            pairs in proptest::collection::vec((0u8..2, 0u8..2), 2..40),
        ) {
            let decisions = labels(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let truth = labels(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let m = confusion_metrics(&decisions, &truth).unwrap();
            if let (Some(sens), Some(spec)) = (m.sensitivity, m.specificity) {
                let p = truth.iter().filter(|&&l| l == Label::Chd).count() as f64;
                let n = truth.len() as f64 - p;
                prop_assert!((m.accuracy - (sens * p + spec * n) / (p + n)).abs() < 1e-12);
            }
        }

        /// AUROC is invariant under strictly monotone score transforms.
        #[test]
        fn auroc_ignores_monotone_transforms(
            scores in proptest::collection::vec(-3.0f64..3.0, 4..30),
            bits in proptest::collection::vec(0u8..2, 4..30),
        ) {
            let n = scores.len().min(bits.len());
            let scores = &scores[..n];
            let bits = &bits[..n];
            prop_assume!(bits.contains(&0) && bits.contains(&1));
            let l = labels(bits);
            let (_, base) = roc_auroc(scores, &l).unwrap();
            let exp_scores: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let affine: Vec<f64> = scores.iter().map(|s| 2.5 * s + 7.0).collect();
            let (_, e) = roc_auroc(&exp_scores, &l).unwrap();
            let (_, a) = roc_auroc(&affine, &l).unwrap();
            prop_assert!((base - e).abs() < 1e-12);
            prop_assert!((base - a).abs() < 1e-12);
        }
    }
}
