//! Three-class stance scoring.

use serde::{Deserialize, Serialize};

use crate::decoding::{Branch, CalibratedThreshold, StanceDecision};
use crate::error::{Error, Result};
use crate::types::StanceLabel;

/// Counts indexed `[gold][predicted]` in label order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: &[(StanceLabel, StanceLabel)]) -> Self {
        let mut m = ConfusionMatrix::default();
        for (gold, pred) in pairs {
            m.counts[gold.index()][pred.index()] += 1;
        }
        m
    }

    pub fn support(&self, label: StanceLabel) -> u64 {
        self.counts[label.index()].iter().sum()
    }

    pub fn predicted(&self, label: StanceLabel) -> u64 {
        self.counts.iter().map(|row| row[label.index()]).sum()
    }

    pub fn true_positives(&self, label: StanceLabel) -> u64 {
        self.counts[label.index()][label.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: StanceLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: [ClassScores; 3],
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub support: u64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl F1Report {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let total = confusion.total();
        if total == 0 {
            return Err(Error::Scoring("nothing to score".into()));
        }
        let per_class = StanceLabel::ALL.map(|label| {
            let tp = confusion.true_positives(label);
            let support = confusion.support(label);
            let precision = ratio(tp, confusion.predicted(label));
            let recall = ratio(tp, support);
            // 2PR/(P+R) = 2TP/(predicted + support); zero when both are zero.
            let f1 = ratio(2 * tp, confusion.predicted(label) + support);
            ClassScores {
                label,
                precision,
                recall,
                f1,
                support,
            }
        });
        // Classes without support still count in the macro denominator.
        let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / 3.0;
        let weighted_f1 = per_class.iter().map(|c| c.support as f64 * c.f1).sum::<f64>() / total as f64;
        Ok(F1Report {
            per_class,
            macro_f1,
            weighted_f1,
            support: total,
            confusion,
        })
    }

    pub fn class(&self, label: StanceLabel) -> &ClassScores {
        &self.per_class[label.index()]
    }
}

/// Scores `(gold, predicted)` pairs.
pub fn score(pairs: &[(StanceLabel, StanceLabel)]) -> Result<F1Report> {
    if pairs.is_empty() {
        return Err(Error::Scoring("cannot score an empty prediction list".into()));
    }
    F1Report::from_confusion(ConfusionMatrix::from_pairs(pairs))
}

/// Reports for the low-PU (aggressive-eligible) and high-PU partitions.
/// An empty partition yields `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuSplitReport {
    pub low: Option<F1Report>,
    pub high: Option<F1Report>,
    pub low_count: usize,
    pub high_count: usize,
}

pub fn pu_split_eval(
    decisions: &[(StanceDecision, StanceLabel)],
    threshold: &CalibratedThreshold,
) -> Result<PuSplitReport> {
    split_report(decisions, |d| threshold.admits(d.pu))
}

/// Same partition keyed on the branch each decision took, which also covers
/// per-category thresholds.
pub fn pu_split_by_branch(decisions: &[(StanceDecision, StanceLabel)]) -> Result<PuSplitReport> {
    split_report(decisions, |d| d.branch == Branch::Aggressive)
}

fn split_report(
    decisions: &[(StanceDecision, StanceLabel)],
    is_low: impl Fn(&StanceDecision) -> bool,
) -> Result<PuSplitReport> {
    let mut low = Vec::new();
    let mut high = Vec::new();
    for (d, gold) in decisions {
        if is_low(d) {
            low.push((*gold, d.label));
        } else {
            high.push((*gold, d.label));
        }
    }
    let report = |pairs: &[(StanceLabel, StanceLabel)]| -> Result<Option<F1Report>> {
        if pairs.is_empty() {
            Ok(None)
        } else {
            score(pairs).map(Some)
        }
    };
    Ok(PuSplitReport {
        low: report(&low)?,
        high: report(&high)?,
        low_count: low.len(),
        high_count: high.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Split;
    use proptest::prelude::*;
    use StanceLabel::{Dovish as D, Hawkish as H, Neutral as N};

    /// Per-class F1 from explicit TP/FP/FN counting, one pass per class.
    fn brute_force(pairs: &[(StanceLabel, StanceLabel)]) -> (f64, f64, [f64; 3]) {
        let mut f1s = [0.0; 3];
        let mut supports = [0usize; 3];
        for (i, class) in StanceLabel::ALL.iter().enumerate() {
            let tp = pairs.iter().filter(|(g, p)| g == class && p == class).count();
            let fp = pairs.iter().filter(|(g, p)| g != class && p == class).count();
            let fn_ = pairs.iter().filter(|(g, p)| g == class && p != class).count();
            supports[i] = tp + fn_;
            let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            f1s[i] = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
        }
        let macro_f1 = f1s.iter().sum::<f64>() / 3.0;
        let weighted = (0..3).map(|i| supports[i] as f64 * f1s[i]).sum::<f64>() / pairs.len() as f64;
        (macro_f1, weighted, f1s)
    }

    #[test]
    fn perfect_predictions() {
        let pairs = [(H, H), (D, D), (N, N), (N, N)];
        let r = score(&pairs).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.weighted_f1, 1.0);
    }

    #[test]
    fn absent_class_counts_in_macro() {
        let pairs = [(H, H), (H, D), (D, D)];
        let r = score(&pairs).unwrap();
        assert!((r.class(H).f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.class(D).f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.class(N).f1, 0.0);
        assert_eq!(r.class(N).support, 0);
        assert!((r.macro_f1 - 4.0 / 9.0).abs() < 1e-15);
        assert!((r.weighted_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(score(&[]), Err(Error::Scoring(_))));
    }

    fn decision(pu: f64, label: StanceLabel) -> StanceDecision {
        StanceDecision {
            label,
            pu,
            branch: Branch::Aggressive,
            sampled: false,
        }
    }

    fn threshold(cutoff: f64) -> CalibratedThreshold {
        CalibratedThreshold {
            pu_cutoff: cutoff,
            source_split: Split::Validation,
            percentile: 0.9,
        }
    }

    #[test]
    fn pu_split_degenerate_partitions() {
        let ds = vec![(decision(0.1, H), H), (decision(0.2, D), N)];
        let r = pu_split_eval(&ds, &threshold(1.0)).unwrap();
        assert!(r.high.is_none());
        let all = score(&[(H, H), (N, D)]).unwrap();
        assert_eq!(r.low.unwrap(), all);

        let r = pu_split_eval(&[(decision(5.0, H), H)], &threshold(1.0)).unwrap();
        assert!(r.low.is_none());
        assert_eq!(r.high_count, 1);
    }

    #[test]
    fn noisy_high_pu_scores_lower() {
        // Low PU: always correct. High PU: every other label wrong.
        let mut ds = Vec::new();
        for i in 0..30 {
            let gold = StanceLabel::ALL[i % 3];
            ds.push((decision(0.01, gold), gold));
            let pred = if i % 2 == 0 { gold } else { StanceLabel::ALL[(i + 1) % 3] };
            ds.push((decision(0.5, pred), gold));
        }
        let r = pu_split_eval(&ds, &threshold(0.1)).unwrap();
        assert!(r.low.as_ref().unwrap().macro_f1 > r.high.as_ref().unwrap().macro_f1);
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(StanceLabel, StanceLabel)>> {
        let label = prop::sample::select(StanceLabel::ALL.to_vec());
        prop::collection::vec((label.clone(), label), 1..200)
    }

    proptest! {
        #[test]
        fn matches_brute_force(pairs in arb_pairs()) {
            let r = score(&pairs).unwrap();
            let (m, w, f1s) = brute_force(&pairs);
            prop_assert!((r.macro_f1 - m).abs() <= 1e-12);
            prop_assert!((r.weighted_f1 - w).abs() <= 1e-12);
            for l in StanceLabel::ALL {
                prop_assert!((r.class(l).f1 - f1s[l.index()]).abs() <= 1e-12);
            }
        }

        #[test]
        fn scores_are_bounded(pairs in arb_pairs()) {
            let r = score(&pairs).unwrap();
            let present: Vec<f64> = r.per_class.iter().filter(|c| c.support > 0).map(|c| c.f1).collect();
            let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((0.0..=1.0).contains(&r.macro_f1));
            prop_assert!(r.weighted_f1 >= lo - 1e-12 && r.weighted_f1 <= hi + 1e-12);
        }

        #[test]
        fn permutation_invariant(pairs in arb_pairs()) {
            let mut rev = pairs.clone();
            rev.reverse();
            prop_assert_eq!(score(&pairs).unwrap(), score(&rev).unwrap());
        }

        #[test]
        fn relabeling_preserves_macro(pairs in arb_pairs(), perm in Just([1usize, 2, 0])) {
            let map = |l: StanceLabel| StanceLabel::ALL[perm[l.index()]];
            let relabeled: Vec<_> = pairs.iter().map(|(g, p)| (map(*g), map(*p))).collect();
            let a = score(&pairs).unwrap().macro_f1;
            let b = score(&relabeled).unwrap().macro_f1;
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
