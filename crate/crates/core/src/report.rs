//! Evaluation of a fixed policy and the merged report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::decoding::{calibrate, decide_all, score_records, DecodingPolicy, RecordDecision, ThresholdTable};
use crate::error::Result;
use crate::evidence::{LabelMap, LogitRecord};
use crate::io::Provenance;
use crate::metrics::{pu_split_by_branch, score, F1Report, PuSplitReport};
use crate::search::{require_gold, SearchOptions, SearchPoint, SensitivityRow};
use crate::stats::SweepRow;
use crate::types::Category;

/// Calibrates on `calibration` and decodes `evaluated` with a fixed policy.
pub fn decode_with_policy(
    calibration: &[LogitRecord],
    evaluated: &[LogitRecord],
    map: &LabelMap,
    policy: &DecodingPolicy,
    options: SearchOptions,
) -> Result<(ThresholdTable, Vec<RecordDecision>)> {
    policy.validate()?;
    let cal = score_records(calibration, map, policy.k, options.evidence)?;
    let table = calibrate(&cal, policy.threshold_percentile, options.scope)?;
    let scored = score_records(evaluated, map, policy.k, options.evidence)?;
    let decisions = decide_all(&scored, &table, policy)?;
    Ok((table, decisions))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub policy: DecodingPolicy,
    pub thresholds: ThresholdTable,
    pub records: usize,
    pub zero_evidence: usize,
    pub overall: F1Report,
    pub per_category: BTreeMap<Category, F1Report>,
    pub pu_split: PuSplitReport,
}

pub fn evaluate_policy(
    calibration: &[LogitRecord],
    evaluated: &[LogitRecord],
    map: &LabelMap,
    policy: &DecodingPolicy,
    options: SearchOptions,
) -> Result<(Vec<RecordDecision>, EvalReport)> {
    require_gold(evaluated)?;
    let (thresholds, decisions) = decode_with_policy(calibration, evaluated, map, policy, options)?;
    let pairs: Vec<_> = decisions
        .iter()
        .map(|d| (d.decision, d.gold.expect("gold checked")))
        .collect();
    let overall = score(&pairs.iter().map(|(d, g)| (*g, d.label)).collect::<Vec<_>>())?;
    let mut by_cat: BTreeMap<Category, Vec<_>> = BTreeMap::new();
    for d in &decisions {
        by_cat
            .entry(d.category)
            .or_default()
            .push((d.gold.expect("gold checked"), d.decision.label));
    }
    let per_category = by_cat
        .into_iter()
        .map(|(c, pairs)| Ok((c, score(&pairs)?)))
        .collect::<Result<_>>()?;
    let report = EvalReport {
        policy: *policy,
        thresholds,
        records: decisions.len(),
        zero_evidence: decisions.iter().filter(|d| !d.decision.pu.is_finite()).count(),
        overall,
        per_category,
        pu_split: pu_split_by_branch(&pairs)?,
    };
    Ok((decisions, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub eval: EvalReport,
    pub sweep: Vec<SweepRow>,
    pub best: SearchPoint,
    pub sensitivity: Vec<SensitivityRow>,
    pub provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, FixtureConfig};
    use crate::types::Split;

    #[test]
    fn eval_partitions_agree_with_branches() {
        let records = generate(&FixtureConfig::default());
        let (val, test): (Vec<_>, Vec<_>) = records
            .into_iter()
            .filter(|r| r.split != Split::Train)
            .partition(|r| r.split == Split::Validation);
        let policy = DecodingPolicy::default();
        let map = LabelMap::default_vocabulary();
        let (decisions, r) = evaluate_policy(&val, &test, &map, &policy, SearchOptions::default()).unwrap();
        assert_eq!(r.records, test.len());
        assert_eq!(r.pu_split.low_count + r.pu_split.high_count, test.len());
        let aggressive = decisions
            .iter()
            .filter(|d| r.thresholds.global.admits(d.decision.pu))
            .count();
        assert_eq!(aggressive, r.pu_split.low_count);
        let support: u64 = r.per_category.values().map(|f| f.support).sum();
        assert_eq!(support, r.overall.support);
    }
}
