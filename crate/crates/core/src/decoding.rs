//! PU-threshold calibration and aggressive/conservative strategy dispatch.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evidence::{build_evidence_set_with, EvidenceOptions, EvidenceSet, LabelMap, LogitRecord};
use crate::types::{Category, Split, StanceLabel};
use crate::uncertainty::{score_evidence, UncertaintyScores};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggressiveStrategy {
    /// Label of the single highest-evidence candidate token.
    GreedyCandidate,
    /// Argmax over the three label aggregates.
    GreedyCluster,
}

impl AggressiveStrategy {
    pub const ALL: [AggressiveStrategy; 2] = [AggressiveStrategy::GreedyCandidate, AggressiveStrategy::GreedyCluster];

    pub fn as_str(self) -> &'static str {
        match self {
            AggressiveStrategy::GreedyCandidate => "greedy_candidate",
            AggressiveStrategy::GreedyCluster => "greedy_cluster",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConservativeStrategy {
    /// Tempered draw between the two highest-evidence candidate tokens.
    CandidateSampling,
    /// Tempered draw between the two highest label aggregates.
    ClusterSampling,
    /// Always NEUTRAL.
    NeutralFallback,
}

impl ConservativeStrategy {
    pub const ALL: [ConservativeStrategy; 3] = [
        ConservativeStrategy::CandidateSampling,
        ConservativeStrategy::ClusterSampling,
        ConservativeStrategy::NeutralFallback,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConservativeStrategy::CandidateSampling => "candidate_sampling",
            ConservativeStrategy::ClusterSampling => "cluster_sampling",
            ConservativeStrategy::NeutralFallback => "neutral_fallback",
        }
    }

    pub fn uses_temperature(self) -> bool {
        !matches!(self, ConservativeStrategy::NeutralFallback)
    }
}

macro_rules! parse_by_name {
    ($ty:ty) => {
        impl std::str::FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                <$ty>::ALL
                    .into_iter()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| format!("unknown strategy `{s}`"))
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

parse_by_name!(AggressiveStrategy);
parse_by_name!(ConservativeStrategy);

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// One point of the decoding hyperparameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingPolicy {
    pub k: usize,
    pub threshold_percentile: f64,
    pub temperature: f64,
    pub aggressive: AggressiveStrategy,
    pub conservative: ConservativeStrategy,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
}

impl Default for DecodingPolicy {
    /// The best validation configuration reported for greedy-candidate with
    /// candidate sampling.
    fn default() -> Self {
        DecodingPolicy {
            k: 10,
            threshold_percentile: 0.8,
            temperature: 0.4,
            aggressive: AggressiveStrategy::GreedyCandidate,
            conservative: ConservativeStrategy::CandidateSampling,
            base_seed: DEFAULT_SEED,
        }
    }
}

impl DecodingPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("policy k must be at least 1".into()));
        }
        if !(self.threshold_percentile > 0.0 && self.threshold_percentile <= 1.0) {
            return Err(Error::Config(format!(
                "threshold percentile {} outside (0, 1]",
                self.threshold_percentile
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature {} must be positive", self.temperature)));
        }
        Ok(())
    }

    /// Total order used for deterministic tie-breaks between policies.
    pub fn lexicographic_cmp(&self, other: &Self) -> Ordering {
        self.aggressive
            .cmp(&other.aggressive)
            .then(self.conservative.cmp(&other.conservative))
            .then(self.k.cmp(&other.k))
            .then(self.threshold_percentile.total_cmp(&other.threshold_percentile))
            .then(self.temperature.total_cmp(&other.temperature))
            .then(self.base_seed.cmp(&other.base_seed))
    }
}

/// PU cutoff derived from a calibration split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedThreshold {
    pub pu_cutoff: f64,
    pub source_split: Split,
    pub percentile: f64,
}

impl CalibratedThreshold {
    /// Whether a PU takes the aggressive branch. The zero-evidence sentinel
    /// never does; at percentile 1 every finite PU does.
    pub fn admits(&self, pu: f64) -> bool {
        pu.is_finite() && (self.percentile >= 1.0 || pu <= self.pu_cutoff)
    }
}

/// Slack on ⌈p·n⌉ so decimal grid values such as 0.7 · 10 land on 7.
const RANK_SLACK: f64 = 1e-9;

/// Nearest-rank percentile of the calibration PUs: the ⌈p·n⌉-th smallest.
///
/// Sentinel PUs take part in the ranking but never become the cutoff; if the
/// chosen rank falls on one, the largest finite PU is used instead.
pub fn calibrate_threshold(validation_pus: &[f64], percentile: f64) -> Result<CalibratedThreshold> {
    calibrate_threshold_from(validation_pus, percentile, Split::Validation)
}

pub fn calibrate_threshold_from(pus: &[f64], percentile: f64, source_split: Split) -> Result<CalibratedThreshold> {
    if pus.is_empty() {
        return Err(Error::Calibration("no PU values to calibrate on".into()));
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::Calibration(format!("percentile {percentile} outside (0, 1]")));
    }
    if pus.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(Error::Calibration("PU values must be nonnegative numbers".into()));
    }
    let mut sorted = pus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((percentile * n as f64 - RANK_SLACK).ceil() as usize).clamp(1, n);
    let mut cutoff = sorted[rank - 1];
    if !cutoff.is_finite() {
        cutoff = sorted.iter().rev().copied().find(|p| p.is_finite()).unwrap_or(0.0);
    }
    Ok(CalibratedThreshold {
        pu_cutoff: cutoff,
        source_split,
        percentile,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationScope {
    #[default]
    Global,
    /// One cutoff per communication category; categories absent from the
    /// calibration split use the global cutoff.
    PerCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub global: CalibratedThreshold,
    pub per_category: BTreeMap<Category, CalibratedThreshold>,
}

impl ThresholdTable {
    pub fn for_category(&self, category: Category) -> &CalibratedThreshold {
        self.per_category.get(&category).unwrap_or(&self.global)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Aggressive,
    Conservative,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Aggressive => "aggressive",
            Branch::Conservative => "conservative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceDecision {
    pub label: StanceLabel,
    pub pu: f64,
    pub branch: Branch,
    /// A random draw decided the label.
    pub sampled: bool,
}

pub fn greedy_candidate(ev: &EvidenceSet) -> StanceLabel {
    match ev.candidates_by_evidence().first() {
        Some(&rank) => ev.candidate_label(rank),
        None => ev.top_label(),
    }
}

pub fn greedy_cluster(ev: &EvidenceSet) -> StanceLabel {
    ev.top_label()
}

pub fn greedy(ev: &EvidenceSet, strategy: AggressiveStrategy) -> StanceLabel {
    match strategy {
        AggressiveStrategy::GreedyCandidate => greedy_candidate(ev),
        AggressiveStrategy::GreedyCluster => greedy_cluster(ev),
    }
}

/// Probability that a tempered two-point softmax picks the first entry.
pub fn top2_first_probability(first: f64, second: f64, temperature: f64) -> f64 {
    1.0 / (1.0 + ((second - first) / temperature).exp())
}

/// Draws one of two labels with probability ∝ exp(evidence / temperature).
pub fn sample_top2<R: Rng + ?Sized>(
    first: (StanceLabel, f64),
    second: (StanceLabel, f64),
    temperature: f64,
    rng: &mut R,
) -> Result<StanceLabel> {
    if !(temperature > 0.0) {
        return Err(Error::Config(format!("temperature {temperature} must be positive")));
    }
    let p_first = top2_first_probability(first.1, second.1, temperature);
    let u: f64 = rng.random();
    Ok(if u < p_first { first.0 } else { second.0 })
}

fn conservative_label<R: Rng + ?Sized>(
    ev: &EvidenceSet,
    policy: &DecodingPolicy,
    rng: &mut R,
) -> Result<(StanceLabel, bool)> {
    match policy.conservative {
        ConservativeStrategy::NeutralFallback => Ok((StanceLabel::Neutral, false)),
        ConservativeStrategy::CandidateSampling => {
            let order = ev.candidates_by_evidence();
            match order.as_slice() {
                [] => Ok((ev.top_label(), false)),
                [only] => Ok((ev.candidate_label(*only), false)),
                [a, b, ..] => {
                    let first = (ev.candidate_label(*a), ev.candidates[*a].evidence);
                    let second = (ev.candidate_label(*b), ev.candidates[*b].evidence);
                    Ok((sample_top2(first, second, policy.temperature, rng)?, true))
                }
            }
        }
        ConservativeStrategy::ClusterSampling => {
            let ranked = ev.labels_by_evidence();
            Ok((sample_top2(ranked[0], ranked[1], policy.temperature, rng)?, true))
        }
    }
}

pub fn decide_stance<R: Rng + ?Sized>(
    ev: &EvidenceSet,
    scores: &UncertaintyScores,
    threshold: &CalibratedThreshold,
    policy: &DecodingPolicy,
    rng: &mut R,
) -> Result<StanceDecision> {
    if threshold.admits(scores.pu) {
        Ok(StanceDecision {
            label: greedy(ev, policy.aggressive),
            pu: scores.pu,
            branch: Branch::Aggressive,
            sampled: false,
        })
    } else {
        let (label, sampled) = conservative_label(ev, policy, rng)?;
        Ok(StanceDecision {
            label,
            pu: scores.pu,
            branch: Branch::Conservative,
            sampled,
        })
    }
}

/// Random stream for one record, keyed by the base seed and the record id so
/// results do not depend on evaluation order.
pub fn record_stream(base_seed: u64, record_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"stancepu.decision.v1");
    hasher.update(base_seed.to_le_bytes());
    hasher.update(record_id.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// A record with its evidence and uncertainty at one K.
#[derive(Debug, Clone)]
pub struct ScoredRecord<'a> {
    pub record: &'a LogitRecord,
    pub evidence: EvidenceSet,
    pub scores: UncertaintyScores,
}

pub fn score_records<'a>(
    records: &'a [LogitRecord],
    map: &LabelMap,
    k: usize,
    options: EvidenceOptions,
) -> Result<Vec<ScoredRecord<'a>>> {
    records
        .par_iter()
        .map(|record| {
            let evidence = build_evidence_set_with(record, map, k, options)?;
            let scores = score_evidence(&evidence)?;
            Ok(ScoredRecord {
                record,
                evidence,
                scores,
            })
        })
        .collect()
}

pub fn calibrate(
    calibration: &[ScoredRecord<'_>],
    percentile: f64,
    scope: CalibrationScope,
) -> Result<ThresholdTable> {
    let split = calibration.first().map_or(Split::Validation, |s| s.record.split);
    let pus: Vec<f64> = calibration.iter().map(|s| s.scores.pu).collect();
    let global = calibrate_threshold_from(&pus, percentile, split)?;
    let mut per_category = BTreeMap::new();
    if scope == CalibrationScope::PerCategory {
        let mut grouped: BTreeMap<Category, Vec<f64>> = BTreeMap::new();
        for s in calibration {
            grouped.entry(s.record.category).or_default().push(s.scores.pu);
        }
        for (category, pus) in grouped {
            per_category.insert(category, calibrate_threshold_from(&pus, percentile, split)?);
        }
    }
    Ok(ThresholdTable { global, per_category })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordDecision {
    pub id: String,
    pub category: Category,
    pub gold: Option<StanceLabel>,
    pub decision: StanceDecision,
}

pub fn decide_record(scored: &ScoredRecord<'_>, thresholds: &ThresholdTable, policy: &DecodingPolicy) -> Result<RecordDecision> {
    let mut rng = record_stream(policy.base_seed, &scored.record.id);
    let threshold = thresholds.for_category(scored.record.category);
    let decision = decide_stance(&scored.evidence, &scored.scores, threshold, policy, &mut rng)?;
    Ok(RecordDecision {
        id: scored.record.id.clone(),
        category: scored.record.category,
        gold: scored.record.gold_label,
        decision,
    })
}

pub fn decide_all(
    scored: &[ScoredRecord<'_>],
    thresholds: &ThresholdTable,
    policy: &DecodingPolicy,
) -> Result<Vec<RecordDecision>> {
    policy.validate()?;
    scored
        .par_iter()
        .map(|s| decide_record(s, thresholds, policy))
        .collect()
}

/// Standalone greedy decoder, no uncertainty involved.
pub fn greedy_decode_all(
    records: &[LogitRecord],
    map: &LabelMap,
    k: usize,
    options: EvidenceOptions,
    strategy: AggressiveStrategy,
) -> Result<Vec<(String, StanceLabel)>> {
    records
        .iter()
        .map(|r| {
            let ev = build_evidence_set_with(r, map, k, options)?;
            Ok((r.id.clone(), greedy(&ev, strategy)))
        })
        .collect()
}
