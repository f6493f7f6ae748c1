//! Offline replay of saved logit records across the decoding grid.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoding::{
    calibrate, decide_record, score_records, AggressiveStrategy, CalibrationScope, ConservativeStrategy,
    DecodingPolicy, ScoredRecord, ThresholdTable, DEFAULT_SEED,
};
use crate::error::{Error, Result};
use crate::evidence::{EvidenceOptions, LabelMap, LogitRecord};
use crate::metrics::{score, F1Report};
use crate::types::StanceLabel;

pub const DEFAULT_KS: [usize; 6] = [3, 10, 15, 20, 25, 30];
pub const DEFAULT_PERCENTILES: [f64; 7] = [1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7];
pub const DEFAULT_TEMPERATURES: [f64; 8] = [0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StrategyPair {
    pub aggressive: AggressiveStrategy,
    pub conservative: ConservativeStrategy,
}

impl StrategyPair {
    pub fn all() -> Vec<StrategyPair> {
        AggressiveStrategy::ALL
            .iter()
            .flat_map(|&aggressive| {
                ConservativeStrategy::ALL.iter().map(move |&conservative| StrategyPair {
                    aggressive,
                    conservative,
                })
            })
            .collect()
    }

    pub fn of(policy: &DecodingPolicy) -> Self {
        StrategyPair {
            aggressive: policy.aggressive,
            conservative: policy.conservative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub ks: Vec<usize>,
    pub percentiles: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub strategy_pairs: Vec<StrategyPair>,
    pub base_seed: u64,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            ks: DEFAULT_KS.to_vec(),
            percentiles: DEFAULT_PERCENTILES.to_vec(),
            temperatures: DEFAULT_TEMPERATURES.to_vec(),
            strategy_pairs: StrategyPair::all(),
            base_seed: DEFAULT_SEED,
        }
    }
}

impl HyperGrid {
    /// Parses a TOML grid; absent keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: HyperGrid = toml::from_str(text).map_err(|e| Error::Config(format!("grid: {e}")))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.percentiles.is_empty() || self.temperatures.is_empty() {
            return Err(Error::Config("grid axes must be non-empty".into()));
        }
        if self.strategy_pairs.is_empty() {
            return Err(Error::Config("grid needs at least one strategy pair".into()));
        }
        for policy in self.policies() {
            policy.validate()?;
        }
        Ok(())
    }

    pub fn points_per_pair(&self) -> usize {
        self.ks.len() * self.percentiles.len() * self.temperatures.len()
    }

    pub fn len(&self) -> usize {
        self.points_per_pair() * self.strategy_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point, in policy order.
    pub fn policies(&self) -> Vec<DecodingPolicy> {
        let mut out = Vec::with_capacity(self.len());
        for pair in &self.strategy_pairs {
            for &k in &self.ks {
                for &threshold_percentile in &self.percentiles {
                    for &temperature in &self.temperatures {
                        out.push(DecodingPolicy {
                            k,
                            threshold_percentile,
                            temperature,
                            aggressive: pair.aggressive,
                            conservative: pair.conservative,
                            base_seed: self.base_seed,
                        });
                    }
                }
            }
        }
        out.sort_by(DecodingPolicy::lexicographic_cmp);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

impl From<&F1Report> for SplitScores {
    fn from(r: &F1Report) -> Self {
        SplitScores {
            macro_f1: r.macro_f1,
            weighted_f1: r.weighted_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub policy: DecodingPolicy,
    pub pu_cutoff: f64,
    pub validation: SplitScores,
    pub test: SplitScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Sorted by [`DecodingPolicy::lexicographic_cmp`].
    pub points: Vec<SearchPoint>,
    pub best: SearchPoint,
}

/// Larger validation Weighted-F1 wins, then Macro-F1, then the policy that
/// sorts first.
fn better(a: &SearchPoint, b: &SearchPoint) -> bool {
    let by_score = a
        .validation
        .weighted_f1
        .total_cmp(&b.validation.weighted_f1)
        .then(a.validation.macro_f1.total_cmp(&b.validation.macro_f1));
    match by_score {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.policy.lexicographic_cmp(&b.policy).is_lt(),
    }
}

pub fn select_best(points: &[SearchPoint]) -> Option<&SearchPoint> {
    points.iter().fold(None, |best, p| match best {
        Some(b) if !better(p, b) => Some(b),
        _ => Some(p),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub evidence: EvidenceOptions,
    pub scope: CalibrationScope,
}

/// Errors with every id lacking a gold label.
pub fn require_gold<'a>(records: impl IntoIterator<Item = &'a LogitRecord>) -> Result<()> {
    let ids: Vec<String> = records
        .into_iter()
        .filter(|r| r.gold_label.is_none())
        .map(|r| r.id.clone())
        .collect();
    if ids.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingGold { ids })
    }
}

fn evaluate(scored: &[ScoredRecord<'_>], thresholds: &ThresholdTable, policy: &DecodingPolicy) -> Result<F1Report> {
    let pairs = scored
        .iter()
        .map(|s| {
            let d = decide_record(s, thresholds, policy)?;
            Ok((d.gold.expect("gold checked up front"), d.decision.label))
        })
        .collect::<Result<Vec<(StanceLabel, StanceLabel)>>>()?;
    score(&pairs)
}

/// Thresholds are calibrated on `validation` only; `test` is decoded and
/// scored but never consulted for calibration.
pub fn grid_search(
    validation: &[LogitRecord],
    test: &[LogitRecord],
    grid: &HyperGrid,
    map: &LabelMap,
    options: SearchOptions,
) -> Result<SearchResult> {
    grid.validate()?;
    if validation.is_empty() || test.is_empty() {
        return Err(Error::Config("grid search needs non-empty validation and test splits".into()));
    }
    require_gold(validation.iter().chain(test))?;

    let mut per_k = BTreeMap::new();
    for &k in &grid.ks {
        if per_k.contains_key(&k) {
            continue;
        }
        let val = score_records(validation, map, k, options.evidence)?;
        let tst = score_records(test, map, k, options.evidence)?;
        let mut thresholds = Vec::new();
        for &p in &grid.percentiles {
            thresholds.push((p, calibrate(&val, p, options.scope)?));
        }
        per_k.insert(k, (val, tst, thresholds));
    }

    let policies = grid.policies();
    let points = policies
        .par_iter()
        .map(|policy| {
            let (val, tst, thresholds) = &per_k[&policy.k];
            let table = &thresholds
                .iter()
                .find(|(p, _)| *p == policy.threshold_percentile)
                .expect("percentile is on the grid")
                .1;
            let v = evaluate(val, table, policy)?;
            let t = evaluate(tst, table, policy)?;
            Ok(SearchPoint {
                policy: *policy,
                pu_cutoff: table.global.pu_cutoff,
                validation: (&v).into(),
                test: (&t).into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&points).expect("grid is non-empty").clone();
    Ok(SearchResult { points, best })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    K,
    Percentile,
    Temperature,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::K, Axis::Percentile, Axis::Temperature];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::K => "k",
            Axis::Percentile => "percentile",
            Axis::Temperature => "temperature",
        }
    }

    fn value(self, p: &DecodingPolicy) -> f64 {
        match self {
            Axis::K => p.k as f64,
            Axis::Percentile => p.threshold_percentile,
            Axis::Temperature => p.temperature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub pair: StrategyPair,
    pub axis: Axis,
    pub value: f64,
    pub n: usize,
    pub validation_macro: MeanStd,
    pub validation_weighted: MeanStd,
    pub test_macro: MeanStd,
    pub test_weighted: MeanStd,
}

/// Per strategy pair and axis value, the mean and population standard
/// deviation of the F1 scores across the other axes. The temperature axis is
/// skipped for the neutral fallback, which never samples. Groups with a
/// single point are dropped with a warning.
pub fn sensitivity_report(points: &[SearchPoint]) -> Vec<SensitivityRow> {
    let mut groups: BTreeMap<(StrategyPair, Axis, u64), Vec<&SearchPoint>> = BTreeMap::new();
    for p in points {
        let pair = StrategyPair::of(&p.policy);
        for axis in Axis::ALL {
            if axis == Axis::Temperature && !pair.conservative.uses_temperature() {
                continue;
            }
            // Keyed on the order-preserving bit pattern of a nonnegative float.
            let key = axis.value(&p.policy).to_bits();
            groups.entry((pair, axis, key)).or_default().push(p);
        }
    }
    let mut rows = Vec::new();
    for ((pair, axis, key), members) in groups {
        let value = f64::from_bits(key);
        if members.len() < 2 {
            log::warn!(
                "sensitivity group {}/{} {}={} has a single point; omitted",
                pair.aggressive,
                pair.conservative,
                axis.as_str(),
                value
            );
            continue;
        }
        let stat = |f: fn(&SearchPoint) -> f64| MeanStd::of(&members.iter().map(|p| f(p)).collect::<Vec<_>>());
        rows.push(SensitivityRow {
            pair,
            axis,
            value,
            n: members.len(),
            validation_macro: stat(|p| p.validation.macro_f1),
            validation_weighted: stat(|p| p.validation.weighted_f1),
            test_macro: stat(|p| p.test.macro_f1),
            test_weighted: stat(|p| p.test.weighted_f1),
        });
    }
    rows
}
