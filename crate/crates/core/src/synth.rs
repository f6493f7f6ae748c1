//! Deterministic synthetic logit corpora for tests, benchmarks and demos.
//!
//! Each record is one of three kinds:
//! - confident: the gold label's tokens dominate, so PU is low and greedy
//!   decoding is right;
//! - noisy: label tokens and unmapped fillers have similar logits, so PU is
//!   high and the top label is a coin toss;
//! - blank: every logit is negative, giving zero evidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evidence::{LogitRecord, TokenCandidate};
use crate::types::{Category, Split, StanceLabel};

const LABEL_TOKENS: [[&str; 4]; 3] = [
    ["HAWK", "HAW", "hawk", " Hawk"],
    ["DOV", "DO", "dov", " Dov"],
    ["NEU", "NE", "neu", " Neutral"],
];

const FILLERS: [&str; 8] = ["the", "NA", "HO", "E", "UN", "BE", "NO", "HAV"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub noisy_fraction: f64,
    pub blank_fraction: f64,
    /// Candidates stored per record.
    pub top_n: usize,
    pub seed: u64,
    pub model_name: String,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            train: 0,
            validation: 200,
            test: 200,
            noisy_fraction: 0.3,
            blank_fraction: 0.0,
            top_n: 40,
            seed: 42,
            model_name: "synthetic".into(),
        }
    }
}

impl FixtureConfig {
    /// Corpus with a clear PU/error association: 35% noisy records, no blanks.
    pub fn noisy_high_pu() -> Self {
        FixtureConfig {
            validation: 400,
            test: 600,
            noisy_fraction: 0.35,
            ..FixtureConfig::default()
        }
    }
}

fn candidates(rng: &mut ChaCha8Rng, gold: StanceLabel, kind: Kind, top_n: usize) -> Vec<TokenCandidate> {
    let mut out = Vec::with_capacity(top_n);
    let mut push = |token: String, logit: f64| out.push(TokenCandidate { token, logit });
    for (li, forms) in LABEL_TOKENS.iter().enumerate() {
        for (fi, form) in forms.iter().enumerate() {
            let logit = match kind {
                Kind::Confident if li == gold.index() => {
                    if fi == 0 {
                        rng.random_range(8.0..12.0)
                    } else {
                        rng.random_range(1.0..4.0)
                    }
                }
                Kind::Confident => rng.random_range(-4.0..0.5),
                Kind::Noisy => rng.random_range(0.5..3.5),
                Kind::Blank => rng.random_range(-8.0..-0.5),
            };
            push(form.to_string(), logit);
        }
    }
    let n_fill = top_n.saturating_sub(LABEL_TOKENS.len() * LABEL_TOKENS[0].len());
    for i in 0..n_fill {
        let token = FILLERS.get(i).map_or_else(|| format!("tok{i}"), |s| s.to_string());
        let logit = match kind {
            Kind::Confident => rng.random_range(-6.0..0.3),
            Kind::Noisy => rng.random_range(-1.0..3.0),
            Kind::Blank => rng.random_range(-9.0..-0.5),
        };
        push(token, logit);
    }
    out.sort_by(|a, b| b.logit.total_cmp(&a.logit));
    out.truncate(top_n.max(1));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Confident,
    Noisy,
    Blank,
}

/// All splits, in order train, validation, test. Ids are `<split>-<index>`.
pub fn generate(config: &FixtureConfig) -> Vec<LogitRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    for (split, n) in [
        (Split::Train, config.train),
        (Split::Validation, config.validation),
        (Split::Test, config.test),
    ] {
        for i in 0..n {
            let gold = StanceLabel::ALL[rng.random_range(0..3)];
            let u: f64 = rng.random();
            let kind = if u < config.blank_fraction {
                Kind::Blank
            } else if u < config.blank_fraction + config.noisy_fraction {
                Kind::Noisy
            } else {
                Kind::Confident
            };
            let cands = candidates(&mut rng, gold, kind, config.top_n);
            let category = Category::ALL[i % Category::ALL.len()];
            let record = LogitRecord::new(
                format!("{split}-{i:04}"),
                cands,
                Some(gold),
                category,
                config.model_name.clone(),
                split,
            )
            .expect("generated records are valid");
            records.push(record);
        }
    }
    records
}

/// Records of one split.
pub fn split_of(records: &[LogitRecord], split: Split) -> Vec<LogitRecord> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoding::greedy;
    use crate::evidence::{build_evidence_set, LabelMap};
    use crate::uncertainty::score_evidence;

    #[test]
    fn generation_is_deterministic() {
        let c = FixtureConfig::default();
        assert_eq!(generate(&c), generate(&c));
        let other = FixtureConfig { seed: 7, ..c.clone() };
        assert_ne!(generate(&c), generate(&other));
    }

    #[test]
    fn shapes() {
        let c = FixtureConfig {
            train: 3,
            blank_fraction: 0.1,
            ..FixtureConfig::default()
        };
        let rs = generate(&c);
        assert_eq!(rs.len(), 403);
        assert!(rs.iter().all(|r| r.candidates.len() == 40 && r.validate().is_ok()));
        let map = LabelMap::default_vocabulary();
        let blanks = rs
            .iter()
            .filter(|r| score_evidence(&build_evidence_set(r, &map, 10).unwrap()).unwrap().is_zero_evidence())
            .count();
        assert!(blanks > 10 && blanks < 80, "{blanks}");
    }

    #[test]
    fn confident_records_decode_correctly() {
        let map = LabelMap::default_vocabulary();
        let rs = generate(&FixtureConfig {
            noisy_fraction: 0.0,
            ..FixtureConfig::default()
        });
        for r in &rs {
            let ev = build_evidence_set(r, &map, 3).unwrap();
            assert_eq!(Some(greedy(&ev, crate::decoding::AggressiveStrategy::GreedyCandidate)), r.gold_label);
        }
    }
}
