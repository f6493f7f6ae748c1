//! Conversion of captured logits into label-clustered Dirichlet evidence.
//!
//! A [`LogitRecord`] holds the candidate tokens observed at the stance
//! prediction position. Each logit is passed through a ReLU to obtain
//! nonnegative evidence; tokens known to the [`LabelMap`] are pooled into one
//! aggregate per stance label, while unmapped tokens keep their individual
//! evidence. The `k` largest values of the pooled set become the Dirichlet
//! parameters consumed by [`crate::uncertainty`].

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Category, Split, StanceLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenCandidate {
    pub token: String,
    pub logit: f64,
}

impl TokenCandidate {
    pub fn new(token: impl Into<String>, logit: f64) -> Result<Self> {
        let token = token.into();
        if token.is_empty() {
            return Err(Error::Domain("candidate token must be non-empty".into()));
        }
        if !logit.is_finite() {
            return Err(Error::Domain(format!("logit for token {token:?} is not finite")));
        }
        Ok(TokenCandidate { token, logit })
    }
}

/// One captured prediction position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitRecord {
    pub id: String,
    pub candidates: Vec<TokenCandidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<StanceLabel>,
    pub category: Category,
    pub model_name: String,
    pub split: Split,
}

impl LogitRecord {
    /// Builds a record, sorting candidates by descending logit. The sort is
    /// stable so equal logits keep their input order.
    pub fn new(
        id: impl Into<String>,
        mut candidates: Vec<TokenCandidate>,
        gold_label: Option<StanceLabel>,
        category: Category,
        model_name: impl Into<String>,
        split: Split,
    ) -> Result<Self> {
        candidates.sort_by(|a, b| b.logit.total_cmp(&a.logit));
        let record = LogitRecord {
            id: id.into(),
            candidates,
            gold_label,
            category,
            model_name: model_name.into(),
            split,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(invalid("id must be non-empty".into()));
        }
        if self.candidates.is_empty() {
            return Err(invalid("candidates must be non-empty".into()));
        }
        for (rank, c) in self.candidates.iter().enumerate() {
            if c.token.is_empty() {
                return Err(invalid(format!("candidate {rank} has an empty token")));
            }
            if !c.logit.is_finite() {
                return Err(invalid(format!("candidate {rank} ({:?}) has a non-finite logit", c.token)));
            }
        }
        if let Some(pos) = self
            .candidates
            .windows(2)
            .position(|w| w[1].logit > w[0].logit)
        {
            return Err(invalid(format!(
                "candidates are not in descending logit order at rank {}",
                pos + 1
            )));
        }
        Ok(())
    }
}

/// Exact-match token to stance lookup. Tokens are compared byte for byte,
/// so leading whitespace and case are significant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelMap {
    entries: HashMap<String, StanceLabel>,
}

/// Tokens from the top-20 candidate vocabularies of the reference models
/// that are fragments of a label word, plus the obvious whole-word forms.
const DEFAULT_VOCABULARY: &[(&str, StanceLabel)] = {
    use StanceLabel::{Dovish as D, Hawkish as H, Neutral as N};
    &[
        ("H", H),
        ("HA", H),
        ("HAW", H),
        ("HAWK", H),
        ("HAWKISH", H),
        ("h", H),
        ("hawk", H),
        ("hawks", H),
        ("hawkish", H),
        ("Hawk", H),
        ("Hawkish", H),
        (" Hawk", H),
        (" hawk", H),
        (" hawkish", H),
        (" HAWKISH", H),
        ("D", D),
        ("DO", D),
        ("DOV", D),
        ("DOVISH", D),
        ("Do", D),
        ("do", D),
        ("dov", D),
        ("dove", D),
        ("doves", D),
        ("dovish", D),
        ("Dov", D),
        ("Dove", D),
        ("Dovish", D),
        (" Dov", D),
        (" dovish", D),
        (" DOVISH", D),
        ("N", N),
        ("NE", N),
        ("NEU", N),
        ("NEUTRAL", N),
        ("Ne", N),
        ("ne", N),
        ("neu", N),
        ("neutral", N),
        ("Neu", N),
        ("Neutral", N),
        (" Neutral", N),
        (" neutral", N),
        (" NEUTRAL", N),
    ]
};

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shipped vocabulary.
    pub fn default_vocabulary() -> Self {
        let mut map = LabelMap::new();
        for (token, label) in DEFAULT_VOCABULARY {
            map.insert(*token, *label).expect("default vocabulary is consistent");
        }
        map
    }

    /// Adds a mapping. Re-inserting the same pair is a no-op; mapping a token
    /// to a second label is an error.
    pub fn insert(&mut self, token: impl Into<String>, label: StanceLabel) -> Result<()> {
        let token = token.into();
        if token.is_empty() {
            return Err(Error::Config("label map token must be non-empty".into()));
        }
        match self.entries.get(&token) {
            Some(existing) if *existing != label => Err(Error::Config(format!(
                "token {token:?} mapped to both {existing} and {label}"
            ))),
            _ => {
                self.entries.insert(token, label);
                Ok(())
            }
        }
    }

    pub fn get(&self, token: &str) -> Option<StanceLabel> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the `token<TAB>label` line format. Empty lines are skipped; the
    /// token is everything before the last tab, unmodified.
    pub fn parse_tsv(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut map = LabelMap::new();
        for (i, raw) in text.split('\n').enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                continue;
            }
            let (token, label) = line
                .rsplit_once('\t')
                .ok_or_else(|| (line_no, "expected `token<TAB>label`".to_string()))?;
            let label: StanceLabel = label.parse().map_err(|e: crate::types::UnknownLabel| (line_no, e.to_string()))?;
            map.insert(token, label).map_err(|e| (line_no, e.to_string()))?;
        }
        Ok(map)
    }

    /// Serializes to the line format, sorted by token for stable output.
    pub fn to_tsv(&self) -> String {
        let mut pairs: Vec<_> = self.entries.iter().collect();
        pairs.sort();
        pairs
            .into_iter()
            .map(|(t, l)| format!("{t}\t{l}\n"))
            .collect()
    }
}

/// How mapped tokens are pooled into a label aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    Max,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "max" => Ok(Aggregation::Max),
            other => Err(format!("unknown aggregation `{other}` (expected sum or max)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvidenceOptions {
    pub aggregation: Aggregation,
    /// When false the Dirichlet parameters are drawn from individual tokens
    /// (the non-clustered baseline); label aggregates are still computed for
    /// the label-level strategies.
    pub clustered: bool,
}

impl Default for EvidenceOptions {
    fn default() -> Self {
        EvidenceOptions {
            aggregation: Aggregation::Sum,
            clustered: true,
        }
    }
}

/// Where a value in the candidate evidence set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum EvidenceSource {
    Label(StanceLabel),
    /// Original candidate rank (0-based).
    Token(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub token: String,
    pub evidence: f64,
    pub label: Option<StanceLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    /// Indexed by [`StanceLabel::index`].
    pub label_evidence: [f64; 3],
    pub unmapped_evidence: Vec<(String, f64)>,
    /// Descending.
    pub top_k_alpha: Vec<f64>,
    pub top_k_sources: Vec<EvidenceSource>,
    pub k_effective: usize,
    /// Every candidate with its ReLU'd evidence, in original rank order.
    pub candidates: Vec<ScoredCandidate>,
}

impl EvidenceSet {
    pub fn label_evidence(&self, label: StanceLabel) -> f64 {
        self.label_evidence[label.index()]
    }

    /// Label with the largest aggregate; ties resolve to the earliest label.
    pub fn top_label(&self) -> StanceLabel {
        self.labels_by_evidence()[0].0
    }

    /// Labels sorted by descending aggregate, ties in label order.
    pub fn labels_by_evidence(&self) -> [(StanceLabel, f64); 3] {
        let mut out = StanceLabel::ALL.map(|l| (l, self.label_evidence(l)));
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Candidate ranks sorted by descending evidence, ties by original rank.
    pub fn candidates_by_evidence(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.candidates.len()).collect();
        idx.sort_by(|&a, &b| {
            self.candidates[b]
                .evidence
                .total_cmp(&self.candidates[a].evidence)
                .then(a.cmp(&b))
        });
        idx
    }

    /// Label of a candidate, falling back to the top aggregate label when
    /// the token is unmapped.
    pub fn candidate_label(&self, rank: usize) -> StanceLabel {
        self.candidates[rank].label.unwrap_or_else(|| self.top_label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteLogit {
    pub index: usize,
    pub value: f64,
}

impl fmt::Display for NonFiniteLogit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "logit {} at index {} is not finite", self.value, self.index)
    }
}

impl std::error::Error for NonFiniteLogit {}

pub fn relu_evidence(logits: &[f64]) -> std::result::Result<Vec<f64>, NonFiniteLogit> {
    logits
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value.is_finite() {
                Ok(value.max(0.0))
            } else {
                Err(NonFiniteLogit { index, value })
            }
        })
        .collect()
}

pub fn build_evidence_set(record: &LogitRecord, map: &LabelMap, k: usize) -> Result<EvidenceSet> {
    build_evidence_set_with(record, map, k, EvidenceOptions::default())
}

pub fn build_evidence_set_with(
    record: &LogitRecord,
    map: &LabelMap,
    k: usize,
    options: EvidenceOptions,
) -> Result<EvidenceSet> {
    if k < 1 {
        return Err(Error::Config("top-K must be at least 1".into()));
    }
    let logits: Vec<f64> = record.candidates.iter().map(|c| c.logit).collect();
    let evidence = relu_evidence(&logits).map_err(|e| Error::InvalidRecord {
        id: record.id.clone(),
        reason: e.to_string(),
    })?;

    let mut label_evidence = [0.0f64; 3];
    let mut unmapped_evidence = Vec::new();
    let mut candidates = Vec::with_capacity(record.candidates.len());
    for (c, &ev) in record.candidates.iter().zip(&evidence) {
        let label = map.get(&c.token);
        match label {
            Some(l) => {
                let slot = &mut label_evidence[l.index()];
                *slot = match options.aggregation {
                    Aggregation::Sum => *slot + ev,
                    Aggregation::Max => slot.max(ev),
                };
            }
            None => unmapped_evidence.push((c.token.clone(), ev)),
        }
        candidates.push(ScoredCandidate {
            token: c.token.clone(),
            evidence: ev,
            label,
        });
    }

    // Pool entries are listed in tie-break order: labels first, then tokens
    // by original rank. A stable descending sort therefore resolves ties.
    let mut pool: Vec<(EvidenceSource, f64)> = if options.clustered {
        let mut pool: Vec<_> = StanceLabel::ALL
            .iter()
            .map(|&l| (EvidenceSource::Label(l), label_evidence[l.index()]))
            .collect();
        pool.extend(
            candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.label.is_none())
                .map(|(rank, c)| (EvidenceSource::Token(rank), c.evidence)),
        );
        pool
    } else {
        candidates
            .iter()
            .enumerate()
            .map(|(rank, c)| (EvidenceSource::Token(rank), c.evidence))
            .collect()
    };
    pool.sort_by(|a, b| b.1.total_cmp(&a.1));
    let k_effective = k.min(pool.len());
    pool.truncate(k_effective);
    let (top_k_sources, top_k_alpha) = pool.into_iter().unzip();

    Ok(EvidenceSet {
        label_evidence,
        unmapped_evidence,
        top_k_alpha,
        top_k_sources,
        k_effective,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(cands: &[(&str, f64)]) -> LogitRecord {
        let candidates = cands
            .iter()
            .map(|(t, l)| TokenCandidate::new(*t, *l).unwrap())
            .collect();
        LogitRecord::new("r1", candidates, None, Category::Minutes, "m", Split::Test).unwrap()
    }

    fn map(pairs: &[(&str, StanceLabel)]) -> LabelMap {
        let mut m = LabelMap::new();
        for (t, l) in pairs {
            m.insert(*t, *l).unwrap();
        }
        m
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu_evidence(&[-3.2, 0.0, 5.5]).unwrap(), vec![0.0, 0.0, 5.5]);
        assert_eq!(
            relu_evidence(&[24.25, 22.25, 21.125]).unwrap(),
            vec![24.25, 22.25, 21.125]
        );
        assert!(relu_evidence(&[]).unwrap().is_empty());
        let err = relu_evidence(&[1.0, f64::NAN]).unwrap_err();
        assert_eq!(err.index, 1);
    }

    #[test]
    fn hawkish_fragments_are_summed() {
        let r = record(&[("H", 24.25), ("hawk", 17.5), ("HA", 16.25)]);
        let m = map(&[
            ("H", StanceLabel::Hawkish),
            ("hawk", StanceLabel::Hawkish),
            ("HA", StanceLabel::Hawkish),
        ]);
        let ev = build_evidence_set(&r, &m, 3).unwrap();
        assert_eq!(ev.label_evidence(StanceLabel::Hawkish), 58.0);
        assert_eq!(ev.label_evidence(StanceLabel::Dovish), 0.0);
        assert_eq!(ev.label_evidence(StanceLabel::Neutral), 0.0);
        assert_eq!(ev.top_k_alpha, vec![58.0, 0.0, 0.0]);
        assert_eq!(
            ev.top_k_sources,
            vec![
                EvidenceSource::Label(StanceLabel::Hawkish),
                EvidenceSource::Label(StanceLabel::Dovish),
                EvidenceSource::Label(StanceLabel::Neutral),
            ]
        );
    }

    #[test]
    fn k_is_clamped_to_the_candidate_set() {
        let r = record(&[("X", -1.0)]);
        let ev = build_evidence_set(&r, &LabelMap::new(), 5).unwrap();
        assert_eq!(ev.unmapped_evidence, vec![("X".to_string(), 0.0)]);
        assert_eq!(ev.top_k_alpha, vec![0.0; 4]);
        assert_eq!(ev.k_effective, 4);
    }

    #[test]
    fn two_labels_top_two() {
        let r = record(&[("NE", 22.25), ("DO", 21.125)]);
        let m = map(&[("NE", StanceLabel::Neutral), ("DO", StanceLabel::Dovish)]);
        let ev = build_evidence_set(&r, &m, 2).unwrap();
        assert_eq!(ev.top_k_alpha, vec![22.25, 21.125]);
    }

    #[test]
    fn zero_k_is_rejected() {
        let r = record(&[("H", 1.0)]);
        assert!(matches!(
            build_evidence_set(&r, &LabelMap::new(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ties_prefer_labels_then_rank() {
        let r = record(&[("a", 2.0), ("H", 2.0), ("b", 2.0)]);
        let m = map(&[("H", StanceLabel::Hawkish)]);
        let ev = build_evidence_set(&r, &m, 3).unwrap();
        assert_eq!(
            ev.top_k_sources,
            vec![
                EvidenceSource::Label(StanceLabel::Hawkish),
                EvidenceSource::Token(0),
                EvidenceSource::Token(2),
            ]
        );
    }

    #[test]
    fn max_aggregation_switch() {
        let r = record(&[("H", 24.25), ("hawk", 17.5)]);
        let m = map(&[("H", StanceLabel::Hawkish), ("hawk", StanceLabel::Hawkish)]);
        let opts = EvidenceOptions {
            aggregation: Aggregation::Max,
            clustered: true,
        };
        let ev = build_evidence_set_with(&r, &m, 3, opts).unwrap();
        assert_eq!(ev.label_evidence(StanceLabel::Hawkish), 24.25);
    }

    #[test]
    fn non_clustered_uses_tokens() {
        let r = record(&[("H", 24.25), ("NE", 22.25), ("hawk", 17.5), ("x", 3.0)]);
        let m = LabelMap::default_vocabulary();
        let opts = EvidenceOptions {
            aggregation: Aggregation::Sum,
            clustered: false,
        };
        let ev = build_evidence_set_with(&r, &m, 10, opts).unwrap();
        assert_eq!(ev.k_effective, 4);
        assert_eq!(ev.top_k_alpha, vec![24.25, 22.25, 17.5, 3.0]);
        assert_eq!(ev.label_evidence(StanceLabel::Hawkish), 41.75);
    }

    #[test]
    fn out_of_order_candidates_are_rejected() {
        let r = LogitRecord {
            id: "bad".into(),
            candidates: vec![
                TokenCandidate::new("a", 1.0).unwrap(),
                TokenCandidate::new("b", 2.0).unwrap(),
            ],
            gold_label: None,
            category: Category::Other,
            model_name: "m".into(),
            split: Split::Test,
        };
        assert!(matches!(r.validate(), Err(Error::InvalidRecord { .. })));
    }

    #[test]
    fn label_map_tsv() {
        let m = LabelMap::parse_tsv(" Hawk\tHAWKISH\r\nNE\tNEUTRAL\n\n").unwrap();
        assert_eq!(m.get(" Hawk"), Some(StanceLabel::Hawkish));
        assert_eq!(m.get("Hawk"), None);
        assert_eq!(m.get("NE"), Some(StanceLabel::Neutral));
        assert_eq!(LabelMap::parse_tsv(&m.to_tsv()).unwrap(), m);

        assert_eq!(LabelMap::parse_tsv("H\tBULLISH\n").unwrap_err().0, 1);
        assert_eq!(LabelMap::parse_tsv("H\tHAWKISH\nno-tab\n").unwrap_err().0, 2);
        assert_eq!(LabelMap::parse_tsv("H\tHAWKISH\nH\tDOVISH\n").unwrap_err().0, 2);
    }

    #[test]
    fn default_vocabulary_covers_table_fragments() {
        let m = LabelMap::default_vocabulary();
        for t in ["H", "hawk", "HA", " Hawk", " hawk", "hawks", "h"] {
            assert_eq!(m.get(t), Some(StanceLabel::Hawkish), "{t:?}");
        }
        for t in ["DO", "Do", "do", "D"] {
            assert_eq!(m.get(t), Some(StanceLabel::Dovish), "{t:?}");
        }
        for t in ["NE", "Ne", "ne", "Neutral", "N"] {
            assert_eq!(m.get(t), Some(StanceLabel::Neutral), "{t:?}");
        }
        for t in ["NA", "HO", "HE", "HAL", "HI", "DA", "HW", "E", "UNKNOWN", "UN", "BE", "NO", "HAV"] {
            assert_eq!(m.get(t), None, "{t:?}");
        }
    }

    fn arb_candidates() -> impl Strategy<Value = Vec<(String, f64)>> {
        let token = prop::sample::select(vec![
            "H", "hawk", "HA", "NE", "DO", "Ne", "x", "y", "NA", "HO", "z",
        ])
        .prop_map(String::from);
        prop::collection::vec((token, -5.0f64..30.0), 1..20)
    }

    proptest! {
        #[test]
        fn label_evidence_is_permutation_invariant(cands in arb_candidates(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let m = LabelMap::default_vocabulary();
            let mk = |cs: &[(String, f64)]| {
                let cs = cs.iter().map(|(t, l)| TokenCandidate::new(t.clone(), *l).unwrap()).collect();
                LogitRecord::new("p", cs, None, Category::Other, "m", Split::Test).unwrap()
            };
            let a = build_evidence_set(&mk(&cands), &m, 10).unwrap();
            let mut shuffled = cands.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = build_evidence_set(&mk(&shuffled), &m, 10).unwrap();
            for l in StanceLabel::ALL {
                prop_assert!((a.label_evidence(l) - b.label_evidence(l)).abs() <= 1e-9);
            }
        }

        #[test]
        fn adding_a_mapped_token_is_monotone(cands in arb_candidates(), logit in 0.0f64..30.0) {
            let m = LabelMap::default_vocabulary();
            let mk = |cs: Vec<(String, f64)>| {
                let cs = cs.into_iter().map(|(t, l)| TokenCandidate::new(t, l).unwrap()).collect();
                LogitRecord::new("p", cs, None, Category::Other, "m", Split::Test).unwrap()
            };
            let before = build_evidence_set(&mk(cands.clone()), &m, 3).unwrap();
            let mut more = cands;
            more.push(("DO".into(), logit));
            let after = build_evidence_set(&mk(more), &m, 3).unwrap();
            prop_assert!(after.label_evidence(StanceLabel::Dovish) >= before.label_evidence(StanceLabel::Dovish));
        }

        #[test]
        fn k_effective_is_clamped(cands in arb_candidates(), k in 1usize..40) {
            let m = LabelMap::default_vocabulary();
            let cs = cands.into_iter().map(|(t, l)| TokenCandidate::new(t, l).unwrap()).collect();
            let r = LogitRecord::new("p", cs, None, Category::Other, "m", Split::Test).unwrap();
            let ev = build_evidence_set(&r, &m, k).unwrap();
            prop_assert!(ev.k_effective <= 3 + ev.unmapped_evidence.len());
            prop_assert_eq!(ev.k_effective, k.min(3 + ev.unmapped_evidence.len()));
            prop_assert!(ev.top_k_alpha.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(ev.top_k_alpha.iter().all(|&a| a >= 0.0));
        }

        #[test]
        fn relu_is_idempotent(xs in prop::collection::vec(-100.0f64..100.0, 0..50)) {
            let once = relu_evidence(&xs).unwrap();
            prop_assert_eq!(relu_evidence(&once).unwrap(), once);
        }
    }
}
