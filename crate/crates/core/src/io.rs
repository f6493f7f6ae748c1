//! File formats: logit-record JSONL, label-map TSV, policy JSON, grid TOML
//! and the CSV artifacts.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoding::{DecodingPolicy, RecordDecision};
use crate::error::{Error, Result};
use crate::evidence::{LabelMap, LogitRecord};
use crate::search::{HyperGrid, SearchPoint, SearchResult, SensitivityRow, SplitScores};
use crate::stats::SweepRow;
use crate::uncertainty::PU_MAX_SENTINEL;

/// Spelling of the zero-evidence PU in CSV output.
pub const PU_MAX_TEXT: &str = "MAX";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Parses JSONL records. Blank lines are skipped; line numbers are 1-based.
pub fn parse_records(text: &str, path: &Path) -> Result<Vec<LogitRecord>> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let format_err = |reason: String| Error::Format {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let record: LogitRecord = serde_json::from_str(line).map_err(|e| format_err(e.to_string()))?;
        record.validate().map_err(|e| format_err(e.to_string()))?;
        if let Some(&first_line) = seen.get(&record.id) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                id: record.id,
                first_line,
                second_line: line_no,
            });
        }
        seen.insert(record.id.clone(), line_no);
        records.push(record);
    }
    Ok(records)
}

pub fn load_records(path: &Path) -> Result<Vec<LogitRecord>> {
    parse_records(&read_text(path)?, path)
}

/// One compact JSON object per line, logits in shortest round-trip form.
pub fn records_to_jsonl(records: &[LogitRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_records(path: &Path, records: &[LogitRecord]) -> Result<()> {
    write_text(path, &records_to_jsonl(records))
}

/// `token<TAB>LABEL` per line.
pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    LabelMap::parse_tsv(&read_text(path)?).map_err(|(line, reason)| Error::Format {
        path: path.to_path_buf(),
        line,
        reason,
    })
}

/// Accepts a bare policy object or a best-policy file with a `policy` key.
pub fn parse_policy(text: &str) -> Result<DecodingPolicy> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("policy: {e}")))?;
    if let Some(inner) = value.get_mut("policy") {
        value = inner.take();
    }
    let policy: DecodingPolicy = serde_json::from_value(value).map_err(|e| Error::Config(format!("policy: {e}")))?;
    policy.validate()?;
    Ok(policy)
}

pub fn load_policy(path: &Path) -> Result<DecodingPolicy> {
    parse_policy(&read_text(path)?)
}

pub fn load_grid(path: &Path) -> Result<HyperGrid> {
    HyperGrid::from_toml(&read_text(path)?)
}

/// Shortest text that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite floats serialize")
    } else if x == PU_MAX_SENTINEL {
        PU_MAX_TEXT.to_string()
    } else {
        x.to_string()
    }
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("fields are UTF-8")
}

pub const SEARCH_HEADER: [&str; 11] = [
    "aggressive",
    "conservative",
    "k",
    "threshold_percentile",
    "temperature",
    "base_seed",
    "pu_cutoff",
    "validation_macro_f1",
    "validation_weighted_f1",
    "test_macro_f1",
    "test_weighted_f1",
];

pub fn search_csv(points: &[SearchPoint]) -> String {
    csv_text(
        &SEARCH_HEADER,
        points.iter().map(|p| {
            vec![
                p.policy.aggressive.to_string(),
                p.policy.conservative.to_string(),
                p.policy.k.to_string(),
                fmt_f64(p.policy.threshold_percentile),
                fmt_f64(p.policy.temperature),
                p.policy.base_seed.to_string(),
                fmt_f64(p.pu_cutoff),
                fmt_f64(p.validation.macro_f1),
                fmt_f64(p.validation.weighted_f1),
                fmt_f64(p.test.macro_f1),
                fmt_f64(p.test.weighted_f1),
            ]
        }),
    )
}

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    csv_text(
        &[
            "aggressive",
            "conservative",
            "axis",
            "value",
            "n",
            "validation_macro_mean",
            "validation_macro_std",
            "validation_weighted_mean",
            "validation_weighted_std",
            "test_macro_mean",
            "test_macro_std",
            "test_weighted_mean",
            "test_weighted_std",
        ],
        rows.iter().map(|r| {
            vec![
                r.pair.aggressive.to_string(),
                r.pair.conservative.to_string(),
                r.axis.as_str().to_string(),
                fmt_f64(r.value),
                r.n.to_string(),
                fmt_f64(r.validation_macro.mean),
                fmt_f64(r.validation_macro.std),
                fmt_f64(r.validation_weighted.mean),
                fmt_f64(r.validation_weighted.std),
                fmt_f64(r.test_macro.mean),
                fmt_f64(r.test_macro.std),
                fmt_f64(r.test_weighted.mean),
                fmt_f64(r.test_weighted.std),
            ]
        }),
    )
}

pub fn decisions_csv(decisions: &[RecordDecision]) -> String {
    csv_text(
        &["id", "category", "gold", "label", "pu", "branch", "sampled"],
        decisions.iter().map(|d| {
            vec![
                d.id.clone(),
                d.category.to_string(),
                d.gold.map(|g| g.to_string()).unwrap_or_default(),
                d.decision.label.to_string(),
                fmt_f64(d.decision.pu),
                d.decision.branch.as_str().to_string(),
                d.decision.sampled.to_string(),
            ]
        }),
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    csv_text(
        &[
            "k",
            "test",
            "statistic",
            "p_value",
            "mean_pu_correct",
            "mean_pu_incorrect",
            "n_correct",
            "n_incorrect",
            "note",
        ],
        rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                r.test.as_str().to_string(),
                opt_f64(r.statistic),
                opt_f64(r.p_value),
                opt_f64(r.mean_correct),
                opt_f64(r.mean_incorrect),
                r.n_correct.to_string(),
                r.n_incorrect.to_string(),
                r.absent_reason.clone().unwrap_or_default(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    /// Seconds since the epoch; honours `SOURCE_DATE_EPOCH`. The only field
    /// that differs between otherwise identical runs.
    pub generated_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        let generated_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        Provenance {
            tool: "stancepu".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            inputs: Vec::new(),
            generated_unix,
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(InputDigest {
            role: role.into(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

/// Contents of the best-policy file written by `search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPolicyFile {
    pub policy: DecodingPolicy,
    /// False for the neutral fallback, which ignores the temperature.
    pub temperature_used: bool,
    pub pu_cutoff: f64,
    pub validation: SplitScores,
    pub test: SplitScores,
    pub grid_points: usize,
    pub points_per_pair: usize,
    pub provenance: Provenance,
}

impl BestPolicyFile {
    pub fn new(result: &SearchResult, grid: &HyperGrid, provenance: Provenance) -> Self {
        let best = &result.best;
        BestPolicyFile {
            policy: best.policy,
            temperature_used: best.policy.conservative.uses_temperature(),
            pu_cutoff: best.pu_cutoff,
            validation: best.validation,
            test: best.test,
            grid_points: result.points.len(),
            points_per_pair: grid.points_per_pair(),
            provenance,
        }
    }
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn output_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
