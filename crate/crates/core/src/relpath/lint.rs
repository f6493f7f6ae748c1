use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::{decompose_chain, parse_relation_expr, ParseErrorKind};
use super::path::{parse_transmission_path_with, PathOptions};
use crate::error::{Error, Result};
use crate::types::StanceLabel;

/// Connectives the grammar deliberately leaves out.
const UNSUPPORTED_KEYWORDS: &[&str] = &["BUT", "AND", "THEN", "WHILE"];

/// One line of an augmented corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub id: String,
    pub original_text: String,
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default)]
    pub transmission_paths: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Record,
    DuplicateId,
    Label,
    Relation,
    Chain,
    UnsupportedPattern,
    Path,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::Record => "record",
            FindingKind::DuplicateId => "duplicate_id",
            FindingKind::Label => "label",
            FindingKind::Relation => "relation",
            FindingKind::Chain => "chain",
            FindingKind::UnsupportedPattern => "unsupported_pattern",
            FindingKind::Path => "path",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub line: usize,
    pub record_id: Option<String>,
    pub kind: FindingKind,
    /// Position in the record's `relations` or `transmission_paths` list.
    pub item: Option<usize>,
    /// Byte offset inside the item, for parse errors.
    pub offset: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintSummary {
    pub records: usize,
    pub clean_records: usize,
    pub relations: usize,
    pub atoms: usize,
    pub transmission_paths: usize,
    pub findings: usize,
    pub by_kind: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub findings: Vec<Finding>,
    pub summary: LintSummary,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.findings {
            let _ = write!(out, "line {}", f.line);
            if let Some(id) = &f.record_id {
                let _ = write!(out, " [{id}]");
            }
            let _ = write!(out, " {}", f.kind.as_str());
            if let Some(i) = f.item {
                let _ = write!(out, "[{i}]");
            }
            let _ = writeln!(out, ": {}", f.message);
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{} records, {} clean, {} relations ({} atoms), {} transmission paths, {} findings",
            s.records, s.clean_records, s.relations, s.atoms, s.transmission_paths, s.findings
        );
        out
    }
}

/// Lints every non-blank line of a JSONL augmented corpus. Problems are
/// reported as findings, never as errors.
pub fn lint_corpus(text: &str, options: &PathOptions) -> LintReport {
    let mut report = LintReport::default();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        report.summary.records += 1;
        let before = report.findings.len();
        let mut push = |kind, record_id: Option<&str>, item, offset, message: String| {
            report.findings.push(Finding {
                line,
                record_id: record_id.map(str::to_string),
                kind,
                item,
                offset,
                message,
            })
        };
        let rec: AugmentedRecord = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(e) => {
                push(FindingKind::Record, None, None, None, format!("not a valid augmented record: {e}"));
                continue;
            }
        };
        let id = Some(rec.id.as_str());
        if rec.id.is_empty() {
            push(FindingKind::Record, None, None, None, "empty id".into());
        }
        if let Some(first) = first_line.get(&rec.id) {
            push(
                FindingKind::DuplicateId,
                id,
                None,
                None,
                format!("id already used on line {first}"),
            );
        } else {
            first_line.insert(rec.id.clone(), line);
        }
        if rec.label.parse::<StanceLabel>().is_err() {
            push(
                FindingKind::Label,
                id,
                None,
                None,
                format!("label `{}` is not one of HAWKISH, DOVISH, NEUTRAL", rec.label),
            );
        }
        for (i, rel) in rec.relations.iter().enumerate() {
            report.summary.relations += 1;
            match parse_relation_expr(rel) {
                Ok(chain) => match decompose_chain(&chain) {
                    Ok(atoms) => report.summary.atoms += atoms.len(),
                    Err(e) => push(FindingKind::Chain, id, Some(i), None, e.to_string()),
                },
                Err(e) => {
                    let kind = match &e.kind {
                        ParseErrorKind::UnknownRelation(k) if UNSUPPORTED_KEYWORDS.contains(&k.as_str()) => {
                            FindingKind::UnsupportedPattern
                        }
                        _ => FindingKind::Relation,
                    };
                    push(kind, id, Some(i), Some(e.offset), e.to_string());
                }
            }
        }
        for (i, path) in rec.transmission_paths.iter().enumerate() {
            report.summary.transmission_paths += 1;
            if let Err(e) = parse_transmission_path_with(path, options) {
                push(FindingKind::Path, id, Some(i), None, e.to_string());
            }
        }
        if report.findings.len() == before {
            report.summary.clean_records += 1;
        }
    }
    report.summary.findings = report.findings.len();
    for f in &report.findings {
        *report.summary.by_kind.entry(f.kind.as_str().to_string()).or_default() += 1;
    }
    report
}

pub fn lint_file(path: &Path, options: &PathOptions) -> Result<LintReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(lint_corpus(&text, options))
}
