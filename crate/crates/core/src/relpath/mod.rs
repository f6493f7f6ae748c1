//! Entity-relation chains and monetary-policy transmission paths produced by
//! the augmentation prompts, plus a corpus linter.
//!
//! Relation chains use a small parenthesized grammar:
//!
//! ```text
//! expr    := operand (RELATION operand)*
//! operand := "(" entity ("+" entity)+ ")"     conjunction group
//!          | "(" expr ")"
//!          | entity
//! entity  := bare phrase | "quoted phrase"
//! ```
//!
//! A bare phrase is a run of words. Any unquoted word made of three or more
//! ASCII capitals is read as a relation keyword, so acronyms inside entities
//! must be quoted (`"FOMC statement" CAUSE lower yields`).

mod chain;
mod lint;
mod path;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use chain::{decompose_chain, parse_relation_expr, render_chain, ChainError, ParseError, ParseErrorKind};
pub use lint::{lint_corpus, lint_file, AugmentedRecord, Finding, FindingKind, LintReport, LintSummary};
pub use path::{
    parse_transmission_path, parse_transmission_path_with, FormatSource, PathError, PathFormat, PathOptions,
    PolicySpace, TransmissionPath,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntitySource {
    Official,
    External,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceKind {
    OfficialStatement,
    DataInterpretation,
    ExternalAnalysis,
    DirectQuestion,
    RhetoricalQuestion,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entity {
    text: String,
    pub source: EntitySource,
    pub stance_kind: StanceKind,
}

impl Entity {
    /// Trims the text; `None` if nothing is left.
    pub fn new(text: &str) -> Option<Self> {
        let text = text.trim();
        (!text.is_empty()).then(|| Entity {
            text: text.to_string(),
            source: EntitySource::Unspecified,
            stance_kind: StanceKind::Unspecified,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// One entity or a conjunction of jointly acting entities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Group(pub Vec<Entity>);

impl Group {
    pub fn single(e: Entity) -> Self {
        Group(vec![e])
    }

    pub fn entities(&self) -> &[Entity] {
        &self.0
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let texts: Vec<&str> = self.0.iter().map(Entity::text).collect();
        if texts.len() == 1 {
            f.write_str(texts[0])
        } else {
            write!(f, "({})", texts.join(" + "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Relation {
    Cause,
    Cond,
    Evid,
    Purp,
    Act,
    Comp,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Cause,
        Relation::Cond,
        Relation::Evid,
        Relation::Purp,
        Relation::Act,
        Relation::Comp,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Relation::Cause => "CAUSE",
            Relation::Cond => "COND",
            Relation::Evid => "EVID",
            Relation::Purp => "PURP",
            Relation::Act => "ACT",
            Relation::Comp => "COMP",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Relation::ALL.into_iter().find(|r| r.keyword() == s)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomicRelation {
    pub subject: Group,
    pub relation: Relation,
    pub object: Group,
}

impl fmt::Display for AtomicRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.relation, self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationChain {
    pub source_text: String,
    /// Leftmost group of the expression.
    pub head: Group,
    pub atoms: Vec<AtomicRelation>,
}

impl RelationChain {
    pub fn from_atoms(atoms: Vec<AtomicRelation>) -> Option<Self> {
        let head = atoms.first()?.subject.clone();
        let mut chain = RelationChain {
            source_text: String::new(),
            head,
            atoms,
        };
        chain.source_text = render_chain(&chain).unwrap_or_default();
        Some(chain)
    }

    /// Structural equality, ignoring the source text.
    pub fn same_structure(&self, other: &RelationChain) -> bool {
        self.head == other.head && self.atoms == other.atoms
    }
}
