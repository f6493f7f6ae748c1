//! Uncertainty-aware stance decoding for central-bank text.
//!
//! The pipeline turns per-record top-N token logits into label evidence,
//! scores that evidence with a Dirichlet uncertainty measure, and routes each
//! record to a greedy or a sampling decoder depending on a threshold
//! calibrated on held-out data.

pub mod decoding;
pub mod error;
pub mod evidence;
pub mod io;
pub mod metrics;
pub mod relpath;
pub mod report;
pub mod search;
pub mod special;
pub mod stats;
pub mod synth;
pub mod types;
pub mod uncertainty;

pub use decoding::{
    AggressiveStrategy, Branch, CalibratedThreshold, CalibrationScope, ConservativeStrategy, DecodingPolicy,
    RecordDecision, StanceDecision, ThresholdTable,
};
pub use error::{Error, Result};
pub use evidence::{Aggregation, EvidenceOptions, EvidenceSet, LabelMap, LogitRecord, TokenCandidate};
pub use metrics::{ConfusionMatrix, F1Report, PuSplitReport};
pub use search::{HyperGrid, SearchOptions, SearchResult, StrategyPair};
pub use types::{Category, Split, StanceLabel};
pub use uncertainty::{UncertaintyScores, PU_MAX_SENTINEL};
