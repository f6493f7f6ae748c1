//! Dirichlet-based uncertainty: expected ambiguity (EA), cognitive risk (CR)
//! and their product, perceptual uncertainty (PU).
//!
//! All quantities are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::EvidenceSet;
use crate::special::digamma;

/// PU assigned when the top-K evidence sums to zero. Compares greater than
/// every finite PU.
pub const PU_MAX_SENTINEL: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletEvidence {
    alpha: Vec<f64>,
    alpha0: f64,
}

impl DirichletEvidence {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Domain("Dirichlet evidence needs at least one parameter".into()));
        }
        if let Some(bad) = alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::Domain(format!("Dirichlet parameter {bad} is not a finite nonnegative value")));
        }
        let alpha0 = alpha.iter().sum();
        Ok(DirichletEvidence { alpha, alpha0 })
    }

    pub fn from_evidence_set(ev: &EvidenceSet) -> Result<Self> {
        Self::new(ev.top_k_alpha.clone())
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }
}

/// Returned by [`expected_ambiguity`] when α₀ = 0 and the weights α_k/α₀ do
/// not exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroEvidence;

impl std::fmt::Display for ZeroEvidence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("total evidence is zero")
    }
}

impl std::error::Error for ZeroEvidence {}

/// EA = ψ(α₀ + 1) − Σ_k (α_k / α₀) ψ(α_k + 1), the expected Shannon entropy of
/// a categorical distribution drawn from Dir(α).
pub fn expected_ambiguity(ev: &DirichletEvidence) -> std::result::Result<f64, ZeroEvidence> {
    if ev.alpha0 <= 0.0 {
        return Err(ZeroEvidence);
    }
    let psi = |x: f64| digamma(x).expect("argument is at least one");
    let weighted: f64 = ev
        .alpha
        .iter()
        .filter(|&&a| a > 0.0)
        .map(|&a| (a / ev.alpha0) * psi(a + 1.0))
        .sum();
    let ea = psi(ev.alpha0 + 1.0) - weighted;
    Ok(ea.clamp(0.0, (ev.k() as f64).ln()))
}

/// CR = K / Σ_k (α_k + 1).
pub fn cognitive_risk(ev: &DirichletEvidence) -> f64 {
    let k = ev.k() as f64;
    k / (ev.alpha0 + k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScores {
    pub ea: f64,
    pub cr: f64,
    /// [`PU_MAX_SENTINEL`] when the evidence is all zero.
    pub pu: f64,
}

impl UncertaintyScores {
    pub fn is_zero_evidence(&self) -> bool {
        self.pu == PU_MAX_SENTINEL
    }
}

/// Zero total evidence yields EA = ln K (the entropy ceiling), CR = 1 and the
/// PU sentinel.
pub fn perceptual_uncertainty(ev: &DirichletEvidence) -> UncertaintyScores {
    let cr = cognitive_risk(ev);
    match expected_ambiguity(ev) {
        Ok(ea) => UncertaintyScores { ea, cr, pu: ea * cr },
        Err(ZeroEvidence) => UncertaintyScores {
            ea: (ev.k() as f64).ln(),
            cr,
            pu: PU_MAX_SENTINEL,
        },
    }
}

/// Convenience: PU scores straight from an evidence set.
pub fn score_evidence(ev: &EvidenceSet) -> Result<UncertaintyScores> {
    Ok(perceptual_uncertainty(&DirichletEvidence::from_evidence_set(ev)?))
}
