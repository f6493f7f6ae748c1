//! Significance tests relating PU to prediction correctness.
//!
//! All p-values are two-sided.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoding::{
    calibrate, decide_all, greedy, score_records, CalibrationScope, DecodingPolicy, RecordDecision,
};
use crate::error::{Error, Result};
use crate::evidence::{EvidenceOptions, LabelMap, LogitRecord};
use crate::special::{normal_two_sided_p, student_t_two_sided_p};
use crate::search::require_gold;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Stats(format!(
            "t-test needs at least two observations per group (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (mean_a, mean_b) = (mean(a), mean(b));
    let (se_a, se_b) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = se_a + se_b;
    let (n_a, n_b) = (a.len(), b.len());
    if se2 == 0.0 {
        if mean_a == mean_b {
            return Ok(WelchResult {
                t: 0.0,
                df: (n_a + n_b - 2) as f64,
                p_value: 1.0,
                mean_a,
                mean_b,
                n_a,
                n_b,
            });
        }
        return Err(Error::Stats("both groups have zero variance and different means".into()));
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2 / (se_a * se_a / (n_a as f64 - 1.0) + se_b * se_b / (n_b as f64 - 1.0));
    Ok(WelchResult {
        t,
        df,
        p_value: student_t_two_sided_p(t, df),
        mean_a,
        mean_b,
        n_a,
        n_b,
    })
}

/// Largest combined sample size for which the exact null distribution is
/// enumerated.
pub const MWU_EXACT_MAX_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub method: MwuMethod,
    pub n_a: usize,
    pub n_b: usize,
}

/// Midranks (1-based) of the pooled sample plus the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Number of arrangements giving each U value, for sample sizes (m, n).
fn exact_u_counts(m: usize, n: usize) -> Vec<u64> {
    // table[i][j] holds the distribution for i draws from a and j from b.
    let max_u = m * n;
    let mut table = vec![vec![Vec::<u64>::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            let mut dist = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1;
            } else {
                // Largest pooled element from a beats all j b's, or it is from b.
                for (u, c) in table[i - 1][j].iter().enumerate() {
                    dist[u + j] += c;
                }
                for (u, c) in table[i][j - 1].iter().enumerate() {
                    dist[u] += c;
                }
            }
            table[i][j] = dist;
        }
    }
    let out = std::mem::take(&mut table[m][n]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}

/// Mann–Whitney U test. Uses the exact null distribution for tie-free
/// samples with combined size ≤ [`MWU_EXACT_MAX_N`]; otherwise the normal
/// approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Stats("Mann-Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Stats("Mann-Whitney U input contains NaN".into()));
    }
    let (n_a, n_b) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let n = n_a + n_b;

    if ties.is_empty() && n <= MWU_EXACT_MAX_N {
        let counts = exact_u_counts(n_a, n_b);
        let observed = u.round() as usize;
        let total: u64 = counts.iter().sum();
        let lower: u64 = counts[..=observed].iter().sum();
        let upper: u64 = counts[observed..].iter().sum();
        return Ok(MwuResult {
            u,
            p_value: exact_two_sided(lower, upper, total),
            method: MwuMethod::Exact,
            n_a,
            n_b,
        });
    }

    let (fa, fb, fn_) = (n_a as f64, n_b as f64, n as f64);
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (fn_ * (fn_ - 1.0));
    let variance = fa * fb / 12.0 * ((fn_ + 1.0) - tie_term);
    let centre = fa * fb / 2.0;
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let z = ((u - centre).abs() - 0.5).max(0.0) / variance.sqrt();
        normal_two_sided_p(z)
    };
    Ok(MwuResult {
        u,
        p_value,
        method: MwuMethod::NormalApproximation,
        n_a,
        n_b,
    })
}

/// Two-sided exact p from tail counts: min(1, 2·min(lower, upper)/total).
pub fn exact_two_sided(lower: u64, upper: u64, total: u64) -> f64 {
    ((2 * lower.min(upper)) as f64 / total as f64).min(1.0)
}

const IRLS_TOLERANCE: f64 = 1e-10;
const IRLS_MAX_ITER: usize = 100;
/// Standardized slopes beyond this are treated as perfect separation.
const SEPARATION_SLOPE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    /// `None` when separation was detected.
    pub wald_p: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
}

impl LogisticFit {
    pub fn wald_z(&self) -> f64 {
        self.slope / self.se_slope
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Inverse of a symmetric 2×2 matrix, `None` when singular.
fn invert_2x2(h: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return None;
    }
    Some([[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]])
}

/// Gradient and Fisher information of the log-likelihood at (b0, b1).
fn score_and_information(x: &[f64], y: &[bool], b0: f64, b1: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for (&xi, &yi) in x.iter().zip(y) {
        let p = sigmoid(b0 + b1 * xi);
        let r = f64::from(u8::from(yi)) - p;
        let w = p * (1.0 - p);
        g[0] += r;
        g[1] += r * xi;
        h[0][0] += w;
        h[0][1] += w * xi;
        h[1][1] += w * xi * xi;
    }
    h[1][0] = h[0][1];
    (g, h)
}

/// Gradient of the log-likelihood, exposed for stationarity checks.
pub fn logistic_gradient(x: &[f64], y: &[bool], intercept: f64, slope: f64) -> [f64; 2] {
    score_and_information(x, y, intercept, slope).0
}

/// Single-feature logistic regression of `correct` on `pu`, fitted by IRLS on
/// the standardized feature, with a Wald test for the slope.
pub fn logistic_regression_wald(pu: &[f64], correct: &[bool]) -> Result<LogisticFit> {
    if pu.len() != correct.len() {
        return Err(Error::Stats("feature and outcome lengths differ".into()));
    }
    if pu.iter().any(|x| !x.is_finite()) {
        return Err(Error::Stats("logistic regression feature must be finite".into()));
    }
    let positives = correct.iter().filter(|&&c| c).count();
    if positives == 0 || positives == correct.len() {
        return Err(Error::Stats("logistic regression needs both outcome classes".into()));
    }
    let m = mean(pu);
    let s = (pu.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / pu.len() as f64).sqrt();
    if !(s > 0.0) {
        return Err(Error::Stats("logistic regression feature is constant".into()));
    }
    let z: Vec<f64> = pu.iter().map(|x| (x - m) / s).collect();

    let (mut b0, mut b1) = (0.0f64, 0.0f64);
    let mut iterations = 0;
    let mut converged = false;
    let mut separated = false;
    while iterations < IRLS_MAX_ITER {
        iterations += 1;
        let (g, h) = score_and_information(&z, correct, b0, b1);
        let Some(inv) = invert_2x2(h) else {
            separated = true;
            break;
        };
        let d0 = inv[0][0] * g[0] + inv[0][1] * g[1];
        let d1 = inv[1][0] * g[0] + inv[1][1] * g[1];
        b0 += d0;
        b1 += d1;
        if b1.abs() > SEPARATION_SLOPE || !b0.is_finite() || !b1.is_finite() {
            separated = true;
            break;
        }
        if d0.abs().max(d1.abs()) < IRLS_TOLERANCE {
            converged = true;
            break;
        }
    }

    let (_, h) = score_and_information(&z, correct, b0, b1);
    let cov = invert_2x2(h).unwrap_or([[f64::INFINITY, 0.0], [0.0, f64::INFINITY]]);
    // Back to the original scale: slope = b1/s, intercept = b0 − b1·m/s.
    let slope = b1 / s;
    let intercept = b0 - b1 * m / s;
    let se_slope = cov[1][1].sqrt() / s;
    let r = m / s;
    let var_intercept = cov[0][0] - 2.0 * r * cov[0][1] + r * r * cov[1][1];
    let wald_p = (!separated).then(|| normal_two_sided_p(b1 / cov[1][1].sqrt()));
    Ok(LogisticFit {
        intercept,
        slope,
        se_intercept: var_intercept.max(0.0).sqrt(),
        se_slope,
        wald_p,
        iterations,
        converged,
        separated,
    })
}

/// PU values partitioned by whether the decoded label matched gold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupedPu {
    pub correct: Vec<f64>,
    pub incorrect: Vec<f64>,
    /// Zero-evidence records, which carry no finite PU.
    pub excluded: usize,
}

impl GroupedPu {
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = (f64, bool)>) -> Self {
        let mut g = GroupedPu::default();
        for (pu, ok) in outcomes {
            if !pu.is_finite() {
                g.excluded += 1;
            } else if ok {
                g.correct.push(pu);
            } else {
                g.incorrect.push(pu);
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    WelchT,
    MannWhitneyU,
    LogisticWald,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::WelchT, TestKind::MannWhitneyU, TestKind::LogisticWald];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::WelchT => "welch_t",
            TestKind::MannWhitneyU => "mann_whitney_u",
            TestKind::LogisticWald => "logistic_wald",
        }
    }
}

/// One (K, test) entry of the p-value sweep. `statistic` is t, U, or the
/// logistic slope; absent entries carry the reason instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub test: TestKind,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub mean_correct: Option<f64>,
    pub mean_incorrect: Option<f64>,
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub absent_reason: Option<String>,
}

/// Runs the three tests on one grouping.
pub fn run_tests(k: usize, groups: &GroupedPu) -> Vec<SweepRow> {
    let base = |test| SweepRow {
        k,
        test,
        statistic: None,
        p_value: None,
        mean_correct: (!groups.correct.is_empty()).then(|| mean(&groups.correct)),
        mean_incorrect: (!groups.incorrect.is_empty()).then(|| mean(&groups.incorrect)),
        n_correct: groups.correct.len(),
        n_incorrect: groups.incorrect.len(),
        absent_reason: None,
    };
    let absent = |test, reason: String| SweepRow {
        absent_reason: Some(reason),
        ..base(test)
    };
    if groups.correct.is_empty() || groups.incorrect.is_empty() {
        return TestKind::ALL
            .iter()
            .map(|&t| absent(t, "empty correct or incorrect group".into()))
            .collect();
    }
    let welch = match welch_t_test(&groups.correct, &groups.incorrect) {
        Ok(r) => SweepRow {
            statistic: Some(r.t),
            p_value: Some(r.p_value),
            ..base(TestKind::WelchT)
        },
        Err(e) => absent(TestKind::WelchT, e.to_string()),
    };
    let mwu = match mann_whitney_u(&groups.correct, &groups.incorrect) {
        Ok(r) => SweepRow {
            statistic: Some(r.u),
            p_value: Some(r.p_value),
            ..base(TestKind::MannWhitneyU)
        },
        Err(e) => absent(TestKind::MannWhitneyU, e.to_string()),
    };
    let x: Vec<f64> = groups.correct.iter().chain(&groups.incorrect).copied().collect();
    let y: Vec<bool> = std::iter::repeat_n(true, groups.correct.len())
        .chain(std::iter::repeat_n(false, groups.incorrect.len()))
        .collect();
    let logistic = match logistic_regression_wald(&x, &y) {
        Ok(fit) if fit.separated => absent(TestKind::LogisticWald, "perfect separation".into()),
        Ok(fit) => SweepRow {
            statistic: Some(fit.slope),
            p_value: fit.wald_p,
            ..base(TestKind::LogisticWald)
        },
        Err(e) => absent(TestKind::LogisticWald, e.to_string()),
    };
    vec![welch, mwu, logistic]
}

/// Which prediction defines correctness in the sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectnessSource {
    /// Full dynamic decoding with the active policy.
    #[default]
    Dynamic,
    /// Pure greedy decoding with the policy's aggressive strategy.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    /// Strategies, percentile, temperature and seed; `k` is replaced per row.
    pub policy: DecodingPolicy,
    pub correctness: CorrectnessSource,
    pub evidence: EvidenceOptions,
    pub scope: CalibrationScope,
}

/// Outcomes (PU, correct) for the analyzed records at one K.
pub fn pu_outcomes(
    analyzed: &[LogitRecord],
    calibration: &[LogitRecord],
    map: &LabelMap,
    policy: &DecodingPolicy,
    config: &SweepConfig,
) -> Result<Vec<(f64, bool)>> {
    let scored = score_records(analyzed, map, policy.k, config.evidence)?;
    match config.correctness {
        CorrectnessSource::Greedy => Ok(scored
            .iter()
            .map(|s| (s.scores.pu, Some(greedy(&s.evidence, policy.aggressive)) == s.record.gold_label))
            .collect()),
        CorrectnessSource::Dynamic => {
            let cal = score_records(calibration, map, policy.k, config.evidence)?;
            let table = calibrate(&cal, policy.threshold_percentile, config.scope)?;
            let decisions: Vec<RecordDecision> = decide_all(&scored, &table, policy)?;
            Ok(decisions
                .iter()
                .map(|d| (d.decision.pu, Some(d.decision.label) == d.gold))
                .collect())
        }
    }
}

/// p-value table over K. Rows are ordered by K then test.
pub fn pu_sweep(
    analyzed: &[LogitRecord],
    calibration: &[LogitRecord],
    map: &LabelMap,
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    require_gold(analyzed)?;
    config.policy.validate()?;
    if analyzed.is_empty() {
        return Err(Error::Stats("no records to analyze".into()));
    }
    let per_k: Vec<Vec<SweepRow>> = config
        .ks
        .par_iter()
        .map(|&k| {
            let policy = DecodingPolicy { k, ..config.policy };
            let outcomes = pu_outcomes(analyzed, calibration, map, &policy, config)?;
            Ok(run_tests(k, &GroupedPu::from_outcomes(outcomes)))
        })
        .collect::<Result<_>>()?;
    Ok(per_k.into_iter().flatten().collect())
}
