use stancepu_core::io::{load_records, write_records};
use stancepu_core::report::evaluate_policy;
use stancepu_core::search::{grid_search, HyperGrid, SearchOptions};
use stancepu_core::stats::{pu_sweep, welch_t_test, SweepConfig, TestKind};
use stancepu_core::synth::{generate, split_of, FixtureConfig};
use stancepu_core::{DecodingPolicy, LabelMap, Split, StrategyPair};

fn corpus() -> (Vec<stancepu_core::LogitRecord>, Vec<stancepu_core::LogitRecord>) {
    let records = generate(&FixtureConfig {
        blank_fraction: 0.05,
        ..FixtureConfig::default()
    });
    (split_of(&records, Split::Validation), split_of(&records, Split::Test))
}

#[test]
fn records_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/records.jsonl");
    let records = generate(&FixtureConfig::default());
    write_records(&path, &records).unwrap();
    assert_eq!(load_records(&path).unwrap(), records);
}

#[test]
fn evaluation_counts_add_up() {
    let (val, test) = corpus();
    let map = LabelMap::default_vocabulary();
    let (decisions, report) =
        evaluate_policy(&val, &test, &map, &DecodingPolicy::default(), SearchOptions::default()).unwrap();
    assert_eq!(decisions.len(), test.len());
    assert_eq!(report.overall.support as usize, test.len());
    assert!(report.zero_evidence > 0);
    // Zero-evidence records never reach the low-PU partition.
    assert!(report.pu_split.high_count >= report.zero_evidence);
    assert!(report.overall.macro_f1 > 0.5);
}

#[test]
fn search_best_is_the_validation_maximum() {
    let (val, test) = corpus();
    let grid = HyperGrid {
        ks: vec![3, 10],
        percentiles: vec![1.0, 0.9, 0.7],
        temperatures: vec![0.2, 1.0],
        strategy_pairs: StrategyPair::all(),
        ..HyperGrid::default()
    };
    let r = grid_search(&val, &test, &grid, &LabelMap::default_vocabulary(), SearchOptions::default()).unwrap();
    assert_eq!(r.points.len(), 2 * 3 * 2 * 6);
    let top = r
        .points
        .iter()
        .map(|p| p.validation.weighted_f1)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.best.validation.weighted_f1, top);
}

#[test]
fn sweep_welch_rows_match_a_direct_test() {
    let (val, test) = corpus();
    let map = LabelMap::default_vocabulary();
    let config = SweepConfig {
        ks: vec![10],
        policy: DecodingPolicy::default(),
        correctness: Default::default(),
        evidence: Default::default(),
        scope: Default::default(),
    };
    let rows = pu_sweep(&test, &val, &map, &config).unwrap();
    assert_eq!(rows.len(), 3);
    let (decisions, _) = evaluate_policy(&val, &test, &map, &config.policy, SearchOptions::default()).unwrap();
    let (mut right, mut wrong) = (Vec::new(), Vec::new());
    for d in decisions.iter().filter(|d| d.decision.pu.is_finite()) {
        if Some(d.decision.label) == d.gold {
            right.push(d.decision.pu);
        } else {
            wrong.push(d.decision.pu);
        }
    }
    let direct = welch_t_test(&right, &wrong).unwrap();
    let row = rows.iter().find(|r| r.test == TestKind::WelchT).unwrap();
    assert_eq!(row.n_correct, right.len());
    assert_eq!(row.n_incorrect, wrong.len());
    assert_eq!(row.p_value, Some(direct.p_value));
}
