use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stancepu_core::error::{Error, Result};
use stancepu_core::evidence::{Aggregation, EvidenceOptions, LabelMap, LogitRecord};
use stancepu_core::io::{self, BestPolicyFile, Provenance};
use stancepu_core::relpath::{lint_file, PathOptions};
use stancepu_core::report::{decode_with_policy, evaluate_policy, EvalReport, Report};
use stancepu_core::search::{grid_search, sensitivity_report, HyperGrid, SearchOptions};
use stancepu_core::stats::{pu_sweep, CorrectnessSource, SweepConfig};
use stancepu_core::{CalibrationScope, Category, DecodingPolicy, F1Report, Split, StanceLabel};

#[derive(Parser, Debug)]
#[command(name = "stancepu", version, about = "Uncertainty-aware stance decoding over saved logits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decode records with a fixed policy and write decisions.csv.
    Decode(RunArgs),
    /// Grid-search decoding policies; writes search.csv, sensitivity.csv and best_policy.json.
    Search(RunArgs),
    /// F1 and low/high-PU split for a fixed policy; writes eval.json, eval.csv and decisions.csv.
    Eval(RunArgs),
    /// Welch t, Mann-Whitney U and logistic tests of PU against correctness per K; writes stats.csv.
    Stats(RunArgs),
    /// Validate relations and transmission paths in an augmented corpus.
    Lint(LintArgs),
    /// Eval, stats and search in one merged report.json plus plot-ready CSVs.
    Report(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    Global,
    PerCategory,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CorrectnessArg {
    Dynamic,
    Greedy,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Logit records (JSONL).
    #[arg(long)]
    records: PathBuf,
    /// Calibration and evaluated splits.
    #[arg(long, default_value = "validation:test")]
    splits: String,
    /// Token-to-label map (TSV); defaults to the built-in vocabulary.
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Grid overrides (TOML).
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Fixed policy (JSON), bare or a best_policy.json file.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Base seed; overrides the policy and grid seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep only records of this communication category.
    #[arg(long)]
    category: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Label evidence pooling.
    #[arg(long, default_value = "sum")]
    aggregation: String,
    /// Treat every token as its own candidate (non-clustered baseline).
    #[arg(long)]
    no_clustering: bool,
    #[arg(long, value_enum, default_value = "global")]
    scope: ScopeArg,
    /// Prediction whose correctness the stats sweep tests.
    #[arg(long, value_enum, default_value = "dynamic")]
    correctness: CorrectnessArg,
}

#[derive(Args, Debug)]
struct LintArgs {
    /// Augmented corpus (JSONL).
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Comma-separated admissible transmission channels.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<String>>,
}

struct Inputs {
    calibration: Vec<LogitRecord>,
    evaluated: Vec<LogitRecord>,
    map: LabelMap,
    options: SearchOptions,
    provenance: Provenance,
    seed: u64,
}

fn parse_splits(s: &str) -> Result<(Split, Split)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("--splits expects CAL:EVAL, got `{s}`")))?;
    let a: Split = a.parse().map_err(Error::Config)?;
    let b: Split = b.parse().map_err(Error::Config)?;
    if a == b {
        return Err(Error::Config("calibration and evaluated splits must differ".into()));
    }
    Ok((a, b))
}

impl RunArgs {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(stancepu_core::decoding::DEFAULT_SEED)
    }

    fn load(&self) -> Result<Inputs> {
        let (cal_split, eval_split) = parse_splits(&self.splits)?;
        let aggregation: Aggregation = self.aggregation.parse().map_err(Error::Config)?;
        let category: Option<Category> = self
            .category
            .as_deref()
            .map(|c| c.parse().map_err(Error::Config))
            .transpose()?;
        let mut records = io::load_records(&self.records)?;
        if let Some(c) = category {
            records.retain(|r| r.category == c);
        }
        let map = match &self.label_map {
            Some(p) => io::load_label_map(p)?,
            None => LabelMap::default_vocabulary(),
        };
        let mut provenance = Provenance::new(self.seed());
        provenance.add_input("records", &self.records)?;
        if let Some(p) = &self.label_map {
            provenance.add_input("label_map", p)?;
        }
        if let Some(p) = &self.grid {
            provenance.add_input("grid", p)?;
        }
        if let Some(p) = &self.policy {
            provenance.add_input("policy", p)?;
        }
        let pick = |s: Split| records.iter().filter(|r| r.split == s).cloned().collect::<Vec<_>>();
        let calibration = pick(cal_split);
        let evaluated = pick(eval_split);
        if calibration.is_empty() {
            return Err(Error::Config(format!("no `{cal_split}` records to calibrate on")));
        }
        if evaluated.is_empty() {
            return Err(Error::Config(format!("no `{eval_split}` records to evaluate")));
        }
        let options = SearchOptions {
            evidence: EvidenceOptions {
                aggregation,
                clustered: !self.no_clustering,
            },
            scope: match self.scope {
                ScopeArg::Global => CalibrationScope::Global,
                ScopeArg::PerCategory => CalibrationScope::PerCategory,
            },
        };
        Ok(Inputs {
            calibration,
            evaluated,
            map,
            options,
            provenance,
            seed: self.seed(),
        })
    }

    fn policy(&self) -> Result<DecodingPolicy> {
        let mut policy = match &self.policy {
            Some(p) => io::load_policy(p)?,
            None => DecodingPolicy::default(),
        };
        if let Some(seed) = self.seed {
            policy.base_seed = seed;
        }
        Ok(policy)
    }

    fn grid(&self) -> Result<HyperGrid> {
        let mut grid = match &self.grid {
            Some(p) => io::load_grid(p)?,
            None => HyperGrid::default(),
        };
        if let Some(seed) = self.seed {
            grid.base_seed = seed;
        }
        Ok(grid)
    }

    fn sweep_config(&self, policy: DecodingPolicy, grid: &HyperGrid, options: SearchOptions) -> SweepConfig {
        SweepConfig {
            ks: grid.ks.clone(),
            policy,
            correctness: match self.correctness {
                CorrectnessArg::Dynamic => CorrectnessSource::Dynamic,
                CorrectnessArg::Greedy => CorrectnessSource::Greedy,
            },
            evidence: options.evidence,
            scope: options.scope,
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn eval_csv(report: &EvalReport) -> String {
    let mut rows: Vec<(String, &str, &F1Report)> = vec![("all".into(), "all", &report.overall)];
    for (c, r) in &report.per_category {
        rows.push((c.to_string(), "all", r));
    }
    if let Some(r) = &report.pu_split.low {
        rows.push(("all".into(), "low_pu", r));
    }
    if let Some(r) = &report.pu_split.high {
        rows.push(("all".into(), "high_pu", r));
    }
    let mut out = String::from("group,partition,n,macro_f1,weighted_f1,f1_hawkish,f1_dovish,f1_neutral\n");
    for (group, partition, r) in rows {
        let f1 = |l: StanceLabel| io::fmt_f64(r.class(l).f1);
        out.push_str(&format!(
            "{group},{partition},{},{},{},{},{},{}\n",
            r.support,
            io::fmt_f64(r.macro_f1),
            io::fmt_f64(r.weighted_f1),
            f1(StanceLabel::Hawkish),
            f1(StanceLabel::Dovish),
            f1(StanceLabel::Neutral),
        ));
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    io::write_text(path, contents)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run_decode(args: &RunArgs) -> Result<()> {
    let inputs = args.load()?;
    let policy = args.policy()?;
    let (table, decisions) =
        decode_with_policy(&inputs.calibration, &inputs.evaluated, &inputs.map, &policy, inputs.options)?;
    write(&args.out("decisions.csv"), &io::decisions_csv(&decisions))?;
    println!(
        "decoded {} records (PU cutoff {})",
        decisions.len(),
        io::fmt_f64(table.global.pu_cutoff)
    );
    Ok(())
}

fn run_search(args: &RunArgs) -> Result<()> {
    let inputs = args.load()?;
    let grid = args.grid()?;
    let result = grid_search(&inputs.calibration, &inputs.evaluated, &grid, &inputs.map, inputs.options)?;
    let best = BestPolicyFile::new(&result, &grid, inputs.provenance);
    write(&args.out("search.csv"), &io::search_csv(&result.points))?;
    write(&args.out("sensitivity.csv"), &io::sensitivity_csv(&sensitivity_report(&result.points)))?;
    write(&args.out("best_policy.json"), &io::to_pretty_json(&best))?;
    let p = &best.policy;
    println!(
        "searched {} points; best {}/{} k={} percentile={} temperature={} (validation weighted F1 {})",
        result.points.len(),
        p.aggressive,
        p.conservative,
        p.k,
        io::fmt_f64(p.threshold_percentile),
        io::fmt_f64(p.temperature),
        io::fmt_f64(best.validation.weighted_f1)
    );
    Ok(())
}

fn run_eval(args: &RunArgs) -> Result<()> {
    let inputs = args.load()?;
    let policy = args.policy()?;
    let (decisions, report) =
        evaluate_policy(&inputs.calibration, &inputs.evaluated, &inputs.map, &policy, inputs.options)?;
    write(&args.out("decisions.csv"), &io::decisions_csv(&decisions))?;
    write(&args.out("eval.csv"), &eval_csv(&report))?;
    write(&args.out("eval.json"), &io::to_pretty_json(&report))?;
    println!(
        "macro F1 {} weighted F1 {} over {} records",
        io::fmt_f64(report.overall.macro_f1),
        io::fmt_f64(report.overall.weighted_f1),
        report.records
    );
    Ok(())
}

fn run_stats(args: &RunArgs) -> Result<()> {
    let inputs = args.load()?;
    let config = args.sweep_config(args.policy()?, &args.grid()?, inputs.options);
    let rows = pu_sweep(&inputs.evaluated, &inputs.calibration, &inputs.map, &config)?;
    write(&args.out("stats.csv"), &io::sweep_csv(&rows))?;
    println!("{} sweep rows over {} K values", rows.len(), config.ks.len());
    Ok(())
}

fn run_report(args: &RunArgs) -> Result<()> {
    let inputs = args.load()?;
    let policy = args.policy()?;
    let grid = args.grid()?;
    let (decisions, eval) =
        evaluate_policy(&inputs.calibration, &inputs.evaluated, &inputs.map, &policy, inputs.options)?;
    let config = args.sweep_config(policy, &grid, inputs.options);
    let sweep = pu_sweep(&inputs.evaluated, &inputs.calibration, &inputs.map, &config)?;
    let result = grid_search(&inputs.calibration, &inputs.evaluated, &grid, &inputs.map, inputs.options)?;
    let sensitivity = sensitivity_report(&result.points);
    write(&args.out("decisions.csv"), &io::decisions_csv(&decisions))?;
    write(&args.out("eval.csv"), &eval_csv(&eval))?;
    write(&args.out("pvalues.csv"), &io::sweep_csv(&sweep))?;
    write(&args.out("search.csv"), &io::search_csv(&result.points))?;
    write(&args.out("sensitivity.csv"), &io::sensitivity_csv(&sensitivity))?;
    let report = Report {
        eval,
        sweep,
        best: result.best,
        sensitivity,
        provenance: inputs.provenance,
    };
    write(&args.out("report.json"), &io::to_pretty_json(&report))?;
    println!("report written to {} (seed {})", args.out.display(), inputs.seed);
    Ok(())
}

/// Findings make the exit status 1 but the reports are still written.
fn run_lint(args: &LintArgs) -> Result<bool> {
    let mut options = PathOptions::default();
    if let Some(channels) = &args.channels {
        options.channels = channels.clone();
    }
    let report = lint_file(&args.records, &options)?;
    let text = report.to_text();
    io::write_text(&args.out.join("lint.txt"), &text)?;
    io::write_text(&args.out.join("lint.json"), &io::to_pretty_json(&report))?;
    print!("{text}");
    Ok(report.is_clean())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Decode(a) => run_decode(a).map(|_| true),
        Command::Search(a) => run_search(a).map(|_| true),
        Command::Eval(a) => run_eval(a).map(|_| true),
        Command::Stats(a) => run_stats(a).map(|_| true),
        Command::Report(a) => run_report(a).map(|_| true),
        Command::Lint(a) => run_lint(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
