//! Command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    fit_algorithm, load_csv, load_libsvm, monte_carlo, score_histogram, split_protocol, AlgoParams, Algorithm,
    BenchConfig, BenchReport, LabelColumn, MinibatchPolicy, RawDataset,
};
use crate::boosters::WeakLearner;
use crate::error::{Error, Result};
use crate::estimation::{write_mow_csv, WilsonParams};
use crate::hedgemower::{run_hedgemower, HedgeMowerConfig, HedgeMowerVariant};
use crate::model::ModelFile;
use crate::trees::TreeParams;

#[derive(Debug, Parser)]
#[command(name = "muffle", version, about = "Semi-supervised ensemble aggregation with muffled scores")]
struct Cli {
    /// Worker threads for trials and forests (default: all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Log per-trial progress to standard error
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Monte-Carlo trials and report mean AUC with 95% intervals
    Bench(BenchArgs),
    /// Train one model on a labeled subsample and save it as JSON
    Train(TrainArgs),
    /// Score a data file with a saved model
    Predict(PredictArgs),
    /// Histogram of a saved model's raw scores on a data file
    Hist(HistArgs),
    /// Per-node Wilson bounds and mow decisions for a single tree
    WilsonReport(WilsonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Learner {
    Tree,
    Stump,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset file
    #[arg(long)]
    data: PathBuf,
    /// File format (default: csv for .csv files, libsvm otherwise)
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// CSV label column, by name or 0-based index (default: last)
    #[arg(long)]
    label_column: Option<String>,
    /// Class mapped to +1; every other class becomes -1
    #[arg(long)]
    positive_class: Option<String>,
}

impl DataArgs {
    fn load(&self) -> Result<RawDataset> {
        let format = self.format.unwrap_or_else(|| {
            match self.data.extension().and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
                _ => Format::Libsvm,
            }
        });
        let positive = self.positive_class.as_deref();
        match format {
            Format::Libsvm => load_libsvm(&self.data, positive),
            Format::Csv => {
                let column = match &self.label_column {
                    None => LabelColumn::Last,
                    Some(c) => c
                        .parse::<usize>()
                        .map(LabelColumn::Index)
                        .unwrap_or_else(|_| LabelColumn::Name(c.clone())),
                };
                load_csv(&self.data, &column, positive)
            }
        }
    }
}

#[derive(Debug, Args)]
struct TrainingArgs {
    /// Labeled examples drawn per trial; the rest are unlabeled
    #[arg(long)]
    labeled: usize,
    /// Boosting iterations, forest size or AdaBoost rounds
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Wilson failure probability (default: 0.01 below 10K labels, 0.005 below 100K, else 0.001)
    #[arg(long)]
    alpha: Option<f64>,
    /// Master seed; the MUFFLE_SEED environment variable overrides it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Unlabeled minibatch size for the MARVIN family (default: all unlabeled rows)
    #[arg(long)]
    batch_size: Option<usize>,
    /// Iterations between minibatch swaps
    #[arg(long, default_value_t = 100)]
    stride: usize,
    /// Swap a single minibatch element instead of resampling the batch
    #[arg(long)]
    replace_minibatch: bool,
    /// Weak learner for MARVIN and AdaBoost
    #[arg(long, value_enum, default_value_t = Learner::Tree)]
    learner: Learner,
    /// Depth limit for every tree (default: unlimited)
    #[arg(long)]
    max_depth: Option<usize>,
}

impl TrainingArgs {
    fn params(&self) -> Result<AlgoParams> {
        if self.trees == 0 {
            return Err(Error::invalid("--trees must be positive"));
        }
        if let Some(a) = self.alpha {
            WilsonParams::new(a)?;
        }
        let tree_params = TreeParams {
            max_depth: self.max_depth,
            ..TreeParams::default()
        };
        Ok(AlgoParams {
            trees: self.trees,
            alpha: self.alpha,
            learner: match self.learner {
                Learner::Tree => WeakLearner::Tree(tree_params),
                Learner::Stump => WeakLearner::Stump,
            },
            tree_params,
            batch_size: self.batch_size,
            stride: self.stride,
            policy: if self.replace_minibatch {
                MinibatchPolicy::Replace
            } else {
                MinibatchPolicy::Resample
            },
            ..AlgoParams::default()
        })
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Algorithms to compare (comma separated)
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    algo: Vec<Algorithm>,
    #[command(flatten)]
    training: TrainingArgs,
    /// Monte-Carlo trials
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Results JSON path
    #[arg(long, default_value = "results.json")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    algo: Algorithm,
    #[command(flatten)]
    training: TrainingArgs,
    /// Model JSON path
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model JSON written by `train`
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Scores CSV path (default: standard output)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HistArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Approximate number of bins
    #[arg(long, default_value_t = 60)]
    bins: usize,
    /// Histogram CSV path (default: standard output)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write an SVG bar chart here
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WilsonArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    labeled: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mow report CSV path (default: standard output)
    #[arg(long)]
    output: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn seed_override(seed: u64) -> std::result::Result<u64, String> {
    match std::env::var("MUFFLE_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| format!("MUFFLE_SEED is not an integer: '{v}'")),
        Err(_) => Ok(seed),
    }
}

fn bench(args: &BenchArgs, jobs: usize, seed: u64) -> Result<()> {
    let data = args.data.load()?;
    let mut config = BenchConfig::new(args.algo.clone(), args.training.labeled, args.trials, seed);
    config.params = args.training.params()?;
    config.jobs = jobs;
    let results = monte_carlo(&data, &config)?;
    let report = BenchReport::new(&data, &config, results);
    let mut out = create(&args.output)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(&args.output, e))?;
    print!("{}", report.table());
    Ok(())
}

fn train(args: &TrainArgs, seed: u64) -> Result<()> {
    let data = args.data.load()?;
    let split = split_protocol(&data, args.training.labeled, seed)?;
    let fitted = fit_algorithm(args.algo, &split.labeled, &split.unlabeled, &args.training.params()?, seed)?;
    if let Ok(auc) = split.hidden.auc(&fitted.scores) {
        log::info!("unlabeled AUC {auc:.4}");
    }
    if fitted.abstained {
        log::warn!("every candidate was mowed; the model abstains");
    }
    ModelFile::new(args.algo.name(), fitted.model).save(&args.output)
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let data = args.data.load()?;
    let scores = model.model.scores(&data.x)?;
    let mut out = csv::Writer::from_writer(sink(args.output.as_deref())?);
    let csv_err = |e: csv::Error| Error::invalid(format!("writing scores: {e}"));
    out.write_record(["row", "score", "label"]).map_err(csv_err)?;
    for (i, s) in scores.iter().enumerate() {
        let label = if *s >= 0.0 { "1" } else { "-1" };
        out.write_record([i.to_string(), s.to_string(), label.to_string()])
            .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::io("<scores>", e))
}

fn hist(args: &HistArgs) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let data = args.data.load()?;
    let h = score_histogram(&model.model.scores(&data.x)?, args.bins)?;
    h.write_csv(sink(args.output.as_deref())?)?;
    if let Some(p) = &args.svg {
        std::fs::write(p, h.to_svg()).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn wilson_report(args: &WilsonArgs, seed: u64) -> Result<()> {
    let data = args.data.load()?;
    let split = split_protocol(&data, args.labeled, seed)?;
    let alpha = args.alpha.unwrap_or_else(|| WilsonParams::default_alpha(args.labeled));
    let config = HedgeMowerConfig::new(1, WilsonParams::new(alpha)?, HedgeMowerVariant::Full);
    let run = run_hedgemower(&split.labeled, &split.unlabeled, &config, seed)?;
    write_mow_csv(&run.nodes, sink(args.output.as_deref())?)
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 2 on usage errors, 1 on data or
/// algorithm errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let seed_of = |seed: u64| seed_override(seed);
    let outcome = match &cli.command {
        Command::Bench(a) => seed_of(a.training.seed).map(|s| bench(a, cli.jobs, s)),
        Command::Train(a) => seed_of(a.training.seed).map(|s| train(a, s)),
        Command::Predict(a) => Ok(predict(a)),
        Command::Hist(a) => Ok(hist(a)),
        Command::WilsonReport(a) => seed_of(a.seed).map(|s| wilson_report(a, s)),
    };
    match outcome {
        Err(usage) => {
            eprintln!("error: {usage}");
            2
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            1
        }
        Ok(Ok(())) => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_file(dir: &Path) -> PathBuf {
        let path = dir.join("toy.libsvm");
        let mut text = String::new();
        for i in 0..80 {
            let label = if i % 2 == 0 { 1 } else { 0 };
            let x = (i % 2) as f64 * -1.0 + (i as f64 * 0.37).sin() * 0.8;
            text += &format!("{label} 1:{x} 2:{}\n", (i as f64 * 1.3).cos());
        }
        std::fs::write(&path, text).unwrap();
        path
    }

    fn run(args: &[&str]) -> i32 {
        run_cli(std::iter::once("muffle").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(&["bench", "--data", "x", "--algo", "nope", "--labeled", "5"]), 2);
        assert_eq!(run(&["frobnicate"]), 2);
        assert_eq!(run(&["--help"]), 0);
    }

    #[test]
    fn data_errors_exit_1() {
        assert_eq!(
            run(&["bench", "--data", "/nonexistent.libsvm", "--algo", "rf", "--labeled", "5"]),
            1
        );
    }

    #[test]
    fn train_predict_hist_report() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_file(dir.path());
        let d = data.to_str().unwrap();
        let model = dir.path().join("m.json");
        let m = model.to_str().unwrap();
        assert_eq!(run(&["train", "--data", d, "--algo", "marvin-c", "--labeled", "30", "--trees", "5", "--output", m]), 0);
        let scores = dir.path().join("s.csv");
        assert_eq!(run(&["predict", "--model", m, "--data", d, "--output", scores.to_str().unwrap()]), 0);
        let text = std::fs::read_to_string(&scores).unwrap();
        assert_eq!(text.lines().count(), 81);
        let hist = dir.path().join("h.csv");
        let svg = dir.path().join("h.svg");
        assert_eq!(
            run(&["hist", "--model", m, "--data", d, "--bins", "10", "--output", hist.to_str().unwrap(), "--svg", svg.to_str().unwrap()]),
            0
        );
        assert!(std::fs::read_to_string(&hist).unwrap().starts_with("bin_left,bin_right,count"));
        let mow = dir.path().join("mow.csv");
        assert_eq!(run(&["wilson-report", "--data", d, "--labeled", "40", "--output", mow.to_str().unwrap()]), 0);
        assert!(std::fs::read_to_string(&mow).unwrap().lines().count() >= 2);
    }

    #[test]
    fn bench_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_file(dir.path());
        let out = dir.path().join("r.json");
        let code = run(&[
            "bench", "--data", data.to_str().unwrap(), "--algo", "hedgemower,rf", "--labeled", "40", "--trials", "3",
            "--trees", "4", "--seed", "7", "--output", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["results"][0]["aucs"].as_array().unwrap().len(), 3);
        assert!(v["results"][0]["nodes"].is_object());
    }
}
