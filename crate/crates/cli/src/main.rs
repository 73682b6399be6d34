//! `pqbench`: synthesize events, extract features, train, evaluate and
//! benchmark classifiers.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pqbench::dataio::*;
use pqbench::eval::{benchmark, evaluate, render_heatmap_svg, EvalReport};
use pqbench::features::{extract_features, FeatureVector};
use pqbench::models::{train, ModelKind, ModelSpec};
use pqbench::synth::{generate_dataset, CircuitConfig, EventClass};
use pqbench::wavelet::db4_filters;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "pqbench", version, about = "Power-quality event classification benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labeled waveform dataset (13 classes).
    Synth {
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Records per class.
        #[arg(long, default_value_t = 150, value_parser = clap::value_parser!(u64).range(1..))]
        per_class: u64,
        /// Which split this is; only used to pick the default seed.
        #[arg(long, value_enum)]
        split: Split,
        /// Master seed [default: 42 for train, 43 for test].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract the 288 wavelet features of every record in a dataset.
    Features {
        /// Dataset directory written by `synth`.
        #[arg(long)]
        dataset: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a features CSV.
    Train {
        /// Model name: linear-svm, cubic-svm, rbf-svm, gbt, logreg, knn, cart, forest or gnb.
        #[arg(long)]
        model: ModelKind,
        /// Training features CSV.
        #[arg(long)]
        train: PathBuf,
        /// Output model JSON.
        #[arg(long)]
        out: PathBuf,
        /// Model seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Hyperparameter override KEY=VALUE (repeatable), e.g. c=10 or rounds=100.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Score a trained model on a test features CSV.
    Eval {
        /// Model JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Test features CSV.
        #[arg(long)]
        test: PathBuf,
        /// Output report JSON.
        #[arg(long)]
        report: PathBuf,
        /// Output confusion-matrix heatmap SVG.
        #[arg(long)]
        heatmap: PathBuf,
    },
    /// Train and score every model, then rank them by accuracy.
    Benchmark {
        /// Training features CSV.
        #[arg(long)]
        train: PathBuf,
        /// Test features CSV.
        #[arg(long)]
        test: PathBuf,
        /// Output leaderboard CSV.
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-model reports, confusion CSVs and heatmaps.
        #[arg(long)]
        reports: PathBuf,
        /// Comma-separated model names [default: all nine].
        #[arg(long, value_delimiter = ',')]
        models: Vec<ModelKind>,
        /// Master seed for the model seeds.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Synth { out, per_class, split, seed } => {
            let seed = seed.unwrap_or(match split {
                Split::Train => 42,
                Split::Test => 43,
            });
            ensure_not_file(&out)?;
            let cfg = CircuitConfig::default();
            let records = generate_dataset(&cfg, seed, per_class as usize)?;
            let manifest = write_dataset(&records, &cfg, &out)?;
            println!("wrote {} records to {}", records.len(), manifest.display());
        }
        Command::Features { dataset, out } => {
            ensure_parent(&out)?;
            let ds = read_dataset(&dataset)?;
            let filters = db4_filters()?;
            let feats = ds
                .records
                .par_iter()
                .map(|r| extract_features(r, &filters))
                .collect::<pqbench::Result<Vec<_>>>()?;
            write_features(&out, &feats)?;
            println!("wrote {} feature rows to {}", feats.len(), out.display());
        }
        Command::Train { model, train: csv, out, seed, params } => {
            ensure_parent(&out)?;
            let mut spec = ModelSpec::new(model).with_seed(seed);
            for kv in &params {
                let (k, v) = kv.split_once('=').with_context(|| format!("--param '{kv}' is not KEY=VALUE"))?;
                spec.set_param(k.trim(), v.trim())?;
            }
            let data = read_features(&csv)?;
            let m = train(&spec, &data)?;
            write_model(&out, &m)?;
            println!("trained {model} on {} rows; model written to {}", data.len(), out.display());
        }
        Command::Eval { model, test, report, heatmap } => {
            ensure_parent(&report)?;
            ensure_parent(&heatmap)?;
            let m = read_model(&model)?;
            let data = read_features(&test)?;
            let r = evaluate(&m, &data)?;
            write_report(&report, &r)?;
            write_text(&heatmap, &heatmap_svg(&r))?;
            println!("{}: accuracy {:.4}; {}", r.model, r.accuracy, top_pair_line(&r));
        }
        Command::Benchmark { train: train_csv, test, out, reports, models, seed } => {
            ensure_parent(&out)?;
            ensure_not_file(&reports)?;
            let train_set = read_features(&train_csv)?;
            let test_set = read_features(&test)?;
            check_disjoint(&train_set, &test_set)?;
            let kinds = if models.is_empty() { ModelKind::ALL.to_vec() } else { models };
            let specs: Vec<ModelSpec> = kinds.iter().map(|&k| ModelSpec::new(k).with_seed(seed)).collect();
            let (board, trained) = benchmark(&train_set, &test_set, &specs, seed)?;
            std::fs::create_dir_all(&reports).with_context(|| format!("creating {}", reports.display()))?;
            for m in &trained {
                write_model(&reports.join(format!("{}.model.json", m.spec.kind)), m)?;
            }
            for entry in &board.entries {
                let name = entry.model.name();
                match &entry.report {
                    Some(r) => {
                        write_report(&reports.join(format!("{name}.json")), r)?;
                        write_confusion_csv(&reports.join(format!("{name}.confusion.csv")), &r.confusion)?;
                        write_text(&reports.join(format!("{name}.svg")), &heatmap_svg(r))?;
                        println!("{name:<11} {:.4}", r.accuracy);
                    }
                    None => println!("{name:<11} failed: {}", entry.error.as_deref().unwrap_or("unknown error")),
                }
            }
            write_leaderboard_csv(&out, &board)?;
            if let Some(best) = board.best() {
                println!("best: {} ({:.4}); {}", best.model, best.accuracy, top_pair_line(best));
            }
            if board.entries.iter().all(|e| e.report.is_none()) {
                bail!("every model failed");
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PQBENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("PQBENCH_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if path.is_dir() {
        bail!("{} is a directory", path.display());
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => bail!("directory {} does not exist", p.display()),
        _ => Ok(()),
    }
}

fn ensure_not_file(path: &Path) -> Result<()> {
    if path.exists() && !path.is_dir() {
        bail!("{} exists and is not a directory", path.display());
    }
    Ok(())
}

/// Rejects a test set sharing any feature row with the training set.
fn check_disjoint(train_set: &[FeatureVector], test_set: &[FeatureVector]) -> Result<()> {
    let key = |f: &FeatureVector| f.values.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let seen: HashSet<Vec<u64>> = train_set.iter().map(key).collect();
    if let Some(f) = test_set.iter().find(|f| seen.contains(&key(f))) {
        bail!(
            "test record {} also appears in the training set (were both splits generated with the same seed?)",
            f.record_id
        );
    }
    Ok(())
}

fn heatmap_svg(r: &EvalReport) -> String {
    let names: Vec<&str> = EventClass::ALL.iter().map(|c| c.name()).collect();
    render_heatmap_svg(&r.confusion, &names)
}

fn top_pair_line(r: &EvalReport) -> String {
    match &r.top_pair {
        Some(p) => format!("most confused pair {{{}, {}}} ({} errors)", p.a, p.b, p.count),
        None => "no confusions".to_string(),
    }
}
