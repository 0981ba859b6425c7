//! Command-line driver. `run` returns the process exit code: 0 on success,
//! 1 for invalid input or configuration, 2 for runtime failures.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::{Checkpoint, DataSource, CHECKPOINT_VERSION};
use crate::config::ExperimentConfig;
use crate::data::{load_csv, preprocess, select_by_variance, split_8_1_1, FlowRecord, Preprocessed};
use crate::encoding::ScalingStats;
use crate::error::{Error, Result};
use crate::experiment::{evaluate, run_lifelong, synthetic_workload, with_threads, EvalReport, LifelongReport, Workload};
use crate::rng::{sub_seed, Stream};
use crate::verify::synth_verify;

#[derive(Debug, Parser)]
#[command(name = "dsnn", version, about = "Lifelong intrusion detection with a growing spiking network")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (the cache directory for `preprocess`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for evaluation, overriding the config.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Load raw flow CSVs, split, scale and write the feature cache.
    Preprocess,
    /// Train Phase 1, then Phase 2 task by task next to the static twin.
    Lifelong {
        /// Use the generated cluster workload instead of the cache.
        #[arg(long)]
        synthetic: bool,
    },
    /// Re-evaluate a checkpoint on its test data.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run the property checks and the synthetic two-task comparison.
    SynthVerify,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32> {
    let mut cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Preprocess => {
            if let Some(out) = &cli.common.out {
                cfg.data.cache_dir = out.clone();
            }
            let hash = cmd_preprocess(&cfg)?;
            println!("manifest sha256 {hash}");
            Ok(0)
        }
        Command::Lifelong { synthetic } => {
            if let Some(out) = &cli.common.out {
                cfg.output_dir = out.clone();
            }
            let report = cmd_lifelong(&cfg, *synthetic)?;
            for (name, v) in [("dynamic", &report.dynamic), ("static", &report.static_twin)] {
                println!(
                    "{name}: task-1 recall {:.4}, mean forgetting {:.4}, overall {:.4}, neurons {}",
                    v.task1_recall, v.mean_forgetting, v.eval.overall_accuracy, v.eval.phase2_neurons
                );
            }
            Ok(0)
        }
        Command::Eval { checkpoint } => {
            let out = cli.common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let report = cmd_eval(checkpoint, &out, cfg.threads)?;
            println!(
                "phase1 accuracy {:.4}, dynamic overall {:.4}, static overall {:.4}",
                report.dynamic.phase1_accuracy, report.dynamic.overall_accuracy, report.static_twin.overall_accuracy
            );
            Ok(0)
        }
        Command::SynthVerify => {
            if let Some(out) = &cli.common.out {
                cfg.output_dir = out.clone();
            }
            let report = with_threads(cfg.threads, || synth_verify(&cfg, cfg.seed))??;
            std::fs::create_dir_all(&cfg.output_dir)?;
            write_json(&cfg.output_dir.join("synth_verify.json"), &report)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("run  dynamic_t1  static_t1");
            for r in &report.runs {
                println!("{:<4} {:<11.4} {:.4}", r.run, r.dynamic_task1_recall, r.static_task1_recall);
            }
            if report.passed {
                Ok(0)
            } else {
                eprintln!("error: {} checks failed", report.checks.iter().filter(|c| !c.passed).count());
                Ok(2)
            }
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub feature_count: usize,
    pub features: Vec<String>,
    pub stats: ScalingStats,
    pub sources: Vec<SourceFile>,
    pub loaded: usize,
    pub skipped: usize,
    pub excluded: usize,
    /// `[train, validation, test]` rows written per category.
    pub categories: BTreeMap<String, [usize; 3]>,
    pub rows: [usize; 3],
    pub dropped: [usize; 3],
    pub files: BTreeMap<String, String>,
}

const SPLITS: [&str; 3] = ["train", "validation", "test"];

/// Writes the feature cache and returns the manifest hash.
pub fn cmd_preprocess(cfg: &ExperimentConfig) -> Result<String> {
    let data = &cfg.data;
    if data.csv.is_empty() {
        return Err(Error::Config("data.csv lists no input files".into()));
    }
    let loaded = load_csv(&data.csv, &data.schema)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let total = loaded.records.len();
    let records: Vec<FlowRecord> = loaded
        .records
        .into_iter()
        .filter(|r| !data.excluded.contains(&r.category))
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let categories: Vec<&str> = records.iter().map(|r| r.category.as_str()).collect();
    let split = split_8_1_1(&categories, sub_seed(cfg.seed, Stream::Split))?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let parts = [pick(&split.train), pick(&split.validation), pick(&split.test)];
    let part_idx = [&split.train, &split.validation, &split.test];

    let features = if data.features.is_empty() {
        let all: Vec<String> = data.schema.columns.iter().map(|c| c.name.clone()).collect();
        let (scaled, _) = preprocess(&parts[0], &data.schema, &all, None)?;
        select_by_variance(&scaled.rows, &all, data.variance_features)?
    } else {
        data.features.clone()
    };
    let (train, pre) = preprocess(&parts[0], &data.schema, &features, None)?;
    let outputs: [Preprocessed; 3] = [
        train,
        preprocess(&parts[1], &data.schema, &features, Some(&pre))?.0,
        preprocess(&parts[2], &data.schema, &features, Some(&pre))?.0,
    ];

    let dir = &data.cache_dir;
    std::fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    let mut categories_out: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for (k, (name, out)) in SPLITS.iter().zip(&outputs).enumerate() {
        let path = dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["id".to_string()];
        header.extend(features.iter().cloned());
        header.push("category".into());
        w.write_record(&header)?;
        for (row, (&kept, cat)) in out.rows.iter().zip(out.kept.iter().zip(&out.categories)) {
            let mut rec = vec![part_idx[k][kept].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(cat.clone());
            w.write_record(&rec)?;
            categories_out.entry(cat.clone()).or_default()[k] += 1;
        }
        w.flush()?;
        drop(w);
        files.insert(format!("{name}.csv"), sha256_hex(&std::fs::read(&path)?));
    }
    write_json(&dir.join("stats.json"), &pre.stats)?;
    write_json(&dir.join("preprocessor.json"), &pre)?;
    for name in ["stats.json", "preprocessor.json"] {
        files.insert(name.to_string(), sha256_hex(&std::fs::read(dir.join(name))?));
    }

    let sources = data
        .csv
        .iter()
        .map(|p| {
            Ok(SourceFile {
                path: p.clone(),
                sha256: sha256_hex(&std::fs::read(p)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        version: 1,
        seed: cfg.seed,
        feature_count: features.len(),
        features,
        stats: pre.stats.clone(),
        sources,
        loaded: total,
        skipped: loaded.skipped,
        excluded: total - records.len(),
        categories: categories_out,
        rows: [outputs[0].rows.len(), outputs[1].rows.len(), outputs[2].rows.len()],
        dropped: [outputs[0].dropped, outputs[1].dropped, outputs[2].dropped],
        files,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("manifest.json"), &bytes)?;
    let hash = sha256_hex(&bytes);
    std::fs::write(dir.join("manifest.sha256"), format!("{hash}\n"))?;
    Ok(hash)
}

struct CacheSplit {
    ids: Vec<u64>,
    rows: Vec<Vec<f64>>,
    categories: Vec<String>,
}

fn read_split(dir: &Path, name: &str, dim: usize) -> Result<CacheSplit> {
    let path = dir.join(format!("{name}.csv"));
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let mut reader = csv::Reader::from_path(&path)?;
    let mut out = CacheSplit {
        ids: Vec::new(),
        rows: Vec::new(),
        categories: Vec::new(),
    };
    let corrupt = |reason: String| Error::Schema {
        path: path.clone(),
        reason,
    };
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != dim + 2 {
            return Err(corrupt(format!("row has {} fields, expected {}", rec.len(), dim + 2)));
        }
        out.ids.push(rec[0].parse().map_err(|_| corrupt(format!("bad id {}", &rec[0])))?);
        let row = (1..=dim)
            .map(|k| rec[k].parse::<f64>().map_err(|_| corrupt(format!("bad value {}", &rec[k]))))
            .collect::<Result<Vec<_>>>()?;
        out.rows.push(row);
        out.categories.push(rec[dim + 1].to_string());
    }
    Ok(out)
}

/// Train and test splits of a preprocessed cache as a task workload.
pub fn load_cache_workload(cfg: &ExperimentConfig, dir: &Path) -> Result<Workload> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(Error::MissingFile(manifest_path));
    }
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
    let train = read_split(dir, "train", manifest.feature_count)?;
    let test = read_split(dir, "test", manifest.feature_count)?;
    let n_train = train.rows.len();
    let mut rows = train.rows;
    rows.extend(test.rows);
    let mut categories = train.categories;
    categories.extend(test.categories);
    let mut ids = train.ids;
    ids.extend(test.ids);
    let train_idx: Vec<usize> = (0..n_train).collect();
    let test_idx: Vec<usize> = (n_train..rows.len()).collect();
    Workload::from_rows(
        &rows,
        &categories,
        &ids,
        &train_idx,
        &test_idx,
        &cfg.data.tasks,
        &cfg.data.benign_category,
        &cfg.data.excluded,
    )
}

pub fn cmd_lifelong(cfg: &ExperimentConfig, synthetic: bool) -> Result<LifelongReport> {
    let seed = cfg.seed;
    let (workload, source) = if synthetic {
        (synthetic_workload(&cfg.synth, seed)?.workload, DataSource::Synthetic { seed })
    } else {
        let dir = cfg.data.cache_dir.clone();
        (load_cache_workload(cfg, &dir)?, DataSource::Cache { dir })
    };
    let run = with_threads(cfg.threads, || run_lifelong(&workload, cfg, seed))??;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    write_json(&out.join("report.json"), &run.report)?;
    write_tables(out, &run.report)?;
    Checkpoint {
        version: CHECKPOINT_VERSION,
        seed,
        config: cfg.clone(),
        source,
        class_names: workload.class_names.clone(),
        phase1: run.phase1,
        dynamic: run.dynamic,
        static_twin: run.static_twin,
    }
    .save(&out.join("checkpoint.json"))?;
    Ok(run.report)
}

fn write_tables(out: &Path, r: &LifelongReport) -> Result<()> {
    let variants = [("dynamic", &r.dynamic), ("static", &r.static_twin)];

    let mut w = csv::Writer::from_path(out.join("accuracy_matrix.csv"))?;
    w.write_record(["variant", "eval_task", "after_task", "accuracy"])?;
    for (name, v) in variants {
        for (t, row) in v.accuracy.iter().enumerate() {
            for (k, a) in row.iter().enumerate() {
                if let Some(a) = a {
                    w.write_record([name.to_string(), t.to_string(), k.to_string(), a.to_string()])?;
                }
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("trajectory.csv"))?;
    w.write_record(["variant", "batch", "neurons"])?;
    for (name, v) in variants {
        for (b, n) in &v.trajectory {
            w.write_record([name.to_string(), b.to_string(), n.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("events.csv"))?;
    w.write_record(["batch", "event", "neuron_id"])?;
    for e in &r.dynamic.events {
        let kind = serde_json::to_value(e.event)?;
        w.write_record([e.batch.to_string(), kind.as_str().unwrap_or_default().to_string(), e.neuron_id.to_string()])?;
    }
    w.flush()?;

    write_per_class(&out.join("per_class.csv"), &[("dynamic", &r.dynamic.eval), ("static", &r.static_twin.eval)])?;

    let mut w = csv::Writer::from_path(out.join("comparison.csv"))?;
    w.write_record(["metric", "dynamic", "static"])?;
    let (d, s) = (&r.dynamic, &r.static_twin);
    let rows: [(&str, f64, f64); 9] = [
        ("task1_recall", d.task1_recall, s.task1_recall),
        ("mean_forgetting", d.mean_forgetting, s.mean_forgetting),
        ("phase1_accuracy", d.eval.phase1_accuracy, s.eval.phase1_accuracy),
        ("phase2_accuracy", d.eval.phase2_accuracy, s.eval.phase2_accuracy),
        ("overall_accuracy", d.eval.overall_accuracy, s.eval.overall_accuracy),
        ("cascade_accuracy", d.eval.cascade_accuracy, s.eval.cascade_accuracy),
        ("phase1_sparsity", d.eval.phase1_sparsity, s.eval.phase1_sparsity),
        ("phase2_sparsity", d.eval.phase2_sparsity, s.eval.phase2_sparsity),
        ("phase2_neurons", d.eval.phase2_neurons as f64, s.eval.phase2_neurons as f64),
    ];
    for (m, a, b) in rows {
        w.write_record([m.to_string(), a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_per_class(path: &Path, evals: &[(&str, &EvalReport)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "class", "precision", "recall", "support"])?;
    for (name, e) in evals {
        for c in &e.per_class {
            w.write_record([
                name.to_string(),
                c.class.clone(),
                c.precision.to_string(),
                c.recall.to_string(),
                c.support.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub dynamic: EvalReport,
    #[serde(rename = "static")]
    pub static_twin: EvalReport,
}

pub fn cmd_eval(checkpoint: &Path, out: &Path, threads: usize) -> Result<EvalPair> {
    let ck = Checkpoint::load(checkpoint)?;
    let workload = match &ck.source {
        DataSource::Synthetic { seed } => synthetic_workload(&ck.config.synth, *seed)?.workload,
        DataSource::Cache { dir } => load_cache_workload(&ck.config, dir)?,
    };
    if workload.class_names != ck.class_names {
        return Err(Error::Checkpoint("class list differs from the evaluation data".into()));
    }
    let (dyn_cfg, static_cfg) = (ck.config.model(), ck.config.static_model());
    let report = with_threads(threads, || -> Result<EvalPair> {
        Ok(EvalPair {
            dynamic: evaluate(&ck.phase1, &ck.dynamic, &workload.test, &ck.class_names, &dyn_cfg, ck.seed)?,
            static_twin: evaluate(&ck.phase1, &ck.static_twin, &workload.test, &ck.class_names, &static_cfg, ck.seed)?,
        })
    })??;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("eval_report.json"), &report)?;
    write_per_class(
        &out.join("eval_per_class.csv"),
        &[("dynamic", &report.dynamic), ("static", &report.static_twin)],
    )?;
    let mut f = std::fs::File::create(out.join("eval_sparsity.csv"))?;
    writeln!(f, "variant,phase1,phase2")?;
    for (name, e) in [("dynamic", &report.dynamic), ("static", &report.static_twin)] {
        writeln!(f, "{name},{},{}", e.phase1_sparsity, e.phase2_sparsity)?;
    }
    Ok(report)
}
