//! Command-line front end: `cluster`, `metrics`, `synth` and `inspect`.
//!
//! Exit codes: 0 on success, 2 on usage or validation errors, 1 on
//! numerical failures.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::cluster::{fit, ClusterConfig, ClusteringResult, InitStrategy};
use crate::error::{Error, Result};
use crate::io::{self, Dataset, SynthSpec};
use crate::metrics::{accuracy, nmi};

#[derive(Debug, Parser)]
#[command(name = "tcluster", version, about = "Tensor clustering with a heterogeneous Tucker model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a dataset and write a JSON result document.
    Cluster(ClusterArgs),
    /// Score predicted labels against ground truth.
    Metrics(MetricsArgs),
    /// Generate a synthetic clustered dataset in the TCLS container.
    Synth(SynthArgs),
    /// Print a summary of a dataset.
    Inspect(InspectArgs),
}

#[derive(Debug, Args, Clone, Serialize)]
struct DatasetArgs {
    /// TCLS container, or an IDX image file when --idx-labels is given.
    #[arg(long)]
    dataset: PathBuf,
    /// IDX label file accompanying an IDX image file.
    #[arg(long)]
    idx_labels: Option<PathBuf>,
    /// Keep only these class ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<usize>>,
    /// Keep at most this many samples per class (seeded).
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    k: usize,
    /// Core dimensions J₁x…xJ_{N−1}, e.g. 12x12 (defaults to min(Iₙ, 12)).
    #[arg(long)]
    core_dims: Option<String>,
    /// random | hosvd1 | hosvd2
    #[arg(long, default_value = "random")]
    init: String,
    #[arg(long, default_value_t = 250)]
    max_outer: usize,
    #[arg(long, default_value_t = 1000)]
    rtr_first_outer: usize,
    #[arg(long, default_value_t = 5)]
    rtr_outer: usize,
    #[arg(long, default_value_t = 2)]
    factor_sweeps: usize,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Result document path (JSON); printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Ground-truth labels: integers separated by whitespace or commas.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    per_cluster: usize,
    /// Slice shape, e.g. 8x8.
    #[arg(long, default_value = "8x8")]
    shape: String,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[command(flatten)]
    data: DatasetArgs,
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(['x', 'X', ','])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad dimension list {s:?}")))
        })
        .collect()
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    fs::read_to_string(path)?
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad label {t:?} in {}", path.display())))
        })
        .collect()
}

fn load_dataset(args: &DatasetArgs) -> Result<Dataset> {
    let ds = match &args.idx_labels {
        Some(labels) => io::load_idx(&args.dataset, labels)?,
        None => io::load_dense(&args.dataset)?,
    };
    if args.classes.is_some() || args.per_class.is_some() {
        ds.subsample(args.classes.as_deref(), args.per_class, args.sample_seed)
    } else {
        Ok(ds)
    }
}

#[derive(Debug, Serialize)]
struct RunReport {
    seed: u64,
    ac: Option<f64>,
    nmi: Option<f64>,
    outer_iterations: usize,
    final_model_error: f64,
    error_trace: Vec<f64>,
    labels: Vec<usize>,
    elapsed_seconds: f64,
}

fn report(seed: u64, result: &ClusteringResult, truth: Option<&[usize]>, elapsed: f64) -> Result<RunReport> {
    let (ac, nm) = match truth {
        Some(t) => (Some(accuracy(t, &result.labels)?), Some(nmi(t, &result.labels)?)),
        None => (None, None),
    };
    Ok(RunReport {
        seed,
        ac,
        nmi: nm,
        outer_iterations: result.diagnostics.len(),
        final_model_error: result.factors.error_trace.last().copied().unwrap_or(f64::NAN),
        error_trace: result.factors.error_trace.clone(),
        labels: result.labels.clone(),
        elapsed_seconds: elapsed,
    })
}

fn write_trace(path: &Path, runs: &[(u64, ClusteringResult)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record([
        "seed",
        "iteration",
        "model_error",
        "h",
        "rtr_outer",
        "rtr_inner",
        "rtr_grad_norm",
        "rtr_termination",
    ])
    .map_err(|e| Error::Io(e.into()))?;
    for (seed, r) in runs {
        for d in &r.diagnostics {
            w.write_record([
                seed.to_string(),
                d.iteration.to_string(),
                format!("{:e}", d.model_error),
                format!("{:e}", d.h),
                d.rtr.outer_iterations.to_string(),
                d.rtr.inner_iterations.to_string(),
                format!("{:e}", d.rtr.final_grad_norm()),
                serde_json::to_value(d.rtr.termination)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn run_cluster(args: &ClusterArgs) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let init: InitStrategy = args.init.parse()?;
    let mut cfg = ClusterConfig::new(args.k).with_init(init).with_max_outer(args.max_outer);
    if let Some(d) = &args.core_dims {
        cfg = cfg.with_core_dims(parse_dims(d)?);
    }
    cfg.rtr_first_call_outer = args.rtr_first_outer;
    cfg.rtr_subsequent_outer = args.rtr_outer;
    cfg.factor_sweeps_per_outer = args.factor_sweeps;
    if args.seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let core_dims = cfg.validate(ds.tensor.shape())?;

    let mut runs = Vec::with_capacity(args.seeds.len());
    let mut reports = Vec::with_capacity(args.seeds.len());
    for &seed in &args.seeds {
        let run_cfg = cfg.clone().with_seed(seed);
        let start = Instant::now();
        let result = fit(&ds.tensor, &run_cfg)?;
        let elapsed = start.elapsed().as_secs_f64();
        reports.push(report(seed, &result, ds.labels.as_deref(), elapsed)?);
        runs.push((seed, result));
    }

    let mut cluster_cfg = serde_json::to_value(&cfg).expect("config serializes");
    cluster_cfg["core_dims"] = json!(core_dims);
    cluster_cfg.as_object_mut().expect("object").remove("seed");
    let doc = json!({
        "config": {
            "dataset": {
                "source": args.data,
                "name": ds.name,
                "shape": ds.tensor.shape(),
            },
            "cluster": cluster_cfg,
            "seeds": args.seeds,
        },
        "runs": reports,
        "summary": {
            "ac_mean": mean(reports.iter().filter_map(|r| r.ac)),
            "nmi_mean": mean(reports.iter().filter_map(|r| r.nmi)),
        },
    });
    let text = serde_json::to_string_pretty(&doc).expect("document serializes");
    match &args.out {
        Some(p) => fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    if let Some(t) = &args.trace {
        write_trace(t, &runs)?;
    }
    Ok(())
}

fn run_metrics(args: &MetricsArgs) -> Result<()> {
    let truth = read_labels(&args.truth)?;
    let pred = read_labels(&args.pred)?;
    let doc = json!({ "ac": accuracy(&truth, &pred)?, "nmi": nmi(&truth, &pred)? });
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        k: args.k,
        per_cluster: args.per_cluster,
        slice_shape: parse_dims(&args.shape)?,
        sigma: args.sigma,
        separation: args.separation,
        seed: args.seed,
    };
    let (ds, _) = io::synth_clusters(&spec)?;
    io::save_dense(&args.out, &ds)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "spec": spec, "shape": ds.tensor.shape(), "path": args.out }))
            .expect("serializes")
    );
    Ok(())
}

fn run_inspect(args: &InspectArgs) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let data = ds.tensor.data();
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let counts = ds.labels.as_ref().map(|l| {
        let mut c = BTreeMap::new();
        for &x in l {
            *c.entry(x).or_insert(0usize) += 1;
        }
        c
    });
    let doc = json!({
        "name": ds.name,
        "shape": ds.tensor.shape(),
        "samples": ds.num_samples(),
        "frobenius_norm": ds.tensor.frob_norm(),
        "min": min,
        "max": max,
        "label_counts": counts,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
    Ok(())
}

/// Parses `argv` (including the program name) and runs the chosen subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Cluster(a) => run_cluster(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Synth(a) => run_synth(a),
        Command::Inspect(a) => run_inspect(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}
