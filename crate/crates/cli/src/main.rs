//! `qoe`: extract features, train, predict and evaluate streaming QoE models.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use qoe_core::pipeline::{self, RunConfig};
use serde_json::{json, Value};

const THREADS_ENV: &str = "QOE_THREADS";

#[derive(Parser)]
#[command(name = "qoe", version, about = "Streaming video QoE prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic dataset (videos, patterns, manifest)
    Synth,
    /// Write the feature table for a manifest
    Features,
    /// Fit a model on the whole dataset and save it
    Train,
    /// Predict QoE with a saved model
    Predict,
    /// Run an evaluation protocol
    Evaluate,
    /// Rank-sum significance matrix across methods
    Significance,
    /// Median SROCC against training fraction
    Sweep,
}

#[derive(Args)]
struct Opts {
    /// JSON run configuration with dotted keys; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Use a feature table instead of extracting from the manifest
    #[arg(long, global = true)]
    features_csv: Option<PathBuf>,
    #[arg(long, global = true)]
    test_manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    test_features_csv: Option<PathBuf>,
    #[arg(long, global = true)]
    width: Option<usize>,
    #[arg(long, global = true)]
    height: Option<usize>,
    #[arg(long, global = true, value_parser = ["psnr", "ssim", "msssim", "gmsd", "csv"])]
    metric: Option<String>,
    #[arg(long, global = true, value_parser = ["mean", "hysteresis", "vq"])]
    pooling: Option<String>,
    #[arg(long, global = true, value_parser = ["rate", "stall"])]
    memory: Option<String>,
    #[arg(long, global = true, value_parser = ["ridge", "lasso", "svr", "rf", "et", "gb"])]
    regressor: Option<String>,
    /// Comma-separated subset of vqa,m,i,r1,r2
    #[arg(long, global = true)]
    features: Option<String>,
    #[arg(long, global = true, value_parser = ["1", "2", "cross"])]
    experiment: Option<String>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    train_fraction: Option<f64>,
    /// Training fractions for `sweep`
    #[arg(long, global = true, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, global = true)]
    repetitions: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Methods for `significance`: regressors, br, ftw, vsqm, sqi
    #[arg(long, global = true, value_delimiter = ',')]
    compare: Option<Vec<String>>,
    /// Existing report for `significance` (repeatable)
    #[arg(long = "report", global = true)]
    reports: Vec<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Any config key, e.g. `--set synth.n_contents=4` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Opts {
    fn overrides(&self) -> anyhow::Result<Vec<(String, Value)>> {
        let mut o = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
            // Bare words are strings; anything that parses as JSON is taken as JSON.
            let v = serde_json::from_str(v).unwrap_or_else(|_| json!(v));
            o.push((k.to_string(), v));
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| json!(p));
        let pairs = [
            ("manifest", path(&self.manifest)),
            ("features_csv", path(&self.features_csv)),
            ("test_manifest", path(&self.test_manifest)),
            ("test_features_csv", path(&self.test_features_csv)),
            ("width", self.width.map(|v| json!(v))),
            ("height", self.height.map(|v| json!(v))),
            ("metric", self.metric.as_ref().map(|v| json!(v))),
            ("pooling.method", self.pooling.as_ref().map(|v| json!(v))),
            ("memory", self.memory.as_ref().map(|v| json!(v))),
            ("regressor", self.regressor.as_ref().map(|v| json!(v))),
            ("features", self.features.as_ref().map(|v| json!(v))),
            ("experiment", self.experiment.as_ref().map(|v| json!(v))),
            ("trials", self.trials.map(|v| json!(v))),
            ("train_fraction", self.train_fraction.map(|v| json!(v))),
            ("fractions", self.fractions.as_ref().map(|v| json!(v))),
            ("repetitions", self.repetitions.map(|v| json!(v))),
            ("seed", self.seed.map(|v| json!(v))),
            ("alpha", self.alpha.map(|v| json!(v))),
            ("compare", self.compare.as_ref().map(|v| json!(v))),
            ("model", path(&self.model)),
            ("threads", self.threads.map(|v| json!(v))),
            ("out", path(&self.out)),
        ];
        o.extend(pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        if !self.reports.is_empty() {
            o.push(("reports".into(), json!(self.reports)));
        }
        Ok(o)
    }
}

fn thread_count(cfg: &RunConfig, flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n = v
            .trim()
            .parse()
            .map_err(|_| anyhow!("{THREADS_ENV}={v:?} is not a thread count"))?;
        return Ok(Some(n));
    }
    Ok(cfg.threads)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.opts.config.as_deref(), &cli.opts.overrides()?)?;
    if let Some(n) = thread_count(&cfg, cli.opts.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let written = match cli.command {
        Command::Synth => pipeline::cmd_synth(&cfg),
        Command::Features => pipeline::cmd_features(&cfg),
        Command::Train => pipeline::cmd_train(&cfg),
        Command::Predict => pipeline::cmd_predict(&cfg),
        Command::Evaluate => pipeline::cmd_evaluate(&cfg),
        Command::Significance => pipeline::cmd_significance(&cfg),
        Command::Sweep => pipeline::cmd_sweep(&cfg),
    }?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already spell out their causes
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
