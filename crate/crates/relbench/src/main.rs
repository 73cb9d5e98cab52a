use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relbench::config::ExperimentConfig;
use relbench::manifest::write_synthetic;
use relbench::pipeline::{self, open_oracle, setting_dir};
use relbench::{Error, Result, StageExt};
use relbench_core::train::Objective;

/// Reliability of saliency-map benchmarks: train toy classifiers, explain
/// them, score the explanations and measure how consistently the
/// faithfulness metrics rank the methods.
#[derive(Debug, Parser)]
#[command(name = "relbench", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct Global {
    /// key = value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// dataset directory (train.csv, test.csv)
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// training setting, e.g. baseline or fp+fl
    #[arg(long, global = true)]
    setting: Option<String>,
    /// toy or bridge:<command>
    #[arg(long, global = true)]
    oracle: Option<String>,
    /// worker threads (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<String>,
    /// most or least salient patches first in deletion metrics
    #[arg(long, global = true)]
    deletion_order: Option<String>,
    /// extra config assignments, e.g. --set bootstrap=1000
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write a synthetic dataset to the data directory
    GenData {
        #[arg(long, default_value_t = 2000)]
        images: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
    },
    /// Train the toy network under one setting
    Train,
    /// Saliency maps for the evaluation subset
    Explain,
    /// Faithfulness score matrices
    Faithfulness,
    /// Rankings, alpha and bootstrap reports
    Alpha,
    /// Compare each setting against the baseline
    Compare,
    /// Minimum benchmark size per metric
    Benchsize,
    /// Calibration and accuracy on regular and FP images
    Calib,
    /// Alpha as a function of the interpolation weight
    Interp,
    /// Full pipeline over all configured settings
    Report,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let seed = g.seed.map(|s| s.to_string());
    let threads = g.threads.map(|t| t.to_string());
    let data = g.data.as_ref().map(|p| p.to_string_lossy().into_owned());
    let out = g.out.as_ref().map(|p| p.to_string_lossy().into_owned());
    let flags = [
        ("seed", &seed),
        ("data", &data),
        ("out", &out),
        ("setting", &g.setting),
        ("oracle", &g.oracle),
        ("threads", &threads),
        ("lr", &g.lr),
        ("deletion_order", &g.deletion_order),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let dir = || -> Result<PathBuf> { Ok(setting_dir(cfg.out()?, &cfg.setting)) };
    match cli.command {
        Cmd::GenData {
            images,
            classes,
            size,
            train_fraction,
        } => {
            if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
                return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
            }
            write_synthetic(cfg.data()?, images, classes, size, train_fraction, cfg.seed()?).stage("gen-data")?;
            println!("wrote {images} images to {}", cfg.data()?.display());
        }
        Cmd::Train => {
            let dir = dir()?;
            let log = pipeline::train(&cfg, Objective::Setting(cfg.setting), &dir).stage("train")?;
            for l in &log {
                println!("epoch {} loss {:.4} test accuracy {:.4}", l.epoch, l.loss, l.test_accuracy);
            }
            println!("checkpoint in {}", pipeline::model_dir(&dir).display());
        }
        Cmd::Explain => {
            let dir = dir()?;
            let oracle = open_oracle(&cfg, &dir).stage("load")?;
            pipeline::explain(&cfg, &oracle, &dir).stage("explain")?;
            println!("maps in {}", dir.join("maps.csv").display());
        }
        Cmd::Faithfulness => {
            let dir = dir()?;
            let oracle = open_oracle(&cfg, &dir).stage("load")?;
            pipeline::faithfulness(&cfg, &oracle, &dir).stage("faithfulness")?;
            println!("scores in {}", dir.join("scores").display());
        }
        Cmd::Alpha => {
            for (kind, r) in pipeline::alpha(&cfg, &dir()?).stage("alpha")? {
                println!(
                    "{:<5} alpha {:6.1}  mean {:6.1}  95% CI [{:.1}, {:.1}]",
                    kind.name(),
                    100.0 * r.alpha,
                    100.0 * r.mean,
                    100.0 * r.ci_low,
                    100.0 * r.ci_high
                );
            }
        }
        Cmd::Compare => {
            for (kind, s, c) in pipeline::compare(&cfg, cfg.out()?).stage("compare")? {
                let mark = if c.significant { "*" } else { " " };
                println!("{:<5} {:<10} {}{mark} [{}]", kind.name(), s.name(), c.render(), c.test.name());
            }
        }
        Cmd::Benchsize => {
            let dir = dir()?;
            pipeline::benchsize(&cfg, &dir).stage("benchsize")?;
            println!("results in {}", dir.join("benchsize.csv").display());
        }
        Cmd::Calib => {
            let dir = dir()?;
            let oracle = open_oracle(&cfg, &dir).stage("load")?;
            let r = pipeline::calib(&cfg, &oracle, &dir).stage("calib")?;
            println!(
                "AdaECE regular {:.2} FP {:.2} | accuracy regular {:.2} FP {:.2}",
                100.0 * r.ece_regular,
                100.0 * r.ece_fp,
                100.0 * r.acc_regular,
                100.0 * r.acc_fp
            );
        }
        Cmd::Interp => {
            pipeline::interp(&cfg)?;
            println!("results in {}", cfg.out()?.join("interp.csv").display());
        }
        Cmd::Report => {
            pipeline::report(&cfg)?;
            println!("report in {}", cfg.out()?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
