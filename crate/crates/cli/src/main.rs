use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use lps::config::PipelineConfig;
use lps::evaluation::evaluate_dataset;
use lps::fixtures::{synthetic_suite, write_suite};
use lps::pipeline::{evaluate_batch, list_images, run_batch, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "lps", version, about = "Salient object detection by inner and inter label propagation")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute saliency maps for an image or a directory of images.
    Run {
        /// Image file or directory.
        input: PathBuf,
        /// Output directory for maps and reports.
        #[arg(short, long, default_value = "lps_out")]
        out: PathBuf,
        /// key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set gamma2=2.0`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write intermediate rasters under `<out>/stages/`.
        #[arg(long)]
        dump_stages: bool,
        /// Score the maps against ground-truth masks in this directory.
        #[arg(long, value_name = "GT_DIR")]
        eval: Option<PathBuf>,
        /// Images processed in parallel.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Downscale so the longest side is at most this many pixels.
        #[arg(long, value_name = "PIXELS")]
        resize: Option<usize>,
    },
    /// Score existing saliency maps against ground-truth masks.
    Eval {
        maps: PathBuf,
        gt: PathBuf,
        /// Directory for metrics.json, metrics.csv and pr_curve.csv.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write the bundled synthetic fixtures (images/ and gt/).
    Fixtures { dir: PathBuf },
    /// Print the effective configuration.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn inputs(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_dir() {
        let paths = list_images(path)?;
        if paths.is_empty() {
            bail!("no images in {}", path.display());
        }
        Ok(paths)
    } else if path.exists() {
        Ok(vec![path.to_path_buf()])
    } else {
        bail!("input not found: {}", path.display())
    }
}

fn print_means(m: &lps::evaluation::MeanMetrics) {
    println!(
        "precision {:.4}  recall {:.4}  F {:.4}  overlap {:.4}  MAE {:.4}",
        m.precision, m.recall, m.f_measure, m.overlap, m.mae
    );
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            input,
            out,
            config,
            overrides,
            dump_stages,
            eval,
            workers,
            resize,
        } => {
            let cfg = PipelineConfig::load(config.as_deref(), &overrides)?;
            let paths = inputs(&input)?;
            let opts = RunOptions {
                resize_max: resize.unwrap_or(0),
                dump_stages,
            };
            let report = run_batch(&paths, &out, &cfg, workers, &opts)?;
            let s = &report.summary;
            println!(
                "{} processed, {} inner, {} inter, {} failed -> {}",
                s.images,
                s.inner,
                s.inter,
                s.failed,
                out.display()
            );
            for f in &report.failures {
                eprintln!("failed: {}: {}", f.input, f.error);
            }
            if let Some(gt) = eval {
                let metrics = evaluate_batch(&report, &out, &gt, &cfg)?;
                metrics.write(&out)?;
                print_means(&metrics.mean);
            }
            Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Eval {
            maps,
            gt,
            out,
            config,
            overrides,
        } => {
            let cfg = PipelineConfig::load(config.as_deref(), &overrides)?;
            let metrics = evaluate_dataset(&maps, &gt, &cfg.evaluation())?;
            let dir = out.unwrap_or(maps);
            metrics.write(&dir)?;
            println!("{} images scored -> {}", metrics.images.len(), dir.display());
            print_means(&metrics.mean);
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixtures { dir } => {
            let suite = synthetic_suite();
            write_suite(&suite, &dir).with_context(|| format!("writing fixtures to {}", dir.display()))?;
            println!("{} fixtures -> {}", suite.len(), dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Config { config, overrides } => {
            print!("{}", PipelineConfig::load(config.as_deref(), &overrides)?.to_text());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
