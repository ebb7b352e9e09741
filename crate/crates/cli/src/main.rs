use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod failure;
mod render;

use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "sketchprune", version, about = "Frequent Directions filter pruning for CNN weight archives")]
struct Cli {
    /// Output format for the report written to stdout.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Fd,
    Random,
    Svdtrunc,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an archive and summarise its layers.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
    /// Prune an archive and write the slimmer archive plus its report.
    Sketch(SketchArgs),
    /// Check the sketch against the reference oracle and the error certificate.
    Verify(VerifyArgs),
    /// Per-layer weight statistics.
    Stats {
        #[arg(long)]
        model: PathBuf,
        /// Also write the histogram table (tab-separated) to this file.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// FLOPs and parameter counts of an architecture.
    Flops {
        /// Built-in name (resnet56, resnet110, resnet50, googlenet), a
        /// manifest.json, or an archive directory.
        #[arg(long)]
        arch: String,
        /// Report pruning rates of `--arch` relative to this base.
        #[arg(long)]
        base: Option<String>,
    },
    /// Time the sketch of a randomly initialised archive.
    Bench(BenchArgs),
    /// Write a randomly initialised archive for a built-in architecture.
    Generate {
        #[arg(long)]
        arch: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of filters kept in prunable layers, in (0, 1].
    #[arg(long, value_parser = parse_rate)]
    pub rate: f64,
    /// Per-layer rate, `layer=rate`; repeatable.
    #[arg(long = "override", value_name = "LAYER=RATE", value_parser = parse_override)]
    pub overrides: Vec<(String, f64)>,
    #[arg(long, value_enum, default_value_t = Baseline::Fd)]
    pub baseline: Baseline,
    /// Seed for the random baseline (recorded only for that method).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the report; defaults to `<out>/prune_report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Skip the per-layer quality certificates.
    #[arg(long)]
    pub no_evaluate: bool,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

impl SketchArgs {
    pub fn override_map(&self) -> Result<BTreeMap<String, f64>, Failure> {
        let mut map = BTreeMap::new();
        for (layer, rate) in &self.overrides {
            if map.insert(layer.clone(), *rate).is_some() {
                return Err(Failure::Usage(format!("layer `{layer}` is overridden twice")));
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Golden cases file; defaults to the set committed with the library.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    /// Number of random matrices in the certificate sweep.
    #[arg(long, default_value_t = 100)]
    pub sweep: usize,
    #[arg(long, default_value_t = 0xC0_FFEE)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "resnet50")]
    pub arch: String,
    #[arg(long, value_parser = parse_rate, default_value_t = 0.6)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeat: u32,
    /// Include the quality certificates in the timed work.
    #[arg(long)]
    pub evaluate: bool,
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let rate: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if rate > 0.0 && rate <= 1.0 {
        Ok(rate)
    } else {
        Err(format!("rate {rate} outside (0, 1]"))
    }
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (layer, rate) = s.split_once('=').ok_or_else(|| format!("`{s}` is not LAYER=RATE"))?;
    if layer.is_empty() {
        return Err(format!("`{s}` has an empty layer name"));
    }
    Ok((layer.to_string(), parse_rate(rate)?))
}

fn configure_threads() -> Result<usize, Failure> {
    let threads = match std::env::var("SKETCHPRUNE_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("SKETCHPRUNE_THREADS=`{v}` is not a count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(rayon::current_num_threads())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = configure_threads()?;
    log::debug!("{threads} worker threads");
    let format = cli.format;
    match cli.command {
        Command::Inspect { model } => commands::inspect(&model, format),
        Command::Sketch(args) => commands::sketch(&args, format),
        Command::Verify(args) => commands::verify(&args, format),
        Command::Stats { model, histogram } => commands::stats(&model, histogram.as_deref(), format),
        Command::Flops { arch, base } => commands::flops(&arch, base.as_deref(), format),
        Command::Bench(args) => commands::bench(&args, threads, format),
        Command::Generate { arch, out, seed } => commands::generate(&arch, &out, seed, format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return Failure::Usage(e.render().to_string().trim().to_string()).report(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}
