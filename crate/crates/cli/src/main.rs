mod artifacts;
mod commands;
mod options;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mrp_core::io::EventFormat;

use commands::{EvaluateArgs, Grouping, InferArgs};
use options::{parse_format, parse_pair, ChainArgs, OutArgs};

/// Intensity inference for streams of timestamped events under a Gaussian-process
/// modulated gamma renewal model.
#[derive(Parser)]
#[command(name = "mrp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate benchmark scenarios; writes events.csv, truth curves and truth.json.
    Generate {
        /// Scenario registry (TOML); defaults to the built-in benchmark set.
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Only these scenarios (repeatable).
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Nodes of the written truth curves.
        #[arg(long, default_value_t = 200)]
        k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Infer posterior intensities for every stream in an event file.
    Infer {
        /// Event file of `label,timestamp` rows or line-JSON records.
        events: PathBuf,
        /// csv, tsv or jsonl (default: from the file extension).
        #[arg(long, value_parser = parse_format)]
        format: Option<EventFormat>,
        /// `label` (one stream per label), `icd9` (top-level ICD-9 chapters) or a rules TOML file.
        #[arg(long, default_value = "label")]
        group: String,
        /// Shared observation window `LO,HI` (default: each stream's events padded by one resolution unit).
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        /// Timestamp resolution; tied events are spread within one unit.
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        /// Also render an SVG per stream.
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulate, infer and score benchmark scenarios; writes benchmark.csv.
    Evaluate {
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        /// Simulation seeds, comma-separated; each scenario runs once per seed.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Render SVG plots for a finished `infer` or `evaluate` run.
    Plot {
        /// Directory holding manifest.json.
        run_dir: PathBuf,
        /// `generate` output to take truth curves and true shapes from.
        #[arg(long = "truth-dir")]
        truth_dir: Option<PathBuf>,
        /// Where to write the SVGs (default: the run directory).
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Generate {
            registry,
            scenarios,
            seed,
            k,
            out,
        } => commands::generate(registry.as_deref(), &scenarios, seed, k, &out).map(|()| true),
        Command::Infer {
            events,
            format,
            group,
            window,
            resolution,
            plot,
            chain,
            out,
        } => {
            let args = InferArgs {
                events,
                format,
                grouping: group.parse::<Grouping>()?,
                window,
                resolution,
                plot,
            };
            commands::infer(&args, &chain, &out)
        }
        Command::Evaluate {
            registry,
            scenarios,
            seeds,
            plot,
            chain,
            out,
        } => commands::evaluate(
            &EvaluateArgs {
                registry,
                scenarios,
                seeds,
                plot,
            },
            &chain,
            &out,
        ),
        Command::Plot {
            run_dir,
            truth_dir,
            out_dir,
        } => commands::plot(&run_dir, truth_dir.as_deref(), out_dir.as_deref()).map(|()| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
