//! `bench run` executes an experiment config; `bench report` re-emits a
//! saved report as CSV or JSON.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use shiftkit::config::{ExperimentConfig, Protocol};
use shiftkit::protocol;
use shiftkit::report::{emit_report, write_timing, ExperimentReport, ReportFormat};

#[derive(Parser)]
#[command(name = "bench", version, about = "Domain adaptation benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write report.json, CSV tables and timing.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the protocol in the config.
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
        /// Output directory. Falls back to the config, then BENCH_OUT_DIR,
        /// then ./bench-out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds, overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Convert a saved report.json.
    Report {
        /// Directory holding report.json.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Where to write; defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Pairwise,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn run(cli: Cli) -> shiftkit::Result<()> {
    match cli.command {
        Command::Run { config, protocol: proto, out, seeds, jobs } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(p) = proto {
                cfg.protocol = match p {
                    ProtocolArg::Pairwise => Protocol::Pairwise,
                    ProtocolArg::Multi => Protocol::MultiSource,
                };
            }
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .or_else(|| std::env::var_os("BENCH_OUT_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("bench-out"));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| shiftkit::Error::Config(format!("thread pool: {e}")))?;
            let output = pool.install(|| protocol::run(&cfg))?;
            if output.dropped_runs > 0 {
                log::warn!("{} short runs dropped while loading", output.dropped_runs);
            }
            let mut files = emit_report(&output.report, ReportFormat::Json, &out)?;
            files.extend(emit_report(&output.report, ReportFormat::Csv, &out)?);
            let timing = out.join("timing.json");
            write_timing(&timing, &output.timing)?;
            files.push(timing);
            for s in &output.report.summary {
                println!("{:<12} mean {:>7} std {:>7} failed {}", s.method, fmt(s.mean), fmt(s.std), s.n_failed);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Report { input, format, out } => {
            let path = input.join("report.json");
            let text = std::fs::read_to_string(&path)
                .map_err(|source| shiftkit::Error::Io { path: path.clone(), source })?;
            let report = ExperimentReport::from_json(&text)?;
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Json => ReportFormat::Json,
            };
            for f in emit_report(&report, format, out.as_deref().unwrap_or(&input))? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.4}", x))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
