//! `lcf`: linearly-coupled fountain code toolchain.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use lcf_core::Error;
use report::{config_digest, Format, Report};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "lcf",
    version,
    about = "Linearly-coupled fountain codes: encode, decode, simulate, analyze, optimize"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a batch trace from a configuration.
    Encode {
        #[arg(long)]
        config: PathBuf,
        /// Output trace file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Optional raw payload files, one per user (comma separated).
        #[arg(long, value_delimiter = ',')]
        payloads: Vec<PathBuf>,
        #[arg(long, default_value = "json")]
        format: String,
        /// Where to write the structured report (stdout summary either way).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decode a batch trace and write the recovered payloads.
    Decode {
        #[arg(long)]
        trace: PathBuf,
        /// Optional config for cross-checking trace parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// substitution | bp | ge (defaults to config or ge)
        #[arg(long)]
        instance: Option<String>,
        /// In-batch iterations for the bp instance.
        #[arg(long)]
        iterations: Option<usize>,
        /// Output directory for recovered payloads.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Monte Carlo: generate and decode end-to-end, many trials.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Fixed-point analysis, rate-region bounds and feasibility checks.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Degree-distribution design for the configured profile.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: String,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::FieldMismatch { .. } => 2,
        Error::Parse { .. } => 3,
        Error::Infeasible(_) => 4,
        Error::Corruption(_) => 5,
    }
}

fn load_experiment(
    path: &PathBuf,
    seed: Option<u64>,
    trials: Option<usize>,
    workers: Option<usize>,
) -> Result<(config::Experiment, String), Error> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Parse { offset: 0, message: "config is not UTF-8".into() })?;
    let mut exp = config::parse(&text)?;
    let mut overrides = String::new();
    if let Some(s) = seed {
        exp.seed = s;
        overrides.push_str(&format!("seed={s};"));
    }
    if let Some(t) = trials {
        exp.trials = t;
        overrides.push_str(&format!("trials={t};"));
    }
    if let Some(w) = workers {
        exp.workers = w;
        overrides.push_str(&format!("workers={w};"));
    }
    let digest = config_digest(&bytes, &overrides);
    Ok((exp, digest))
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    let started = Instant::now();
    match cli.command {
        Command::Encode {
            config,
            out,
            seed,
            payloads,
            format,
            report: report_path,
        } => {
            let (exp, digest) = load_experiment(&config, seed, None, None)?;
            let format: Format = format.parse()?;
            let mut report = Report::new("encode", digest, exp.seed);
            commands::run_encode(&exp, &payloads, &out, &mut report)?;
            report.write(report_path.as_deref(), format)?;
            report.print_summary(started.elapsed());
        }
        Command::Decode {
            trace,
            config,
            instance,
            iterations,
            out,
            format,
            report: report_path,
        } => {
            let loaded = match &config {
                Some(path) => Some(load_experiment(path, None, None, None)?),
                None => None,
            };
            let format: Format = format.parse()?;
            let inst = match (&instance, &loaded) {
                (Some(name), _) => config::parse_instance(name, iterations)?,
                (None, Some((exp, _))) => exp
                    .decoder
                    .unwrap_or(lcf_core::decoder::DecoderInstance::GaussianElimination),
                (None, None) => lcf_core::decoder::DecoderInstance::GaussianElimination,
            };
            let digest = loaded
                .as_ref()
                .map(|(_, d)| d.clone())
                .unwrap_or_else(|| config_digest(b"", ""));
            let mut report = Report::new("decode", digest, 0);
            commands::run_decode(
                &trace,
                loaded.as_ref().map(|(e, _)| e),
                inst,
                out.as_deref(),
                &mut report,
            )?;
            report.write(report_path.as_deref(), format)?;
            report.print_summary(started.elapsed());
        }
        Command::Simulate {
            config,
            seed,
            trials,
            workers,
            out,
            format,
        } => {
            let (exp, digest) = load_experiment(&config, seed, trials, workers)?;
            let format: Format = format.parse()?;
            let mut report = Report::new("simulate", digest, exp.seed);
            commands::run_simulate(&exp, &mut report)?;
            report.write(out.as_deref(), format)?;
            report.print_summary(started.elapsed());
        }
        Command::Analyze {
            config,
            seed,
            out,
            format,
        } => {
            let (exp, digest) = load_experiment(&config, seed, None, None)?;
            let format: Format = format.parse()?;
            let mut report = Report::new("analyze", digest, exp.seed);
            commands::run_analyze(&exp, &mut report)?;
            report.write(out.as_deref(), format)?;
            report.print_summary(started.elapsed());
        }
        Command::Optimize {
            config,
            seed,
            restarts,
            out,
            format,
        } => {
            let (exp, digest) = load_experiment(&config, seed, None, None)?;
            let format: Format = format.parse()?;
            let mut report = Report::new("optimize", digest, exp.seed);
            let outcome = commands::run_optimize(&exp, restarts, &mut report);
            report.write(out.as_deref(), format)?;
            report.print_summary(started.elapsed());
            outcome?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
