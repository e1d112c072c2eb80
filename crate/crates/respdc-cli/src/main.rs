//! Command-line front end: loads a TOML run configuration, dispatches one
//! subcommand, writes deterministic CSV/JSON artifacts, and prints a one-line
//! summary. Exit codes: 0 success, 1 physics-domain error, 2 usage error.

mod commands;
mod config;
mod emit;
mod error;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use emit::OutputFormat;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "respdc",
    version,
    about = "Design toolkit for doubly resonant photon-pair sources",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for artifacts (default: respdc-out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Artifact format: csv, json, or both (default: both).
    #[arg(long, global = true, value_name = "FORMAT")]
    format: Option<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Print the fully resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    emit_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Signal-side emission spectrum with cluster detection.
    Spectrum,
    /// Cluster table: centers, integrated weights, measured spacing.
    Clusters,
    /// Joint spectral amplitude grid around the operating point.
    Jsa,
    /// Purity report: mode excitation, Schmidt number, total purity.
    Purity,
    /// Signal resonance linewidth over a length x reflectivity grid.
    BandwidthMap,
    /// Mode-excitation probability over a length x reflectivity grid.
    PurityMap,
    /// Spectral purity versus pump bandwidth, with geometry cases.
    PurityVsPump,
    /// Resonant enhancement and escape-probability report.
    Brightness,
    /// Mode-hop-free windows in pump frequency and temperature.
    Stability,
    /// Signal-offset tuning schedule: temperature and pump per offset.
    FineTune,
    /// Propose a source configuration for a quantum-memory target.
    Design,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Some(summary)) => println!("{summary}"),
        Ok(None) => {}
        Err(err) => {
            eprintln!("respdc: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn run(cli: Cli) -> CliResult<Option<String>> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::usage("--config PATH is required"))?;
    let file = config::load(&config_path)?;

    let threads = cli.threads.or(file.run.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        // Ignore failure: the global pool can only be sized once, which is
        // fine for a one-subcommand process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let base = config_path.parent().unwrap_or(Path::new("."));
    let resolved = config::resolve(file, base)?;

    if cli.emit_config {
        print!("{}", config::emit(&resolved)?);
        return Ok(None);
    }

    let out = cli
        .out
        .or_else(|| resolved.file.run.output_directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("respdc-out"));
    let format = match cli.format.as_deref().or(resolved.file.run.output_format.as_deref()) {
        Some(name) => OutputFormat::parse(name)?,
        None => OutputFormat::Both,
    };

    let summary = match cli.command {
        Command::Spectrum => commands::spectrum(&resolved, &out, format)?,
        Command::Clusters => commands::clusters(&resolved, &out, format)?,
        Command::Jsa => commands::jsa(&resolved, &out, format)?,
        Command::Purity => commands::purity(&resolved, &out, format)?,
        Command::BandwidthMap => commands::bandwidth_map_cmd(&resolved, &out, format)?,
        Command::PurityMap => commands::purity_map_cmd(&resolved, &out, format)?,
        Command::PurityVsPump => commands::purity_vs_pump(&resolved, &out, format)?,
        Command::Brightness => commands::brightness(&resolved, &out, format)?,
        Command::Stability => commands::stability(&resolved, &out, format)?,
        Command::FineTune => commands::fine_tune(&resolved, &out, format)?,
        Command::Design => commands::design(&resolved, &out, format)?,
    };
    Ok(Some(summary))
}
