//! `qmachine <experiment> --config <path> [--out <path>] [--preset <name>]`
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error, 3 a
//! numerical guard aborted the run.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod output;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::{Experiment, ExperimentConfig, Source};
use experiments::Failure;
use output::{ensure_parent, manifest_path, write_atomic, RunManifest};
use presets::Preset;

#[derive(Parser, Debug)]
#[command(
    name = "qmachine",
    version,
    about = "Thermodynamics of quantum machines powered by non-thermal baths"
)]
struct Cli {
    experiment: Experiment,
    /// Key-value config file; overrides the preset key by key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Store the wall time in the manifest (makes it non-reproducible).
    #[arg(long)]
    record_timing: bool,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut sources = vec![];
    if let Some(p) = cli.preset {
        if p.experiment() != cli.experiment {
            return Err(Failure::Config(format!(
                "preset {} belongs to `{}`, not `{}`",
                p.name(),
                p.experiment().name(),
                cli.experiment.name()
            )));
        }
        sources.push(Source::parse(&format!("preset {}", p.name()), p.text())?);
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        sources.push(Source::parse(&path.display().to_string(), &text)?);
    }
    if sources.is_empty() {
        return Err(Failure::Config("give --config, --preset or both".into()));
    }
    Ok(ExperimentConfig::resolve(cli.experiment, &sources)?)
}

fn execute(cli: &Cli) -> Result<PathBuf, Failure> {
    let cfg = resolve(cli)?;
    let csv_path = cli
        .out
        .clone()
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.experiment.name())));
    let start = Instant::now();
    let (table, runs) = experiments::run(&cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    let manifest = RunManifest {
        tool: "qmachine",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        preset: cli.preset.map(Preset::name),
        csv: csv_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        seed: cfg.seed,
        config: cfg.echo(),
        sweep: cfg.sweep.clone(),
        rows: table.rows.len(),
        runs,
        wall_time_s: cli.record_timing.then_some(elapsed),
    };
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", csv_path.display()));
    ensure_parent(&csv_path).map_err(io)?;
    write_atomic(&csv_path, &table.to_csv()).map_err(io)?;
    write_atomic(&manifest_path(&csv_path), &manifest.to_json()).map_err(io)?;
    Ok(csv_path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(path) => {
            eprintln!("wrote {} and {}", path.display(), manifest_path(&path).display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("qmachine: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
