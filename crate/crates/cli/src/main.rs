use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lora_mab::engine::{self, RunConfig};
use lora_mab::phy::EnergyConvention;
use lora_mab_cli::runner::{self, write_atomic, Manifest};
use lora_mab_cli::spec::{self, ExperimentSpec, PRESETS};
use lora_mab_cli::summary::summarize;
use lora_mab_cli::CliError;

#[derive(Parser)]
#[command(name = "lora-mab", version, about = "LoRa uplink simulator with bandit-based resource allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Energy {
    PhysicalMilliwatt,
    PaperLiteral,
}

impl From<Energy> for EnergyConvention {
    fn from(e: Energy) -> Self {
        match e {
            Energy::PhysicalMilliwatt => EnergyConvention::PhysicalMilliwatt,
            Energy::PaperLiteral => EnergyConvention::PaperLiteral,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with one agent.
    Run {
        /// JSON file with `scenario` and `agent`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid of agents, seeds and sweep points.
    Experiment {
        /// Built-in experiment name (see `presets`).
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        /// Experiment JSON, or a manifest.json from an earlier experiment.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seeds as a list `1,2,3` or an inclusive range `1..5`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<Seeds>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long, value_enum)]
        energy_convention: Option<Energy>,
        /// Override the simulated horizon in hours.
        #[arg(long)]
        duration_h: Option<f64>,
    },
    /// Print a table of the runs in an output directory.
    Summarize { dir: PathBuf },
    /// List the built-in experiments.
    Presets,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad seed range end: {e}"))?;
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(Seeds((a..=b).collect()));
    }
    s.split(',').map(|x| x.trim().parse::<u64>().map_err(|e| format!("bad seed {x:?}: {e}"))).collect::<Result<_, _>>().map(Seeds)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Accepts either an experiment spec or the manifest of an earlier run.
fn load_experiment(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = read_text(path)?;
    let bad = |e: serde_json::Error| CliError::Config(format!("{}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    if value.get("config_sha256").is_some() {
        let m: Manifest = serde_json::from_value(value).map_err(bad)?;
        return Ok(m.spec);
    }
    serde_json::from_value(value).map_err(bad)
}

fn cmd_run(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::from_json(&read_text(config)?).map_err(|e| CliError::Config(e.to_string()))?;
    let report = engine::run_config(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    write_atomic(&out.join("report.csv"), report.to_csv().as_bytes()).map_err(io)?;
    let body = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("report.json"), &body).map_err(io)?;
    print!("{}", summarize(out)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    preset: Option<String>,
    config: Option<PathBuf>,
    seeds: Option<Seeds>,
    out: &Path,
    jobs: usize,
    energy: Option<Energy>,
    duration_h: Option<f64>,
) -> Result<(), CliError> {
    let mut spec = match (preset, config) {
        (Some(name), _) => spec::preset(&name)?,
        (None, Some(path)) => load_experiment(&path)?,
        (None, None) => return Err(CliError::Config("either --preset or --config is required".into())),
    };
    if let Some(s) = seeds {
        spec.override_seeds(s.0);
    }
    if let Some(e) = energy {
        spec.override_energy(e.into());
    }
    if let Some(h) = duration_h {
        spec.override_duration(h);
    }
    let manifest = runner::run_experiment(&spec, out, jobs)?;
    print!("{}", summarize(out)?);
    match manifest.failed() {
        0 => Ok(()),
        failed => Err(CliError::Partial { failed, total: manifest.runs.len() }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Experiment { preset, config, seeds, out, jobs, energy_convention, duration_h } => {
            cmd_experiment(preset, config, seeds, &out, jobs, energy_convention, duration_h)
        }
        Command::Summarize { dir } => summarize(&dir).map(|t| print!("{t}")),
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:<14} {about}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
