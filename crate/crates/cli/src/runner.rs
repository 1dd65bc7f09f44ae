//! Multi-run experiment execution and artifact layout.
//!
//! ```text
//! <out>/manifest.json          spec, config hash, version, run statuses
//! <out>/aggregate.csv          mean and std over seeds per (agent, sweep point)
//! <out>/runs/<id>.csv          windowed time series of one run
//! <out>/runs/<id>.json         full metrics report of one run
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use lora_mab::engine::{self, AgentSpec, MetricsReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spec::ExperimentSpec;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const AGGREGATE: &str = "aggregate.csv";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub id: String,
    pub agent: String,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Paths relative to the experiment directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub spec: ExperimentSpec,
    pub runs: Vec<RunEntry>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.status == RunStatus::Failed).count()
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// SHA-256 of the canonical JSON form of the spec.
pub fn config_hash(spec: &ExperimentSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("spec serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn run_id(agent: &AgentSpec, seed: u64, sweep: Option<(&str, f64)>) -> String {
    match sweep {
        Some((axis, v)) => format!("{}_seed{seed}_{axis}{v}", agent.kind.label()),
        None => format!("{}_seed{seed}", agent.kind.label()),
    }
}

struct Job<'a> {
    agent: &'a AgentSpec,
    seed: u64,
    point: Option<usize>,
}

fn execute(spec: &ExperimentSpec, job: &Job<'_>, out: &Path) -> (RunEntry, Option<MetricsReport>) {
    let sweep = spec.sweep.as_ref().zip(job.point).map(|(s, i)| (s.axis(), s.value(i)));
    let id = run_id(job.agent, job.seed, sweep);
    let mut entry = RunEntry {
        id: id.clone(),
        agent: job.agent.kind.label().to_string(),
        seed: job.seed,
        sweep_value: sweep.map(|(_, v)| v),
        status: RunStatus::Failed,
        error: None,
        csv: None,
        report: None,
    };
    let scenario = spec.scenario_at(job.point, job.seed);
    let result = engine::run(&scenario, job.agent).map_err(|e| e.to_string()).and_then(|report| {
        let csv = format!("{RUNS_DIR}/{id}.csv");
        let json = format!("{RUNS_DIR}/{id}.json");
        write_atomic(&out.join(&csv), report.to_csv().as_bytes()).map_err(|e| e.to_string())?;
        let body = serde_json::to_vec_pretty(&report).map_err(|e| e.to_string())?;
        write_atomic(&out.join(&json), &body).map_err(|e| e.to_string())?;
        Ok((csv, json, report))
    });
    match result {
        Ok((csv, json, report)) => {
            entry.status = RunStatus::Ok;
            entry.csv = Some(csv);
            entry.report = Some(json);
            (entry, Some(report))
        }
        Err(e) => {
            entry.error = Some(e);
            (entry, None)
        }
    }
}

/// Per-run numbers that enter the aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub sent: u64,
    pub received: u64,
    pub pdr: Option<f64>,
    pub ee: Option<f64>,
    pub final_pdr: Option<f64>,
    pub final_ee: Option<f64>,
    pub final_regret: Option<f64>,
}

impl RunSummary {
    pub fn of(report: &MetricsReport) -> Self {
        let last = report.final_window();
        Self {
            sent: report.total_sent,
            received: report.gateway_received,
            pdr: report.pdr,
            ee: report.ee,
            final_pdr: last.and_then(|w| w.pdr),
            final_ee: last.and_then(|w| w.ee),
            final_regret: last.and_then(|w| w.regret),
        }
    }
}

/// Mean and sample standard deviation of the present values.
pub fn mean_std(values: impl IntoIterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    let xs: Vec<f64> = values.into_iter().flatten().collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some((mean, var.sqrt()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

/// Aggregate CSV over seeds; rows follow the agent order of the spec, then sweep order.
pub fn aggregate_csv(spec: &ExperimentSpec, runs: &[(RunEntry, RunSummary)]) -> String {
    let mut out = String::from("# lora-mab aggregate v1\n");
    out.push_str(
        "agent,axis,value,seeds,sent_mean,received_mean,pdr_mean,pdr_std,ee_mean,ee_std,final_pdr_mean,final_pdr_std,final_ee_mean,final_ee_std,final_regret_mean\n",
    );
    let axis = spec.sweep.as_ref().map_or("", |s| s.axis());
    for agent in &spec.agents {
        for point in spec.points() {
            let value = spec.sweep.as_ref().zip(point).map(|(s, i)| s.value(i));
            let rows: Vec<&RunSummary> = runs
                .iter()
                .filter(|(e, _)| e.agent == agent.kind.label() && e.sweep_value == value)
                .map(|(_, s)| s)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let ms = |f: fn(&RunSummary) -> Option<f64>| mean_std(rows.iter().map(|r| f(r)));
            let pair = |v: Option<(f64, f64)>| match v {
                Some((m, s)) => format!("{m},{s}"),
                None => ",".to_string(),
            };
            let sent = rows.iter().map(|r| r.sent as f64).sum::<f64>() / rows.len() as f64;
            let received = rows.iter().map(|r| r.received as f64).sum::<f64>() / rows.len() as f64;
            out.push_str(&format!(
                "{},{axis},{},{},{sent},{received},{},{},{},{},{}\n",
                agent.kind.label(),
                fmt_opt(value),
                rows.len(),
                pair(ms(|r| r.pdr)),
                pair(ms(|r| r.ee)),
                pair(ms(|r| r.final_pdr)),
                pair(ms(|r| r.final_ee)),
                fmt_opt(ms(|r| r.final_regret).map(|(m, _)| m)),
            ));
        }
    }
    out
}

/// Runs every (agent, seed, sweep point) combination and writes the artifacts.
/// Failed runs are recorded in the manifest; completed ones are kept.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, jobs: usize) -> Result<Manifest, CliError> {
    spec.validate()?;
    let runs_dir: PathBuf = out.join(RUNS_DIR);
    fs::create_dir_all(&runs_dir).map_err(|e| CliError::Io(format!("{}: {e}", runs_dir.display())))?;

    let mut work = Vec::new();
    for agent in &spec.agents {
        for point in spec.points() {
            for &seed in &spec.seeds {
                work.push(Job { agent, seed, point });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<(RunEntry, Option<MetricsReport>)> =
        pool.install(|| work.par_iter().map(|job| execute(spec, job, out)).collect());

    let summaries: Vec<(RunEntry, RunSummary)> = results
        .iter()
        .filter_map(|(e, r)| r.as_ref().map(|r| (e.clone(), RunSummary::of(r))))
        .collect();
    write_atomic(&out.join(AGGREGATE), aggregate_csv(spec, &summaries).as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(spec),
        seeds: spec.seeds.clone(),
        spec: spec.clone(),
        runs: results.into_iter().map(|(e, _)| e).collect(),
    };
    let body = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join(MANIFEST), &body).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(manifest)
}
