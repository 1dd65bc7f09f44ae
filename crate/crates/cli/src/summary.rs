//! Tabular summary of an experiment or run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lora_mab::engine::MetricsReport;

use crate::runner::{Manifest, RunStatus, RunSummary, MANIFEST, RUNS_DIR};
use crate::CliError;

#[derive(Debug, Default)]
pub struct Summary {
    pub rows: Vec<(String, RunSummary)>,
    /// Runs listed in the manifest whose report is absent or unreadable.
    pub missing: Vec<String>,
    /// Runs the manifest marks as failed, with their error.
    pub failed: Vec<(String, String)>,
}

fn load_report(path: &Path) -> Option<MetricsReport> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn report_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != MANIFEST))
        .collect();
    files.sort();
    files
}

/// Collects run reports under `dir`: from the manifest when there is one,
/// otherwise every report JSON in `dir` or `dir/runs`.
pub fn collect(dir: &Path) -> Result<Summary, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{} is not a directory", dir.display())));
    }
    let mut out = Summary::default();
    if dir.join(MANIFEST).exists() {
        let manifest = Manifest::load(dir)?;
        for run in &manifest.runs {
            if run.status == RunStatus::Failed {
                out.failed.push((run.id.clone(), run.error.clone().unwrap_or_default()));
                continue;
            }
            let report = run.report.as_ref().and_then(|p| load_report(&dir.join(p)));
            match report {
                Some(r) => out.rows.push((run.id.clone(), RunSummary::of(&r))),
                None => out.missing.push(run.id.clone()),
            }
        }
    } else {
        let mut files = report_files(dir);
        files.extend(report_files(&dir.join(RUNS_DIR)));
        for path in files {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("?").to_string();
            match load_report(&path) {
                Some(r) => out.rows.push((id, RunSummary::of(&r))),
                None => out.missing.push(id),
            }
        }
    }
    if out.rows.is_empty() && out.missing.is_empty() && out.failed.is_empty() {
        return Err(CliError::Config(format!("no run reports found in {}", dir.display())));
    }
    Ok(out)
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.prec$}"))
}

impl Summary {
    pub fn render(&self) -> String {
        let with_regret = self.rows.iter().any(|(_, r)| r.final_regret.is_some());
        let width = self.rows.iter().map(|(id, _)| id.len()).max().unwrap_or(3).max(3);
        let mut s = String::new();
        let _ = write!(
            s,
            "{:<width$} {:>10} {:>10} {:>7} {:>10} {:>9} {:>10}",
            "run", "sent", "received", "pdr", "ee", "final_pdr", "final_ee"
        );
        if with_regret {
            let _ = write!(s, " {:>10}", "regret");
        }
        s.push('\n');
        for (id, r) in &self.rows {
            let _ = write!(
                s,
                "{:<width$} {:>10} {:>10} {:>7} {:>10} {:>9} {:>10}",
                id,
                r.sent,
                r.received,
                cell(r.pdr, 4),
                cell(r.ee, 2),
                cell(r.final_pdr, 4),
                cell(r.final_ee, 2)
            );
            if with_regret {
                let _ = write!(s, " {:>10}", cell(r.final_regret, 4));
            }
            s.push('\n');
        }
        for (id, e) in &self.failed {
            let _ = writeln!(s, "failed: {id}: {e}");
        }
        for id in &self.missing {
            let _ = writeln!(s, "missing: {id}");
        }
        s
    }
}

pub fn summarize(dir: &Path) -> Result<String, CliError> {
    collect(dir).map(|s| s.render())
}
