//! Experiment reports: records, aggregates, and their CSV/JSON forms.
//!
//! Everything written by [`emit_report`] is a pure function of the report,
//! so reruns with the same configuration produce identical bytes. Wall
//! times live in a separate sidecar for that reason.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Protocol;
use crate::error::{io_err, Result};

pub const REPORT_VERSION: u32 = 1;
pub const SOURCE_ONLY: &str = "source_only";
pub const TARGET_ONLY: &str = "target_only";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: String,
    /// Domain indices the labeled training data came from.
    pub sources: Vec<usize>,
    pub target: usize,
    pub seed: u64,
    pub status: Status,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub sources: Vec<usize>,
    pub target: usize,
    /// Mean and sample standard deviation over successful seeds.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Mean over cells of the per-cell mean accuracy.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub cells: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub protocol: Protocol,
    /// How the target is evaluated.
    pub evaluation: String,
    pub train_fraction: f64,
    pub seeds: Vec<u64>,
    pub domains: Vec<String>,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    pub summary: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub method: String,
    pub sources: Vec<usize>,
    pub target: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

/// (method, sources, target)
type CellKey = (String, Vec<usize>, usize);

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 { (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (Some(m), Some(s))
}

impl ExperimentReport {
    /// Builds aggregates in first-appearance order of (method, sources,
    /// target) and per-method summaries in first-appearance order of methods.
    pub fn new(
        protocol: Protocol,
        train_fraction: f64,
        seeds: Vec<u64>,
        domains: Vec<String>,
        records: Vec<Record>,
    ) -> Self {
        let mut keys: Vec<CellKey> = Vec::new();
        let mut acc: BTreeMap<CellKey, (Vec<f64>, usize)> = BTreeMap::new();
        for r in &records {
            let key = (r.method.clone(), r.sources.clone(), r.target);
            let slot = acc.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                (Vec::new(), 0)
            });
            match (r.status, r.accuracy) {
                (Status::Ok, Some(a)) => slot.0.push(a),
                _ => slot.1 += 1,
            }
        }
        let aggregates: Vec<Aggregate> = keys
            .into_iter()
            .map(|k| {
                let (v, failed) = &acc[&k];
                let (mean, std) = mean_std(v);
                Aggregate { method: k.0, sources: k.1, target: k.2, mean, std, n_ok: v.len(), n_failed: *failed }
            })
            .collect();
        let mut methods: Vec<String> = Vec::new();
        for a in &aggregates {
            if !methods.contains(&a.method) {
                methods.push(a.method.clone());
            }
        }
        let summary = methods
            .into_iter()
            .map(|m| {
                let cells: Vec<&Aggregate> = aggregates.iter().filter(|a| a.method == m).collect();
                let means: Vec<f64> = cells.iter().filter_map(|a| a.mean).collect();
                let (mean, std) = mean_std(&means);
                MethodSummary {
                    method: m,
                    mean,
                    std,
                    cells: cells.len(),
                    n_failed: cells.iter().map(|a| a.n_failed).sum(),
                }
            })
            .collect();
        ExperimentReport {
            version: REPORT_VERSION,
            protocol,
            evaluation: "held-out target test split; adaptation sees only the target train split, unlabeled".into(),
            train_fraction,
            seeds,
            domains,
            records,
            aggregates,
            summary,
        }
    }

    pub fn summary_for(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn source_label(report: &ExperimentReport, sources: &[usize]) -> String {
    match report.protocol {
        Protocol::Pairwise => sources.iter().map(|&s| report.domains[s].clone()).collect::<Vec<_>>().join("+"),
        Protocol::MultiSource => "others".into(),
    }
}

fn cell(v: Option<f64>, failed: bool) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None if failed => "failed".into(),
        None => String::new(),
    }
}

/// Mean accuracy matrix: one row per (method, sources), one column per
/// target domain.
pub fn accuracy_csv(report: &ExperimentReport) -> String {
    grid_csv(report, |a| a.mean, |_| true)
}

/// Per-cell mean accuracy minus the source-only mean of the same cell
/// (pairwise protocol; baselines are omitted).
pub fn delta_csv(report: &ExperimentReport) -> String {
    let base: BTreeMap<(Vec<usize>, usize), f64> = report
        .aggregates
        .iter()
        .filter(|a| a.method == SOURCE_ONLY)
        .filter_map(|a| a.mean.map(|m| ((a.sources.clone(), a.target), m)))
        .collect();
    grid_csv(
        report,
        |a| Some(a.mean? - base.get(&(a.sources.clone(), a.target))?),
        |a| a.method != SOURCE_ONLY && a.method != TARGET_ONLY,
    )
}

fn grid_csv(
    report: &ExperimentReport,
    value: impl Fn(&Aggregate) -> Option<f64>,
    keep: impl Fn(&Aggregate) -> bool,
) -> String {
    let mut out = String::from("method,source");
    for d in &report.domains {
        let _ = write!(out, ",{d}");
    }
    out.push('\n');
    let mut rows: Vec<(String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String, usize), String> = BTreeMap::new();
    for a in report.aggregates.iter().filter(|a| keep(a)) {
        let row = (a.method.clone(), source_label(report, &a.sources));
        if !rows.contains(&row) {
            rows.push(row.clone());
        }
        cells.insert((row.0, row.1, a.target), cell(value(a), a.n_ok == 0 && a.n_failed > 0));
    }
    for (m, s) in rows {
        out.push_str(&m);
        out.push(',');
        out.push_str(&s);
        for t in 0..report.domains.len() {
            out.push(',');
            if let Some(c) = cells.get(&(m.clone(), s.clone(), t)) {
                out.push_str(c);
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Write the report into `dir` and return the files written.
/// CSV: `accuracy.csv`, plus `delta.csv` for the pairwise protocol.
/// JSON: `report.json`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    match format {
        ReportFormat::Json => files.push((dir.join("report.json"), report.to_json()?)),
        ReportFormat::Csv => {
            files.push((dir.join("accuracy.csv"), accuracy_csv(report)));
            if report.protocol == Protocol::Pairwise {
                files.push((dir.join("delta.csv"), delta_csv(report)));
            }
        }
    }
    for (p, text) in &files {
        std::fs::write(p, text).map_err(io_err(p))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn write_timing(path: &Path, entries: &[TimingEntry]) -> Result<()> {
    let text = serde_json::to_string_pretty(entries)? + "\n";
    std::fs::write(path, text).map_err(io_err(path))
}
