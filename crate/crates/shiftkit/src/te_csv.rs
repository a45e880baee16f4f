//! Process-run CSV files.
//!
//! Layout: the first line names the run-header columns,
//! `mode,fault_class,run_id,sample_period_h`. Every run then starts with a
//! 4-field line holding those values, followed by one 34-field line per
//! time step (XME(1..22) then XMV(1..12)). A file may hold several runs.
//! Runs shorter than the two analysis windows are dropped and counted.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use shiftkit_core::data::{RawRun, N_VARS};
use shiftkit_core::Matrix;

use crate::error::{io_err, Error, Result};

pub const HEADER: [&str; 4] = ["mode", "fault_class", "run_id", "sample_period_h"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedRuns {
    pub runs: Vec<RawRun>,
    /// Runs too short for both windows.
    pub dropped: usize,
}

struct Pending {
    mode: u8,
    fault_class: u8,
    run_id: u32,
    period: f64,
    values: Vec<f64>,
}

impl Pending {
    fn finish(self, out: &mut LoadedRuns) {
        let steps = self.values.len() / N_VARS;
        let run = RawRun {
            series: Matrix::from_row_slice(steps, N_VARS, &self.values),
            mode: self.mode,
            fault_class: self.fault_class,
            run_id: self.run_id,
            sample_period_h: self.period,
        };
        match run.required_steps() {
            Ok(need) if steps >= need => out.runs.push(run),
            _ => {
                log::info!("run {} dropped: {steps} steps", run.run_id);
                out.dropped += 1;
            }
        }
    }
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, path: &Path, line: u64) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Row {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse {what} from {field:?}"),
    })
}

/// Load every run in one file, in file order.
pub fn load_te_csv(path: &Path) -> Result<LoadedRuns> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut out = LoadedRuns::default();
    let mut pending: Option<Pending> = None;
    let mut seen_header = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Row {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if !seen_header {
            let names: Vec<&str> = rec.iter().map(str::trim).collect();
            if names != HEADER {
                let missing: Vec<&str> = HEADER.iter().copied().filter(|h| !names.contains(h)).collect();
                return Err(Error::File {
                    path: path.to_path_buf(),
                    msg: format!("header must be {}; missing {missing:?}", HEADER.join(",")),
                });
            }
            seen_header = true;
            continue;
        }
        match rec.len() {
            4 => {
                if let Some(p) = pending.take() {
                    p.finish(&mut out);
                }
                let period: f64 = parse(&rec[3], "sample_period_h", path, line)?;
                if !(period > 0.0 && period.is_finite()) {
                    return Err(Error::Row { path: path.to_path_buf(), line, msg: "sample period must be positive".into() });
                }
                pending = Some(Pending {
                    mode: parse(&rec[0], "mode", path, line)?,
                    fault_class: parse(&rec[1], "fault_class", path, line)?,
                    run_id: parse(&rec[2], "run_id", path, line)?,
                    period,
                    values: Vec::new(),
                });
            }
            N_VARS => {
                let p = pending.as_mut().ok_or_else(|| Error::Row {
                    path: path.to_path_buf(),
                    line,
                    msg: "measurement row before any run header".into(),
                })?;
                for f in rec.iter() {
                    let v: f64 = parse(f, "reading", path, line)?;
                    if !v.is_finite() {
                        return Err(Error::Row { path: path.to_path_buf(), line, msg: "non-finite reading".into() });
                    }
                    p.values.push(v);
                }
            }
            n => {
                return Err(Error::Row {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("expected 4 or {N_VARS} fields, found {n}"),
                })
            }
        }
    }
    if let Some(p) = pending.take() {
        p.finish(&mut out);
    }
    Ok(out)
}

/// Load every `*.csv` in `dir`, ordered by (mode, fault class, run id).
pub fn load_te_dir(dir: &Path) -> Result<LoadedRuns> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut all = LoadedRuns::default();
    for f in &files {
        let part = load_te_csv(f)?;
        all.runs.extend(part.runs);
        all.dropped += part.dropped;
    }
    all.runs.sort_by_key(|r| (r.mode, r.fault_class, r.run_id));
    Ok(all)
}

/// Write runs in the layout read by [`load_te_csv`]. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_te_csv(path: &Path, runs: &[RawRun]) -> Result<()> {
    if let Some(r) = runs.iter().find(|r| r.series.ncols() != N_VARS) {
        return Err(Error::Config(format!("run {} has {} variables, not {N_VARS}", r.run_id, r.series.ncols())));
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "{}", HEADER.join(","))?;
        for r in runs {
            writeln!(w, "{},{},{},{}", r.mode, r.fault_class, r.run_id, r.sample_period_h)?;
            for row in r.series.row_iter() {
                let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", fields.join(","))?;
            }
        }
        w.flush()
    };
    body().map_err(io_err(path))
}
