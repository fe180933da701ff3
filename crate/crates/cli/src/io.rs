//! CSV artifacts and content digests.

use std::fs;
use std::path::Path;

use maser_bloch_core::analysis::{SigmaZSnapshots, TimeSeries};
use maser_bloch_core::ensemble::{hz, to_hz};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError, CliResult};

pub const TIMESERIES_COLUMNS: [&str; 6] = ["t_s", "re_a", "im_a", "abs_a", "p", "pbarC"];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn optional(trace: Option<&Vec<f64>>, i: usize) -> String {
    trace.map(|v| fmt_f64(v[i])).unwrap_or_default()
}

pub fn write_timeseries(path: &Path, series: &TimeSeries) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error("cannot write", path, e))?;
    let fail = |e: csv::Error| io_error("cannot write", path, e);
    w.write_record(TIMESERIES_COLUMNS).map_err(fail)?;
    for i in 0..series.len() {
        let a = series.a[i];
        w.write_record([
            fmt_f64(series.t[i]),
            fmt_f64(a.re),
            fmt_f64(a.im),
            fmt_f64(a.norm()),
            optional(series.p.as_ref(), i),
            optional(series.pbar_c.as_ref(), i),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| io_error("cannot write", path, e))
}

/// Header row: `t_s` then packet detunings in Hz; one row per snapshot.
pub fn write_sigma_z(path: &Path, snaps: &SigmaZSnapshots) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error("cannot write", path, e))?;
    let fail = |e: csv::Error| io_error("cannot write", path, e);
    let header = std::iter::once("t_s".to_string())
        .chain(snaps.detunings.iter().map(|&d| fmt_f64(to_hz(d))));
    w.write_record(header).map_err(fail)?;
    for (t, row) in snaps.times.iter().zip(&snaps.values) {
        let rec = std::iter::once(fmt_f64(*t)).chain(row.iter().map(|&z| fmt_f64(z)));
        w.write_record(rec).map_err(fail)?;
    }
    w.flush().map_err(|e| io_error("cannot write", path, e))
}

fn parse_cell(raw: &str, column: &str, row: usize) -> CliResult<f64> {
    raw.trim().parse().map_err(|_| {
        CliError::config(format!(
            "column '{column}', data row {row}: cannot parse '{raw}' as a number"
        ))
    })
}

pub fn read_timeseries(path: &Path) -> CliResult<TimeSeries> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error("cannot read", path, e))?;
    let headers = r
        .headers()
        .map_err(|e| io_error("cannot read", path, e))?
        .clone();
    for h in headers.iter() {
        if !TIMESERIES_COLUMNS.contains(&h) {
            return Err(CliError::config(format!(
                "{}: unexpected column '{h}' (expected {})",
                path.display(),
                TIMESERIES_COLUMNS.join(", ")
            )));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        col(name)
            .ok_or_else(|| CliError::config(format!("{}: missing column '{name}'", path.display())))
    };
    let (it, ire, iim) = (require("t_s")?, require("re_a")?, require("im_a")?);
    let (ip, ipc) = (col("p"), col("pbarC"));

    let mut t = Vec::new();
    let mut a = Vec::new();
    let mut p: Option<Vec<f64>> = ip.map(|_| Vec::new());
    let mut pc: Option<Vec<f64>> = ipc.map(|_| Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_error("cannot read", path, e))?;
        let cell = |i: usize, name: &str| parse_cell(rec.get(i).unwrap_or(""), name, row + 1);
        t.push(cell(it, "t_s")?);
        a.push(Complex64::new(cell(ire, "re_a")?, cell(iim, "im_a")?));
        for (idx, name, trace) in [(ip, "p", &mut p), (ipc, "pbarC", &mut pc)] {
            if let Some(i) = idx {
                let raw = rec.get(i).unwrap_or("");
                if raw.is_empty() {
                    *trace = None;
                } else if let Some(v) = trace.as_mut() {
                    v.push(parse_cell(raw, name, row + 1)?);
                }
            }
        }
    }
    let mut series =
        TimeSeries::new(t, a).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    series.p = p;
    series.pbar_c = pc;
    series
        .metadata
        .insert("source".into(), path.display().to_string());
    Ok(series)
}

pub fn read_sigma_z(path: &Path) -> CliResult<SigmaZSnapshots> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error("cannot read", path, e))?;
    let headers = r
        .headers()
        .map_err(|e| io_error("cannot read", path, e))?
        .clone();
    if headers.get(0) != Some("t_s") {
        return Err(CliError::config(format!(
            "{}: first column must be 't_s'",
            path.display()
        )));
    }
    let detunings = headers
        .iter()
        .skip(1)
        .map(|h| parse_cell(h, "header", 0).map(hz))
        .collect::<CliResult<Vec<_>>>()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_error("cannot read", path, e))?;
        times.push(parse_cell(&rec[0], "t_s", row + 1)?);
        values.push(
            rec.iter()
                .skip(1)
                .map(|c| parse_cell(c, "sigma_z", row + 1))
                .collect::<CliResult<Vec<_>>>()?,
        );
    }
    Ok(SigmaZSnapshots {
        detunings,
        times,
        values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest(dir: &Path, name: &str) -> CliResult<FileEntry> {
    let path = dir.join(name);
    let data = fs::read(&path).map_err(|e| io_error("cannot read", &path, e))?;
    Ok(FileEntry {
        name: name.to_string(),
        bytes: data.len() as u64,
        sha256: hex::encode(Sha256::digest(&data)),
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::config(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error("cannot write", path, e))
}
