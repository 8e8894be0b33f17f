//! Energy time series as CSV.

use std::path::Path;

use thiserror::Error;

use crate::diagnostics::{EnergyReport, TimeSeries};

pub const TIMESERIES_FORMAT_VERSION: u32 = 1;

pub const HEADER: [&str; 8] = [
    "t",
    "kinetic",
    "voigt",
    "modified",
    "dissipation_cum",
    "blowup_monitor",
    "enstrophy",
    "max_div",
];

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("time series IO on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

fn fields(r: &EnergyReport) -> [f64; 8] {
    [
        r.t,
        r.kinetic,
        r.voigt,
        r.modified,
        r.dissipation_cum,
        r.blowup_monitor,
        r.enstrophy,
        r.max_div,
    ]
}

/// Writes the fixed header and one row per report. Values carry 17
/// significant digits so they read back exactly.
pub fn write_timeseries(series: &TimeSeries, path: &Path) -> Result<(), TimeseriesError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in series.iter() {
        w.write_record(fields(r).iter().map(|x| format!("{x:.16e}")))?;
    }
    w.flush().map_err(|source| TimeseriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Reads a series written by [`write_timeseries`]; any other column order is rejected.
pub fn read_timeseries(path: &Path) -> Result<TimeSeries, TimeseriesError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let found: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if found != HEADER {
        return Err(TimeseriesError::Header {
            expected: HEADER.join(","),
            found: found.join(","),
        });
    }
    let mut out = TimeSeries::default();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let mut v = [0.0; 8];
        for (slot, cell) in v.iter_mut().zip(rec.iter()) {
            *slot = cell.trim().parse().map_err(|e| TimeseriesError::Row {
                row,
                message: format!("cannot parse {cell:?}: {e}"),
            })?;
        }
        out.push(EnergyReport {
            t: v[0],
            kinetic: v[1],
            voigt: v[2],
            modified: v[3],
            dissipation_cum: v[4],
            blowup_monitor: v[5],
            enstrophy: v[6],
            max_div: v[7],
        });
    }
    Ok(out)
}
