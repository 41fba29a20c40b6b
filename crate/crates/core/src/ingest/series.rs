//! CSV loaders for accelerometer and EEG streams.

use std::path::Path;

use super::{AccelSeries, EegRecording};
use crate::util::median;
use crate::{Error, Result};

/// Which schema a sensor CSV follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// `t,ax,ay,az` in seconds and m/s².
    Accel,
    /// `t,f3,f4` in seconds and µV.
    Eeg,
}

impl SeriesKind {
    fn columns(self) -> &'static [&'static str] {
        match self {
            SeriesKind::Accel => &["t", "ax", "ay", "az"],
            SeriesKind::Eeg => &["t", "f3", "f4"],
        }
    }
}

#[derive(Debug, Clone)]
pub enum SensorSeries {
    Accel(AccelSeries),
    Eeg(EegRecording),
}

/// Read the named columns of a headered numeric CSV; returns one vector per
/// requested column.
fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let csv_err = |reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => csv_err(format!("{other:?}")),
        })?;
    let headers = rdr.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let mut idx = Vec::with_capacity(columns.len());
    for &col in columns {
        match headers.iter().position(|h| h.eq_ignore_ascii_case(col)) {
            Some(i) => idx.push(i),
            None => return Err(csv_err(format!("missing column {col:?}"))),
        }
    }
    let mut out = vec![Vec::new(); columns.len()];
    for (row_no, record) in rdr.records().enumerate() {
        // header is line 1
        let line = row_no + 2;
        let record = record.map_err(|e| csv_err(format!("line {line}: {e}")))?;
        for (k, &i) in idx.iter().enumerate() {
            let cell = record.get(i).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| {
                csv_err(format!(
                    "line {line}: non-numeric value {cell:?} in column {:?}",
                    columns[k]
                ))
            })?;
            if !v.is_finite() {
                return Err(csv_err(format!("line {line}: non-finite value")));
            }
            out[k].push(v);
        }
    }
    if out[0].len() < 2 {
        return Err(csv_err(format!(
            "need at least 2 data rows, found {}",
            out[0].len()
        )));
    }
    Ok(out)
}

pub fn load_accel_csv(path: &Path) -> Result<AccelSeries> {
    let mut cols = read_columns(path, SeriesKind::Accel.columns())?;
    let az = cols.pop().unwrap();
    let ay = cols.pop().unwrap();
    let ax = cols.pop().unwrap();
    let t = cols.pop().unwrap();
    let samples = ax
        .into_iter()
        .zip(ay)
        .zip(az)
        .map(|((x, y), z)| [x, y, z])
        .collect();
    AccelSeries::new(t, samples)
}

pub fn load_eeg_csv(path: &Path) -> Result<EegRecording> {
    let mut cols = read_columns(path, SeriesKind::Eeg.columns())?;
    let f4 = cols.pop().unwrap();
    let f3 = cols.pop().unwrap();
    let t = cols.pop().unwrap();
    let dts: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let dt = median(&dts);
    if dt <= 0.0 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            reason: "EEG timestamps do not advance".into(),
        });
    }
    let sample_rate = (1.0 / dt).round();
    EegRecording::new(t, [f3, f4], sample_rate)
}

/// Load either schema; see [`SeriesKind`].
pub fn load_csv_series(path: &Path, kind: SeriesKind) -> Result<SensorSeries> {
    match kind {
        SeriesKind::Accel => load_accel_csv(path).map(SensorSeries::Accel),
        SeriesKind::Eeg => load_eeg_csv(path).map(SensorSeries::Eeg),
    }
}

/// Write an accelerometer series in the `t,ax,ay,az` schema.
pub fn write_accel_csv(path: &Path, accel: &AccelSeries) -> Result<()> {
    let mut s = String::from("t,ax,ay,az\n");
    for (t, a) in accel.timestamps.iter().zip(&accel.samples) {
        s.push_str(&format!("{t},{},{},{}\n", a[0], a[1], a[2]));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Write an EEG recording in the `t,f3,f4` schema.
pub fn write_eeg_csv(path: &Path, eeg: &EegRecording) -> Result<()> {
    let mut s = String::from("t,f3,f4\n");
    for i in 0..eeg.len() {
        s.push_str(&format!(
            "{},{},{}\n",
            eeg.timestamps[i], eeg.channels[0][i], eeg.channels[1][i]
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
