//! Number formatting, atomic file writes and the CSV schemas.

use std::fs;
use std::io::Write;
use std::path::Path;

use isotrack_core::simulator::{Metrics, TrajectorySample};

use crate::{Error, Result};

pub const TRAJECTORY_HEADER: [&str; 9] = ["t", "x", "y", "theta", "s", "epsilon", "e", "omega", "sigma"];
pub const SWEEP_HEADER: [&str; 5] = ["value", "sse_max", "sse_mean", "convergence_time", "completed"];

/// Formats `x` rounded to 9 significant digits, in the shortest form that
/// parses back to the rounded value.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    if (1e-4..1e15).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so a
/// failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("output path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn trajectory_csv(samples: &[TrajectorySample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER)?;
    for s in samples {
        w.write_record([s.t, s.x, s.y, s.theta, s.s, s.epsilon, s.e, s.omega, s.sigma].map(sig9))?;
    }
    w.into_inner().map_err(|e| Error::Schema(e.to_string()))
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if !header.iter().eq(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "header `{}` does not match `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

fn parse_cell(record: &csv::StringRecord, i: usize, name: &str) -> Result<f64> {
    let line = record.position().map_or(0, |p| p.line());
    record[i]
        .trim()
        .parse()
        .map_err(|_| Error::Schema(format!("line {line}: column `{name}` is not a number: `{}`", &record[i])))
}

pub fn parse_trajectory_csv(bytes: &[u8]) -> Result<Vec<TrajectorySample>> {
    let mut r = csv::Reader::from_reader(bytes);
    check_header(&mut r, &TRAJECTORY_HEADER)?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let mut v = [0.0; 9];
        for (i, name) in TRAJECTORY_HEADER.iter().enumerate() {
            v[i] = parse_cell(&record, i, name)?;
        }
        let [t, x, y, theta, s, epsilon, e, omega, sigma] = v;
        out.push(TrajectorySample {
            t,
            x,
            y,
            theta,
            s,
            epsilon,
            e,
            omega,
            sigma,
        });
    }
    Ok(out)
}

/// One row of the sweep CSV. Entries whose scenario was rejected carry NaN
/// errors and `completed = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub sse_max: f64,
    pub sse_mean: f64,
    pub convergence_time: Option<f64>,
    pub completed: bool,
}

impl SweepRow {
    pub fn from_metrics(value: f64, m: &Metrics) -> Self {
        Self {
            value,
            sse_max: m.steady_state_error_max,
            sse_mean: m.steady_state_error_mean,
            convergence_time: m.convergence_time,
            completed: m.completed,
        }
    }

    pub fn rejected(value: f64) -> Self {
        Self {
            value,
            sse_max: f64::NAN,
            sse_mean: f64::NAN,
            convergence_time: None,
            completed: false,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            sig9(r.value),
            sig9(r.sse_max),
            sig9(r.sse_mean),
            r.convergence_time.map(sig9).unwrap_or_default(),
            r.completed.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Schema(e.to_string()))
}

pub fn parse_sweep_csv(bytes: &[u8]) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    check_header(&mut r, &SWEEP_HEADER)?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let convergence_time = match record[3].trim() {
            "" => None,
            _ => Some(parse_cell(&record, 3, SWEEP_HEADER[3])?),
        };
        let completed = match record[4].trim() {
            "true" => true,
            "false" => false,
            other => return Err(Error::Schema(format!("column `completed` is not a boolean: `{other}`"))),
        };
        out.push(SweepRow {
            value: parse_cell(&record, 0, SWEEP_HEADER[0])?,
            sse_max: parse_cell(&record, 1, SWEEP_HEADER[1])?,
            sse_mean: parse_cell(&record, 2, SWEEP_HEADER[2])?,
            convergence_time,
            completed,
        });
    }
    Ok(out)
}
