//! CSV and JSON artifacts, with a reader for every writer.
//!
//! Floats are written in Rust's shortest round-trip form, so every file read
//! back through this module reproduces the written values bitwise.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::measure::{Atom, EmpiricalMeasure, MeasureError};
use crate::steady::FigureRow;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub const MEASURE_HEADER: [&str; 3] = ["y", "theta", "weight"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "atom_id", "y", "theta", "weight"];
pub const PROFILE_HEADER: [&str; 4] = ["theta", "g", "g_prime", "g_second"];
pub const FIGURE_HEADER: [&str; 3] = ["alpha", "theta", "g"];
pub const SERIES_HEADER: [&str; 2] = ["x", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub atom_id: usize,
    pub y: f64,
    pub theta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub theta: f64,
    pub g: f64,
    pub g_prime: f64,
    pub g_second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub x: f64,
    pub value: f64,
}

/// Sidecar of a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub dissipations: Vec<f64>,
}

fn ensure_parent(path: &Path) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut wrote = false;
    for row in rows {
        w.serialize(row)?;
        wrote = true;
    }
    if !wrote {
        return Err(IoError::Invalid(format!("no rows for {}", path.display())));
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: DeserializeOwned>(path: &Path, expected: &[&str]) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(IoError::Header {
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }
    r.deserialize().map(|row| row.map_err(IoError::from)).collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_measure_csv(path: &Path, mu: &EmpiricalMeasure) -> Result<(), IoError> {
    write_rows(path, mu.atoms().iter().copied())
}

pub fn read_measure_csv(path: &Path) -> Result<EmpiricalMeasure, IoError> {
    let atoms: Vec<Atom> = read_rows(path, &MEASURE_HEADER)?;
    Ok(EmpiricalMeasure::new(atoms)?)
}

/// Reads a measure from `.csv` or from a JSON array of triples.
pub fn read_measure(path: &Path) -> Result<EmpiricalMeasure, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_measure_csv(path),
        _ => read_json(path),
    }
}

pub fn trajectory_rows(traj: &Trajectory) -> impl Iterator<Item = TrajectoryRow> + '_ {
    traj.times.iter().zip(&traj.states).flat_map(|(&t, state)| {
        state.atoms().iter().enumerate().map(move |(atom_id, a)| TrajectoryRow {
            t,
            atom_id,
            y: a.y,
            theta: a.theta,
            weight: a.weight,
        })
    })
}

/// Writes `stem.csv` and the `stem.json` sidecar into `dir`.
pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory) -> Result<(), IoError> {
    write_rows(&dir.join(format!("{stem}.csv")), trajectory_rows(traj))?;
    let meta = TrajectoryMeta {
        times: traj.times.clone(),
        energies: traj.energies.clone(),
        dissipations: traj.dissipations.clone(),
    };
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

pub fn read_trajectory(dir: &Path, stem: &str) -> Result<Trajectory, IoError> {
    let rows: Vec<TrajectoryRow> = read_rows(&dir.join(format!("{stem}.csv")), &TRAJECTORY_HEADER)?;
    let meta: TrajectoryMeta = read_json(&dir.join(format!("{stem}.json")))?;
    let mut states = Vec::with_capacity(meta.times.len());
    let mut current: Vec<Atom> = Vec::new();
    let mut current_t: Option<f64> = None;
    for row in rows {
        if current_t.is_some_and(|t| t != row.t) {
            states.push(EmpiricalMeasure::new(std::mem::take(&mut current))?);
        }
        if row.atom_id != current.len() {
            return Err(IoError::Invalid(format!(
                "atom ids out of order at t = {}",
                row.t
            )));
        }
        current_t = Some(row.t);
        current.push(Atom::new(row.y, row.theta, row.weight));
    }
    if !current.is_empty() {
        states.push(EmpiricalMeasure::new(current)?);
    }
    if states.len() != meta.times.len()
        || meta.energies.len() != meta.times.len()
        || meta.dissipations.len() != meta.times.len()
    {
        return Err(IoError::Invalid(
            "trajectory CSV and sidecar disagree on the number of snapshots".into(),
        ));
    }
    Ok(Trajectory {
        times: meta.times,
        states,
        energies: meta.energies,
        dissipations: meta.dissipations,
    })
}

pub fn write_profile_csv(path: &Path, rows: &[ProfileRow]) -> Result<(), IoError> {
    write_rows(path, rows.iter().copied())
}

pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileRow>, IoError> {
    read_rows(path, &PROFILE_HEADER)
}

pub fn write_figure_csv(path: &Path, rows: &[FigureRow]) -> Result<(), IoError> {
    write_rows(path, rows.iter().copied())
}

pub fn read_figure_csv(path: &Path) -> Result<Vec<FigureRow>, IoError> {
    read_rows(path, &FIGURE_HEADER)
}

pub fn write_series_csv(path: &Path, series: &[(f64, f64)]) -> Result<(), IoError> {
    write_rows(path, series.iter().map(|&(x, value)| SeriesRow { x, value }))
}

pub fn read_series_csv(path: &Path) -> Result<Vec<(f64, f64)>, IoError> {
    let rows: Vec<SeriesRow> = read_rows(path, &SERIES_HEADER)?;
    Ok(rows.into_iter().map(|r| (r.x, r.value)).collect())
}
