//! Series CSV files, output directories and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};

/// A series file: a header of column names, then one row per time step.
/// With a trajectory column, consecutive rows sharing its value form one
/// trajectory and the column itself is dropped.
pub fn read_series(
    path: &Path,
    trajectory_column: Option<&str>,
) -> Result<(Vec<String>, Vec<Array2<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let split = match trajectory_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("no column named {name:?}")))?,
        ),
        None => None,
    };
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != split)
        .map(|(_, h)| h.clone())
        .collect();
    if names.is_empty() {
        return Err(Error::Parse(format!("{}: no data columns", path.display())));
    }
    let mut trajectories = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    let mut key: Option<String> = None;
    for (lineno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if let Some(c) = split {
            let k = record.get(c).unwrap_or_default().to_string();
            if key.as_ref().is_some_and(|prev| *prev != k) {
                trajectories.push(to_matrix(std::mem::take(&mut current), names.len()));
            }
            key = Some(k);
        }
        for (i, field) in record.iter().enumerate() {
            if Some(i) == split {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {}: {field:?} is not a number",
                    path.display(),
                    lineno + 2
                ))
            })?;
            current.push(v);
        }
    }
    if !current.is_empty() {
        trajectories.push(to_matrix(current, names.len()));
    }
    if trajectories.is_empty() {
        return Err(Error::Parse(format!("{}: no rows", path.display())));
    }
    Ok((names, trajectories))
}

fn to_matrix(values: Vec<f64>, cols: usize) -> Array2<f64> {
    let rows = values.len() / cols;
    Array2::from_shape_vec((rows, cols), values).expect("csv rows have equal width")
}

pub fn series_csv(series: &Array2<f64>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..series.ncols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header)
        .map_err(|e| Error::Parse(e.to_string()))?;
    for row in series.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Create `dir`, refusing to reuse a non-empty one unless `force` is set.
pub fn output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(Error::invalid(format!(
                "{} already exists; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub bytes: u64,
}

impl InputFile {
    pub fn of(path: &Path) -> Result<Self> {
        let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
        Ok(InputFile {
            path: path.to_path_buf(),
            bytes: meta.len(),
        })
    }
}

/// Everything needed to rerun a command: the resolved configuration, the
/// seed and the tool version.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub inputs: Vec<InputFile>,
    pub config: &'a C,
}

pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    inputs: Vec<InputFile>,
    config: &C,
) -> Result<()> {
    let m = Manifest {
        tool: "tcd",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        inputs,
        config,
    };
    write_json(&dir.join("manifest.json"), &m)
}
