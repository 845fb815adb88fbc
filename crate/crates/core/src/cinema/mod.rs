//! Cinema-style image databases.
//!
//! Layout on disk:
//!
//! ```text
//! <root>/data.csv          header: <axis>,...,<axis>,FILE
//! <root>/image/NNNNN.gbuf  one G-buffer per row, see [`gbuf`]
//! ```
//!
//! `FILE` is always the last column and holds a path relative to `<root>`.
//! Axis values are numbers written in shortest roundtrip form.

pub mod gbuf;
pub mod preview;

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::SamplingGrid;
use crate::imaging::{GBuffer, ImagingError};
use crate::num::Real;

pub const INDEX_FILE: &str = "data.csv";
pub const FILE_COLUMN: &str = "FILE";
pub const IMAGE_DIR: &str = "image";

#[derive(Debug, Error)]
pub enum CinemaError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line} (row {row}): {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        row: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Header { path: PathBuf, message: String },
    #[error("dangling reference: {0} does not exist")]
    DanglingReference(PathBuf),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("row {0} is out of range")]
    RowOutOfRange(usize),
    #[error("unsupported .gbuf version {0}")]
    Version(u32),
    #[error("corrupt .gbuf: {0}")]
    Corrupt(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CinemaError + '_ {
    move |source| CinemaError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub values: Vec<f64>,
    /// Relative to the database root.
    pub file: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CinemaDatabase {
    root: PathBuf,
    axes: Vec<String>,
    rows: Vec<Row>,
}

/// Constraint on one axis; ranges are inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constraint {
    Exact(f64),
    Range([f64; 2]),
}

impl Constraint {
    pub fn matches(&self, v: f64) -> bool {
        match *self {
            Constraint::Exact(x) => v == x,
            Constraint::Range([lo, hi]) => v >= lo && v <= hi,
        }
    }
}

pub type Predicate = IndexMap<String, Constraint>;

impl CinemaDatabase {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn axis_index(&self, axis: &str) -> Result<usize, CinemaError> {
        self.axes
            .iter()
            .position(|a| a == axis)
            .ok_or_else(|| CinemaError::UnknownAxis(axis.to_owned()))
    }

    /// Indices of rows satisfying every constraint, in index order.
    pub fn query_indices(&self, predicate: &Predicate) -> Result<Vec<usize>, CinemaError> {
        let checks: Vec<(usize, Constraint)> = predicate
            .iter()
            .map(|(axis, c)| Ok((self.axis_index(axis)?, *c)))
            .collect::<Result<_, CinemaError>>()?;
        Ok(self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, row)| checks.iter().all(|(i, c)| c.matches(row.values[*i])))
            .map(|(i, _)| i)
            .collect())
    }

    pub fn query(&self, predicate: &Predicate) -> Result<Vec<&Row>, CinemaError> {
        Ok(self
            .query_indices(predicate)?
            .into_iter()
            .map(|i| &self.rows[i])
            .collect())
    }

    /// Sorted, de-duplicated values of one axis.
    pub fn distinct_values(&self, axis: &str) -> Result<Vec<f64>, CinemaError> {
        let i = self.axis_index(axis)?;
        let mut values: Vec<f64> = self.rows.iter().map(|r| r.values[i]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(values)
    }

    pub fn file_path(&self, row: usize) -> Result<PathBuf, CinemaError> {
        let row = self.rows.get(row).ok_or(CinemaError::RowOutOfRange(row))?;
        Ok(self.root.join(&row.file))
    }

    /// Reads and decodes the G-buffer referenced by `row`.
    pub fn load_gbuffer(&self, row: usize) -> Result<GBuffer, CinemaError> {
        let path = self.file_path(row)?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        gbuf::decode(&bytes)
    }
}

/// Formats an axis value in the shortest form that parses back to the same `f64`.
pub fn format_axis_value(v: f64) -> String {
    format!("{v}")
}

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

/// Writes `gbuffers` (one per grid camera, same order) and the CSV index under `root`.
///
/// The database is assembled in a sibling temporary directory and moved into
/// place, replacing any previous database at `root`.
pub fn write_database<T: Real>(
    root: &Path,
    grid: &SamplingGrid<T>,
    gbuffers: &[GBuffer],
    extra_axes: &IndexMap<String, Vec<f64>>,
) -> Result<CinemaDatabase, CinemaError> {
    if gbuffers.len() != grid.len() {
        return Err(CinemaError::Mismatch(format!(
            "{} G-buffers for {} cameras",
            gbuffers.len(),
            grid.len()
        )));
    }
    let mut axes: IndexMap<String, &Vec<f64>> = grid.axes().iter().map(|(k, v)| (k.clone(), v)).collect();
    for (name, values) in extra_axes {
        if values.len() != gbuffers.len() {
            return Err(CinemaError::Mismatch(format!(
                "axis `{name}` has {} values for {} G-buffers",
                values.len(),
                gbuffers.len()
            )));
        }
        if name == FILE_COLUMN || axes.insert(name.clone(), values).is_some() {
            return Err(CinemaError::Mismatch(format!("axis `{name}` defined twice")));
        }
    }
    if let Some(first) = gbuffers.first() {
        let dims = (first.width(), first.height());
        if let Some(g) = gbuffers.iter().find(|g| (g.width(), g.height()) != dims) {
            return Err(CinemaError::Mismatch(format!(
                "resolution mismatch among G-buffers: {dims:?} vs {:?}",
                (g.width(), g.height())
            )));
        }
    }

    let parent = match root.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let name = root
        .file_name()
        .ok_or_else(|| CinemaError::Mismatch(format!("{} is not a directory path", root.display())))?
        .to_string_lossy()
        .into_owned();
    let staging = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    let image_dir = staging.join(IMAGE_DIR);
    fs::create_dir_all(&image_dir).map_err(io_err(&image_dir))?;

    let mut rows = Vec::with_capacity(gbuffers.len());
    let mut csv = String::new();
    let header: Vec<String> = axes
        .keys()
        .map(|k| csv_quote(k))
        .chain([FILE_COLUMN.to_owned()])
        .collect();
    csv.push_str(&header.join(","));
    csv.push_str("\r\n");
    for (i, g) in gbuffers.iter().enumerate() {
        let file = format!("{IMAGE_DIR}/{i:05}.gbuf");
        let path = staging.join(&file);
        fs::write(&path, gbuf::encode(g)).map_err(io_err(&path))?;
        let values: Vec<f64> = axes.values().map(|v| v[i]).collect();
        let fields: Vec<String> = values
            .iter()
            .map(|&v| format_axis_value(v))
            .chain([file.clone()])
            .collect();
        csv.push_str(&fields.join(","));
        csv.push_str("\r\n");
        rows.push(Row { values, file });
    }
    let index = staging.join(INDEX_FILE);
    fs::write(&index, csv).map_err(io_err(&index))?;

    if root.exists() {
        let old = parent.join(format!(".{name}.old-{}", std::process::id()));
        fs::rename(root, &old).map_err(io_err(root))?;
        fs::rename(&staging, root).map_err(io_err(root))?;
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    } else {
        fs::rename(&staging, root).map_err(io_err(root))?;
    }

    Ok(CinemaDatabase {
        root: root.to_path_buf(),
        axes: axes.keys().cloned().collect(),
        rows,
    })
}

/// Parses `data.csv` and checks that every referenced file exists. Pixel data is not read.
pub fn read_database(root: &Path) -> Result<CinemaDatabase, CinemaError> {
    let index = root.join(INDEX_FILE);
    let file = fs::File::open(&index).map_err(io_err(&index))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);

    let parse_err = |line: u64, row: usize, message: String| CinemaError::Parse {
        path: index.clone(),
        line,
        row,
        message,
    };
    let header = reader.headers().map_err(|e| parse_err(1, 0, e.to_string()))?.clone();
    let columns: Vec<String> = header.iter().map(|s| s.trim().to_owned()).collect();
    match columns.last() {
        Some(last) if last == FILE_COLUMN => {}
        _ => {
            return Err(CinemaError::Header {
                path: index.clone(),
                message: format!("last column must be {FILE_COLUMN}"),
            })
        }
    }
    let axes = columns[..columns.len() - 1].to_vec();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, row, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns.len() {
            return Err(parse_err(
                line,
                row,
                format!("expected {} columns, found {}", columns.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .take(axes.len())
            .zip(&axes)
            .map(|(field, axis)| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, row, format!("axis `{axis}`: `{field}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let file = record[axes.len()].trim().to_owned();
        let path = root.join(&file);
        if !path.is_file() {
            return Err(CinemaError::DanglingReference(path));
        }
        rows.push(Row { values, file });
    }

    Ok(CinemaDatabase {
        root: root.to_path_buf(),
        axes,
        rows,
    })
}
