//! Report envelopes, output guards and small file helpers.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ibnc_core::repr_io::{self, Format};
use ibnc_core::RepresentationSet;
use serde::{Deserialize, Serialize};

use crate::FormatArg;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, existing outputs, unreadable side files.
    Usage(String),
    Lib(ibnc_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<ibnc_core::Error> for CliError {
    fn from(e: ibnc_core::Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Every JSON report: tool version, subcommand, resolved configuration
/// (minus output locations and thread count) and the result.
#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a C,
    pub result: R,
}

pub fn report<'a, C: Serialize, R: Serialize>(
    command: &'static str,
    config: &'a C,
    result: R,
) -> Report<'a, C, R> {
    Report {
        tool: "ibnc",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        result,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Refuses to clobber existing files unless `--force` was given.
pub fn check_writable(paths: &[&Path], force: bool) -> CliResult<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(CliError::Usage(format!(
                "{} exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Writes `text` to `path` when given; always echoes it to stdout.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    if let Some(p) = path {
        write_text(p, text)?;
    }
    print!("{text}");
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let fail = |e: csv::Error| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush()
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn resolve_format(path: &Path, format: Option<FormatArg>) -> Format {
    match format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::IbncBin) => Format::IbncBin,
        Some(FormatArg::NpyPair) => Format::NpyPair,
        None => Format::from_path(path),
    }
}

pub fn load(path: &Path, format: Option<FormatArg>) -> CliResult<RepresentationSet> {
    Ok(repr_io::load_representation(
        path,
        resolve_format(path, format),
    )?)
}

/// All files a representation save will create.
pub fn representation_outputs(path: &Path, format: Format) -> Vec<PathBuf> {
    let mut out = vec![path.to_path_buf()];
    if format == Format::NpyPair {
        out.push(repr_io::npy_labels_path(path));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub index: usize,
    pub label: usize,
    pub prediction: usize,
}

pub fn write_predictions(path: &Path, labels: &[usize], predictions: &[usize]) -> CliResult<()> {
    let rows: Vec<PredictionRow> = labels
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(index, (&label, &prediction))| PredictionRow {
            index,
            label,
            prediction,
        })
        .collect();
    write_csv(path, &rows)
}

/// Reads a prediction file and returns `(labels, predictions)` in index order.
pub fn read_predictions(path: &Path) -> CliResult<(Vec<usize>, Vec<usize>)> {
    let fail = |e: csv::Error| CliError::Usage(format!("cannot read {}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(fail)?;
    let mut rows: Vec<PredictionRow> = Vec::new();
    for row in r.deserialize() {
        rows.push(row.map_err(fail)?);
    }
    rows.sort_by_key(|r| r.index);
    if rows.iter().enumerate().any(|(i, r)| r.index != i) {
        return Err(CliError::Usage(format!(
            "{}: indices must be 0..N without gaps",
            path.display()
        )));
    }
    Ok(rows.iter().map(|r| (r.label, r.prediction)).unzip())
}
