//! Representation matrices with class labels, and their on-disk formats.
//!
//! Three interchangeable formats are supported:
//!
//! * `csv` — header `f0,...,f{d-1},label`, one row per sample. The label
//!   column is found by its header name, so column order is free.
//! * `ibnc-bin` — little-endian binary: magic `IBNC`, `u32` version (1),
//!   `u64` rows, `u64` cols, `u8` dtype (0 = f64), row-major f64 features,
//!   then one `i64` label per row.
//! * `npy-pair` — two `.npy` files, features `N x d` (`<f8` or `<f4`) and
//!   labels `N` (`<i8`). The labels file sits next to the features file as
//!   `<stem>.labels.npy`.
//!
//! Labels are remapped on ingest to the dense range `[0, K)`, ordered by the
//! original label value.

mod csv_format;
mod ibnc_bin;
mod npy;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

pub use npy::{read_npy_labels, read_npy_matrix, write_npy_labels, write_npy_matrix};

/// An `N x d` feature matrix with one class label per row.
///
/// Immutable after construction. Every class in `[0, K)` has at least two
/// samples and all features are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationSet {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_count: usize,
    name: String,
}

impl RepresentationSet {
    /// Builds a set from already-dense labels in `[0, class_count)`.
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        class_count: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Validation(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.nrows()
            )));
        }
        if class_count == 0 {
            return Err(Error::Validation("class count must be positive".into()));
        }
        if let Some((idx, _)) = features.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            let (n, _) = features.shape();
            return Err(Error::Validation(format!(
                "non-finite feature at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        let mut counts = vec![0usize; class_count];
        for &l in &labels {
            if l >= class_count {
                return Err(Error::Validation(format!(
                    "label {l} outside [0, {class_count})"
                )));
            }
            counts[l] += 1;
        }
        if let Some((k, c)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(Error::Validation(format!(
                "class {k} has {c} sample(s); at least 2 are required"
            )));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            name: name.into(),
        })
    }

    /// Builds a set from arbitrary integer labels, remapping them to `[0, K)`
    /// in ascending order of the original values. A non-identity mapping is
    /// appended to the name, e.g. `z (labels 3->0,7->1)`.
    pub fn from_raw_labels(
        features: DMatrix<f64>,
        raw_labels: &[i64],
        name: impl Into<String>,
    ) -> Result<Self> {
        let distinct: BTreeMap<i64, usize> = raw_labels
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(dense, raw)| (raw, dense))
            .collect();
        let labels: Vec<usize> = raw_labels.iter().map(|l| distinct[l]).collect();
        let mut name = name.into();
        let identity = distinct.iter().all(|(&raw, &dense)| raw == dense as i64);
        if !identity {
            let mapping: Vec<String> = distinct
                .iter()
                .map(|(raw, dense)| format!("{raw}->{dense}"))
                .collect();
            name = format!("{name} (labels {})", mapping.join(","));
        }
        Self::new(features, labels, distinct.len().max(1), name)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Number of samples in each class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Same labels, new features (same row count required).
    pub fn with_features(&self, features: DMatrix<f64>, name: impl Into<String>) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.class_count, name)
    }

    /// Subset of rows in the given order; keeps the class count.
    pub fn select(&self, rows: &[usize], name: impl Into<String>) -> Result<Self> {
        let features = linalg::select_rows(&self.features, rows);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::new(features, labels, self.class_count, name)
    }
}

/// On-disk representation format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    IbncBin,
    NpyPair,
}

impl Format {
    /// Guess from the file extension: `.csv`, `.npy`, anything else is `ibnc-bin`.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            Some(e) if e.eq_ignore_ascii_case("npy") => Format::NpyPair,
            _ => Format::IbncBin,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "ibnc-bin" | "ibnc" => Ok(Format::IbncBin),
            "npy-pair" | "npy" => Ok(Format::NpyPair),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::IbncBin => "ibnc-bin",
            Format::NpyPair => "npy-pair",
        })
    }
}

/// Path of the labels file paired with an `.npy` features file.
pub fn npy_labels_path(features_path: &Path) -> PathBuf {
    let stem = features_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    features_path.with_file_name(format!("{stem}.labels.npy"))
}

fn stem_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load_representation(path: &Path, format: Format) -> Result<RepresentationSet> {
    let name = stem_name(path);
    let (features, raw_labels) = match format {
        Format::Csv => csv_format::read(path)?,
        Format::IbncBin => ibnc_bin::read(path)?,
        Format::NpyPair => {
            return load_npy_pair(path, &npy_labels_path(path));
        }
    };
    RepresentationSet::from_raw_labels(features, &raw_labels, name)
}

pub fn load_npy_pair(features_path: &Path, labels_path: &Path) -> Result<RepresentationSet> {
    let features = read_npy_matrix(features_path)?;
    let labels = read_npy_labels(labels_path)?;
    RepresentationSet::from_raw_labels(features, &labels, stem_name(features_path))
}

pub fn save_representation(set: &RepresentationSet, path: &Path, format: Format) -> Result<()> {
    let labels: Vec<i64> = set.labels().iter().map(|&l| l as i64).collect();
    match format {
        Format::Csv => csv_format::write(path, set.features(), &labels),
        Format::IbncBin => ibnc_bin::write(path, set.features(), &labels),
        Format::NpyPair => {
            write_npy_matrix(path, set.features())?;
            write_npy_labels(&npy_labels_path(path), &labels)
        }
    }
}

/// Stratified train/test split.
///
/// Each class is shuffled with a seeded ChaCha8 stream and its first
/// `round(n_k * fraction)` members go to the training side. Both sides keep
/// their original row order.
pub fn split_train_test(
    set: &RepresentationSet,
    fraction: f64,
    seed: u64,
) -> Result<(RepresentationSet, RepresentationSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {fraction} outside (0, 1)"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); set.class_count()];
    for (i, &l) in set.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(set.len());
    let mut test = Vec::with_capacity(set.len());
    for (k, members) in by_class.iter_mut().enumerate() {
        let n_train = (members.len() as f64 * fraction).round() as usize;
        let n_test = members.len() - n_train;
        if n_train < 2 || n_test < 2 {
            return Err(Error::Validation(format!(
                "fraction {fraction} leaves class {k} with {n_train} train / {n_test} test samples"
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((
        set.select(&train, format!("{}/train", set.name()))?,
        set.select(&test, format!("{}/test", set.name()))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n_per_class: usize, classes: usize) -> RepresentationSet {
        let n = n_per_class * classes;
        let features = DMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        let labels = (0..n).map(|i| i / n_per_class).collect();
        RepresentationSet::new(features, labels, classes, "t").unwrap()
    }

    #[test]
    fn rejects_nan() {
        let f = DMatrix::from_row_slice(4, 1, &[0.0, f64::NAN, 1.0, 2.0]);
        let err = RepresentationSet::new(f, vec![0, 0, 1, 1], 2, "x").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_singleton_class() {
        let f = DMatrix::zeros(3, 1);
        let err = RepresentationSet::from_raw_labels(f, &[0, 0, 1], "x").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn remaps_sparse_labels() {
        let f = DMatrix::zeros(4, 2);
        let s = RepresentationSet::from_raw_labels(f, &[7, 3, 3, 7], "z").unwrap();
        assert_eq!(s.labels(), &[1, 0, 0, 1]);
        assert_eq!(s.class_count(), 2);
        assert_eq!(s.name(), "z (labels 3->0,7->1)");
    }

    #[test]
    fn dense_labels_keep_name() {
        let f = DMatrix::zeros(4, 2);
        let s = RepresentationSet::from_raw_labels(f, &[0, 1, 0, 1], "z").unwrap();
        assert_eq!(s.name(), "z");
    }

    #[test]
    fn split_is_stratified() {
        let set = balanced(50, 2);
        let (train, test) = split_train_test(&set, 0.8, 7).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        assert_eq!(train.class_sizes(), vec![40, 40]);
        assert_eq!(test.class_sizes(), vec![10, 10]);
    }

    #[test]
    fn split_is_deterministic() {
        let set = balanced(50, 2);
        let (a, _) = split_train_test(&set, 0.8, 7).unwrap();
        let (b, _) = split_train_test(&set, 0.8, 7).unwrap();
        assert_eq!(a.features(), b.features());
        let (c, _) = split_train_test(&set, 0.8, 8).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn split_too_small_is_validation_error() {
        let set = balanced(2, 2);
        assert!(matches!(
            split_train_test(&set, 0.9, 1),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert_eq!("ibnc-bin".parse::<Format>().unwrap(), Format::IbncBin);
        assert_eq!("npy-pair".parse::<Format>().unwrap(), Format::NpyPair);
        assert!("xml".parse::<Format>().is_err());
        assert_eq!(
            npy_labels_path(Path::new("/a/z.npy")),
            PathBuf::from("/a/z.labels.npy")
        );
    }
}
