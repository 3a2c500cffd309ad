//! Datasets in features × samples orientation, CSV ingestion and splitting.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-numeric cell {value:?} at line {line}, column {column}")]
    NonNumeric { line: usize, column: usize, value: String },
    #[error("non-finite value at line {line}, column {column}")]
    NonFiniteCell { line: usize, column: usize },
    #[error("ragged CSV: line {line} has {found} fields, expected {expected}")]
    Ragged { line: usize, found: usize, expected: usize },
    #[error("label column {0:?} not found in header")]
    LabelColumnNotFound(String),
    #[error("a label column can only be selected by name when the file has a header row")]
    LabelColumnWithoutHeader,
    #[error("labels are read from a column, which requires rows-are-samples orientation")]
    LabelColumnOrientation,
    #[error("empty dataset: {0}")]
    Empty(&'static str),
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch { what: &'static str, found: usize, expected: usize },
    #[error("n_train = {n_train} must satisfy 1 <= n_train < n = {n}")]
    SplitOutOfRange { n_train: usize, n: usize },
    #[error("budget m = {m}, r = {r} must satisfy 1 <= m <= n = {n} and 1 <= r <= d = {d}")]
    BudgetOutOfRange { m: usize, r: usize, n: usize, d: usize },
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
}

/// Layout of a CSV file relative to the internal d×n orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    #[default]
    RowsAreSamples,
    RowsAreFeatures,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadOptions {
    pub has_header: bool,
    pub label_column: Option<String>,
    pub orientation: Orientation,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { has_header: true, label_column: None, orientation: Orientation::RowsAreSamples }
    }
}

/// A real d×n matrix (rows are features, columns are samples) with metadata.
///
/// Immutable after construction; every constructor checks the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    matrix: DMatrix<f64>,
    feature_names: Vec<String>,
    labels: Option<Vec<String>>,
    source: String,
}

impl Dataset {
    pub fn new(
        matrix: DMatrix<f64>,
        feature_names: Vec<String>,
        labels: Option<Vec<String>>,
        source: impl Into<String>,
    ) -> Result<Self, DataError> {
        let (d, n) = matrix.shape();
        if d == 0 {
            return Err(DataError::Empty("no features"));
        }
        if n == 0 {
            return Err(DataError::Empty("no samples"));
        }
        for j in 0..n {
            for i in 0..d {
                if !matrix[(i, j)].is_finite() {
                    return Err(DataError::NonFinite { row: i, col: j });
                }
            }
        }
        if feature_names.len() != d {
            return Err(DataError::LengthMismatch {
                what: "feature_names",
                found: feature_names.len(),
                expected: d,
            });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DataError::LengthMismatch { what: "labels", found: l.len(), expected: n });
            }
        }
        Ok(Dataset { matrix, feature_names, labels, source: source.into() })
    }

    /// Builds an unlabeled dataset with generated feature names `f0, f1, ...`.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self, DataError> {
        let names = default_feature_names(matrix.nrows());
        Dataset::new(matrix, names, None, "in-memory")
    }

    pub fn with_labels(self, labels: Vec<String>) -> Result<Self, DataError> {
        Dataset::new(self.matrix, self.feature_names, Some(labels), self.source)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_features(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Copy with labels stripped; this is what selection methods get to see.
    pub fn unlabeled(&self) -> Dataset {
        Dataset { labels: None, ..self.clone() }
    }

    pub fn select_samples(&self, idx: &[usize]) -> Result<Dataset, DataError> {
        let n = self.n_samples();
        if let Some(&bad) = idx.iter().find(|&&j| j >= n) {
            return Err(DataError::IndexOutOfRange { index: bad, size: n });
        }
        let m = crate::linalg::select_columns(&self.matrix, idx);
        let labels = self.labels.as_ref().map(|l| idx.iter().map(|&j| l[j].clone()).collect());
        Dataset::new(m, self.feature_names.clone(), labels, self.source.clone())
    }

    pub fn select_features(&self, idx: &[usize]) -> Result<Dataset, DataError> {
        let d = self.n_features();
        if let Some(&bad) = idx.iter().find(|&&i| i >= d) {
            return Err(DataError::IndexOutOfRange { index: bad, size: d });
        }
        let m = crate::linalg::select_rows(&self.matrix, idx);
        let names = idx.iter().map(|&i| self.feature_names[i].clone()).collect();
        Dataset::new(m, names, self.labels.clone(), self.source.clone())
    }

    /// Per-feature standardization to zero mean and unit (population) variance.
    /// Constant features are centered and left at zero.
    pub fn standardized(&self) -> Dataset {
        let mut m = self.matrix.clone();
        let n = m.ncols() as f64;
        for mut row in m.row_iter_mut() {
            let mean = row.sum() / n;
            row.add_scalar_mut(-mean);
            let sd = (row.norm_squared() / n).sqrt();
            if sd > 0.0 {
                row.scale_mut(1.0 / sd);
            }
        }
        Dataset { matrix: m, ..self.clone() }
    }
}

pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}

/// Sample and feature budgets for one selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRequest {
    pub m: usize,
    pub r: usize,
}

impl SelectionRequest {
    pub fn validate(&self, n_samples: usize, n_features: usize) -> Result<(), DataError> {
        if self.m == 0 || self.m > n_samples || self.r == 0 || self.r > n_features {
            return Err(DataError::BudgetOutOfRange { m: self.m, r: self.r, n: n_samples, d: n_features });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub seed: u64,
}

/// Random disjoint train/test column indices, each sorted ascending.
pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if spec.n_train == 0 || spec.n_train >= n {
        return Err(DataError::SplitOutOfRange { n_train: spec.n_train, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut train = perm[..spec.n_train].to_vec();
    let mut test = perm[spec.n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    let (train, test) = split_indices(ds.n_samples(), spec)?;
    Ok((ds.select_samples(&train)?, ds.select_samples(&test)?))
}

/// Gaussian blobs around random centers, for experiments with a known answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedClusters {
    pub n_samples: usize,
    pub n_features: usize,
    pub classes: usize,
    /// Standard deviation of the cluster centers.
    pub separation: f64,
    /// Standard deviation of the within-cluster noise.
    pub noise: f64,
}

impl PlantedClusters {
    /// Sample j belongs to class `j % classes` and is labeled `c<class>`.
    pub fn generate(&self, seed: u64) -> Result<Dataset, DataError> {
        if self.classes == 0 || self.n_samples < self.classes {
            return Err(DataError::Empty("planted clusters need 1 <= classes <= n_samples"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |sd: f64| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        };
        let centers = DMatrix::from_fn(self.n_features, self.classes, |_, _| gauss(self.separation));
        let m = DMatrix::from_fn(self.n_features, self.n_samples, |i, j| centers[(i, j % self.classes)] + gauss(self.noise));
        let labels = (0..self.n_samples).map(|j| format!("c{}", j % self.classes)).collect();
        Dataset::from_matrix(m)?.with_labels(labels)
    }
}

/// Findings from [`validate`]. Empty means nothing suspicious was found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub zero_columns: Vec<usize>,
    pub zero_variance_features: Vec<usize>,
    pub duplicate_columns: Vec<(usize, usize)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.zero_columns.is_empty()
            && self.zero_variance_features.is_empty()
            && self.duplicate_columns.is_empty()
    }
}

pub fn validate(ds: &Dataset) -> ValidationReport {
    let x = ds.matrix();
    let mut report = ValidationReport::default();
    for (j, col) in x.column_iter().enumerate() {
        if col.iter().all(|&v| v == 0.0) {
            report.zero_columns.push(j);
        }
    }
    for (i, row) in x.row_iter().enumerate() {
        let first = row[0];
        if row.iter().all(|&v| v == first) {
            report.zero_variance_features.push(i);
        }
    }
    for a in 0..x.ncols() {
        for b in (a + 1)..x.ncols() {
            if x.column(a) == x.column(b) {
                report.duplicate_columns.push((a, b));
            }
        }
    }
    report
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Option<Vec<String>> = if options.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let label_idx = match &options.label_column {
        None => None,
        Some(name) => {
            if options.orientation != Orientation::RowsAreSamples {
                return Err(DataError::LabelColumnOrientation);
            }
            let h = header.as_ref().ok_or(DataError::LabelColumnWithoutHeader)?;
            Some(h.iter().position(|c| c == name).ok_or_else(|| DataError::LabelColumnNotFound(name.clone()))?)
        }
    };

    let mut expected = header.as_ref().map(Vec::len);
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let first_data_line = if options.has_header { 2 } else { 1 };
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = first_data_line + k;
        let width = *expected.get_or_insert(record.len());
        if record.len() != width {
            return Err(DataError::Ragged { line, found: record.len(), expected: width });
        }
        let mut row = Vec::with_capacity(width);
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                line,
                column: c + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteCell { line, column: c + 1 });
            }
            row.push(v);
        }
        values.push(row);
    }
    if values.is_empty() {
        return Err(DataError::Empty("CSV has no data rows"));
    }
    let width = values[0].len();
    if width == 0 {
        return Err(DataError::Empty("CSV has no numeric columns"));
    }
    let rows = values.len();
    let source = path.display().to_string();
    match options.orientation {
        Orientation::RowsAreSamples => {
            // file rows become columns
            let matrix = DMatrix::from_fn(width, rows, |i, j| values[j][i]);
            let names = match &header {
                Some(h) => h.iter().enumerate().filter(|(c, _)| Some(*c) != label_idx).map(|(_, s)| s.clone()).collect(),
                None => default_feature_names(width),
            };
            let labels = label_idx.map(|_| labels);
            Dataset::new(matrix, names, labels, source)
        }
        Orientation::RowsAreFeatures => {
            let matrix = DMatrix::from_fn(rows, width, |i, j| values[i][j]);
            Dataset::new(matrix, default_feature_names(rows), None, source)
        }
    }
}

/// Writes the dataset rows-are-samples with a header; labels (if any) go in a
/// trailing `label` column. Values use the shortest round-trip decimal form.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io { path: path.display().to_string(), source };
    let mut out = String::new();
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    if ds.labels().is_some() {
        header.push("label");
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for j in 0..ds.n_samples() {
        let mut cells: Vec<String> = ds.matrix().column(j).iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = ds.labels() {
            cells.push(l[j].clone());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = File::create(path).map_err(io_err)?;
    f.write_all(out.as_bytes()).map_err(io_err)
}
