//! Tabular data ingestion, splits, and fold plans.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// How to handle categorical (non-numeric) covariates during ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoricalPolicy {
    /// One-hot encode, dropping the first level of each categorical column.
    OneHotDropFirst,
    /// Reject any non-numeric covariate.
    Error,
}

/// A fully numeric dataset: feature matrix plus response vector.
///
/// Immutable after construction; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: DMatrix<f64>,
    response: DVector<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Build a dataset from parts, validating the invariants.
    pub fn new(
        features: DMatrix<f64>,
        response: DVector<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = features.nrows();
        let n_features = features.ncols();
        if response.len() != n_rows {
            return Err(Error::DimensionMismatch {
                expected: n_rows,
                got: response.len(),
            });
        }
        if feature_names.len() != n_features {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                got: feature_names.len(),
            });
        }
        for (i, v) in response.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    column: "<response>".into(),
                });
            }
        }
        for j in 0..n_features {
            for i in 0..n_rows {
                if !features[(i, j)].is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        column: feature_names[j].clone(),
                    });
                }
            }
        }
        if n_rows <= n_features + 1 {
            return Err(Error::TooFewRows {
                n_rows,
                n_features,
                min_rows: n_features + 1,
            });
        }
        Ok(Self {
            features,
            response,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Row-subset of features for the given indices.
    pub fn features_at(&self, indices: &[usize]) -> DMatrix<f64> {
        self.features.select_rows(indices)
    }

    /// Response values at the given indices.
    pub fn response_at(&self, indices: &[usize]) -> DVector<f64> {
        DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.response[i]))
    }
}

/// One train/test partition of the row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl Split {
    pub fn m(&self) -> usize {
        self.test_indices.len()
    }

    pub fn n(&self) -> usize {
        self.train_indices.len()
    }
}

/// A K-fold partition of the row indices; fold sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Split with fold `k` as the test set and everything else as training.
    pub fn split(&self, k: usize) -> Split {
        let test_indices = self.folds[k].clone();
        let mut train_indices =
            Vec::with_capacity(self.folds.iter().map(Vec::len).sum::<usize>() - test_indices.len());
        for (j, fold) in self.folds.iter().enumerate() {
            if j != k {
                train_indices.extend_from_slice(fold);
            }
        }
        train_indices.sort_unstable();
        Split {
            train_indices,
            test_indices,
        }
    }
}

/// Load a CSV file (RFC-4180, header row required) into a [`Dataset`].
///
/// The target column must be numeric. Non-numeric covariates are expanded
/// per `policy`; empty cells are a hard error, never imputed.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    policy: CategoricalPolicy,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv(e),
        })?;

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::UnknownColumn(target_column.to_string()))?;

    let mut columns: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::InvalidArgument(format!(
                "row {} has {} fields, expected {}",
                row_idx,
                record.len(),
                headers.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::MissingValue {
                    row: row_idx,
                    column: headers[col].clone(),
                });
            }
            columns[col].push(field.to_string());
        }
    }
    let n_rows = columns[target_idx].len();

    let response_vals: Vec<f64> = columns[target_idx]
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.parse::<f64>()
                .map_err(|_| Error::NonNumericTarget(target_column.to_string(), v.clone(), i))
        })
        .collect::<Result<_>>()?;

    // Expand covariate columns: numeric pass through, categorical one-hot.
    let mut feature_names = Vec::new();
    let mut feature_cols: Vec<Vec<f64>> = Vec::new();
    for (col, name) in headers.iter().enumerate() {
        if col == target_idx {
            continue;
        }
        let parsed: Option<Vec<f64>> = columns[col]
            .iter()
            .map(|v| v.parse::<f64>().ok())
            .collect();
        match parsed {
            Some(vals) => {
                feature_names.push(name.clone());
                feature_cols.push(vals);
            }
            None => {
                if policy == CategoricalPolicy::Error {
                    return Err(Error::CategoricalRejected(name.clone()));
                }
                let levels: BTreeSet<&String> = columns[col].iter().collect();
                // Drop the first level to avoid collinearity with the intercept.
                for level in levels.iter().skip(1) {
                    feature_names.push(format!("{name}={level}"));
                    feature_cols.push(
                        columns[col]
                            .iter()
                            .map(|v| if v == *level { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }

    let n_features = feature_cols.len();
    let features = DMatrix::from_fn(n_rows, n_features, |i, j| feature_cols[j][i]);
    Dataset::new(features, DVector::from_vec(response_vals), feature_names)
}

/// Draw a uniformly random test subset of size `m`; deterministic given the stream.
pub fn random_split(n_rows: usize, m: usize, rng: &mut RngStream) -> Result<Split> {
    if m < 1 || m > n_rows.saturating_sub(1) {
        return Err(Error::HoldOutSizeOutOfRange {
            m,
            max: n_rows.saturating_sub(1),
        });
    }
    let mut indices: Vec<usize> = (0..n_rows).collect();
    let (test, train) = indices.partial_shuffle(rng, m);
    let mut test_indices = test.to_vec();
    let mut train_indices = train.to_vec();
    test_indices.sort_unstable();
    train_indices.sort_unstable();
    Ok(Split {
        train_indices,
        test_indices,
    })
}

/// Random partition into K folds with sizes within one of each other.
///
/// The `n_rows % K` leftover rows go to the first folds after shuffling.
pub fn make_folds(n_rows: usize, k: usize, rng: &mut RngStream) -> Result<FoldPlan> {
    if !(2..=n_rows).contains(&k) {
        return Err(Error::FoldCountOutOfRange { k, max: n_rows });
    }
    let mut indices: Vec<usize> = (0..n_rows).collect();
    indices.shuffle(rng);
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_idx in 0..k {
        let size = base + usize::from(fold_idx < extra);
        let mut fold: Vec<usize> = indices[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(FoldPlan { folds })
}
