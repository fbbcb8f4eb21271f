//! Machine-readable report export: JSON envelopes with full provenance
//! (version, resolved config, seed, duration) and plot-ready CSV tables.
//! All files are written atomically (temp file + rename).

use std::path::Path;

use crate::curve::{eval_loss, eval_variance_bound, negative_utility, BoundMode, LossCurve};
use crate::error::{Error, Result};
use crate::optimizer::ParetoPoint;
use crate::sim::{KfoldVarianceReport, SplitVarianceReport};

/// Envelope wrapping every JSON report with reproducibility metadata.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Report<T> {
    /// Crate version that produced the report.
    pub version: String,
    /// Subcommand or experiment name.
    pub command: String,
    /// Fully resolved configuration, after flag/file merging.
    pub config: serde_json::Value,
    pub seed: u64,
    pub duration_seconds: f64,
    pub results: T,
}

impl<T: serde::Serialize> Report<T> {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        seed: u64,
        duration_seconds: f64,
        results: T,
    ) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed,
            duration_seconds,
            results,
        }
    }
}

/// A CSV table: header plus stringified rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: Vec<S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Atomically write any serializable value as pretty JSON.
pub fn write_json_atomic<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    write_atomic(path, body.as_bytes())
}

/// Atomically write a CSV table.
pub fn write_csv_atomic(path: &Path, table: &CsvTable) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&table.header)?;
    for row in &table.rows {
        writer.write_record(row)?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv flush failed: {e}")))?;
    write_atomic(path, &body)
}

fn write_atomic(path: &Path, body: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = dir.unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    std::io::Write::write_all(&mut tmp, body).map_err(|e| io_err(path, e))?;
    tmp.persist(path)
        .map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.10e}")
    } else {
        String::new()
    }
}

/// Loss/bound/utility curve over the full m domain at one sigma^2.
/// Columns: m, expected_loss, variance_bound, negative_utility; infeasible
/// values (negative estimated loss) are left blank.
pub fn curve_table(curve: &LossCurve, mode: &BoundMode) -> CsvTable {
    let mut table = CsvTable::new(vec!["m", "expected_loss", "variance_bound", "negative_utility"]);
    for m in curve.m_min()..=curve.m_max() {
        let loss = eval_loss(curve, m, mode.sigma2()).map(fmt).unwrap_or_default();
        let bound = eval_variance_bound(curve, m, mode).map(fmt).unwrap_or_default();
        let utility = negative_utility(curve, m, mode).map(fmt).unwrap_or_default();
        table.push_row(vec![m.to_string(), loss, bound, utility]);
    }
    table
}

/// Pareto frontier table. Columns: sigma2, m_star, implied_k,
/// implied_k_nearest, feasible.
pub fn frontier_table(points: &[ParetoPoint]) -> CsvTable {
    let mut table = CsvTable::new(vec![
        "sigma2",
        "m_star",
        "implied_k",
        "implied_k_nearest",
        "feasible",
    ]);
    for p in points {
        let (m_star, implied_k, nearest) = if p.feasible {
            (
                p.m_star.to_string(),
                fmt(p.implied_k),
                p.implied_k.round().to_string(),
            )
        } else {
            (String::new(), String::new(), String::new())
        };
        table.push_row(vec![
            fmt(p.sigma2),
            m_star,
            implied_k,
            nearest,
            p.feasible.to_string(),
        ]);
    }
    table
}

/// Implicit-sigma^2 table. Columns: k, m_k, implicit_sigma2, feasible;
/// infeasible K rows leave implicit_sigma2 blank (rendered as "-").
pub fn implicit_sigma_table(rows: &[(usize, usize, Option<f64>)]) -> CsvTable {
    let mut table = CsvTable::new(vec!["k", "m_k", "implicit_sigma2", "feasible"]);
    for &(k, m_k, sigma2) in rows {
        table.push_row(vec![
            k.to_string(),
            m_k.to_string(),
            sigma2.map(fmt).unwrap_or_default(),
            sigma2.is_some().to_string(),
        ]);
    }
    table
}

/// Single-split simulation table, one row per m.
pub fn split_table(report: &SplitVarianceReport) -> CsvTable {
    let mut table = CsvTable::new(vec![
        "m",
        "repetitions",
        "empirical_variance",
        "variance_mc_se",
        "mean_pure_loss",
        "bound",
        "ratio_bound_over_empirical",
        "exact_variance",
    ]);
    for row in &report.rows {
        table.push_row(vec![
            row.m.to_string(),
            row.repetitions.to_string(),
            fmt(row.empirical_variance),
            fmt(row.variance_mc_se),
            fmt(row.mean_pure_loss),
            fmt(row.bound),
            fmt(row.ratio_bound_over_empirical),
            row.exact_variance.map(fmt).unwrap_or_default(),
        ]);
    }
    table
}

/// K-fold simulation table, one row per K.
pub fn kfold_table(report: &KfoldVarianceReport) -> CsvTable {
    let mut table = CsvTable::new(vec![
        "k",
        "m",
        "repetitions",
        "true_mc_variance_oracle",
        "true_mc_variance_pure",
        "pure_variance_mc_se",
        "nested_cv_variance",
        "clt_plugin_variance",
        "mean_pure_loss",
        "bound_raw_c4",
        "bound_raw_c16",
        "bound_clt_c4",
        "bound_clt_c16",
        "max_single_fold_variance_pure",
    ]);
    for row in &report.rows {
        table.push_row(vec![
            row.k.to_string(),
            row.m.to_string(),
            row.repetitions.to_string(),
            fmt(row.true_mc_variance_oracle),
            fmt(row.true_mc_variance_pure),
            fmt(row.pure_variance_mc_se),
            fmt(row.nested_cv_variance),
            fmt(row.clt_plugin_variance),
            fmt(row.mean_pure_loss),
            fmt(row.bound_raw_c4),
            fmt(row.bound_raw_c16),
            fmt(row.bound_clt_c4),
            fmt(row.bound_clt_c16),
            fmt(row.max_single_fold_variance_pure),
        ]);
    }
    table
}
