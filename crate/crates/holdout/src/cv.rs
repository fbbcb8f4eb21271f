//! Cross-validation losses: single split, K-fold, LOOCV, and the three loss
//! anchors that feed the curve fit.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dataset::{make_folds, Dataset, Split};
use crate::error::{Error, Result};
use crate::models::{self, leverages, OlsModel, PredictorSpec};
use crate::rng::RngStream;

/// Default reference fold count for the middle anchor.
pub const DEFAULT_K_REF: usize = 5;

/// Sub-stream labels so the three anchor estimates never share randomness.
const LOOCV_STREAM: u64 = 0x4c4f_4f43; // "LOOC"
const KREF_STREAM: u64 = 0x4b52_4546; // "KREF"
const LMO_STREAM: u64 = 0x4c4d_4f32; // "LMO2"

/// Empirical CV losses at the three anchor hold-out sizes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossAnchors {
    /// Mean squared error at m = 1 (LOOCV).
    pub l_loo: f64,
    /// Mean squared error of the reference K-fold (default K = 5).
    pub l_kref: f64,
    /// Mean squared error of 2-fold CV (leave-most-out).
    pub l_lmo: f64,
    pub m_loo: usize,
    pub m_kref: usize,
    pub m_lmo: usize,
    /// Total number of observations.
    pub n: usize,
}

impl LossAnchors {
    /// Assemble anchors from already-computed losses, checking invariants.
    pub fn new(l_loo: f64, l_kref: f64, l_lmo: f64, k_ref: usize, n: usize) -> Result<Self> {
        let m_kref = n / k_ref;
        let m_lmo = n / 2;
        if !(l_loo.is_finite() && l_kref.is_finite() && l_lmo.is_finite())
            || l_loo < 0.0
            || l_kref < 0.0
            || l_lmo < 0.0
        {
            return Err(Error::InvalidArgument(
                "anchor losses must be finite and nonnegative".into(),
            ));
        }
        if !(1 < m_kref && m_kref < m_lmo) {
            return Err(Error::InvalidArgument(format!(
                "anchor hold-out sizes must be strictly ordered: 1 < {m_kref} < {m_lmo} \
                 fails (n = {n}, k_ref = {k_ref})"
            )));
        }
        Ok(Self {
            l_loo,
            l_kref,
            l_lmo,
            m_loo: 1,
            m_kref,
            m_lmo,
            n,
        })
    }
}

/// Test-set mean squared error of a model trained on the train side only.
pub fn split_mse(spec: &PredictorSpec, data: &Dataset, split: &Split) -> Result<f64> {
    let x_train = data.features_at(&split.train_indices);
    let y_train = data.response_at(&split.train_indices);
    let model = models::fit(spec, &x_train, &y_train)?;
    let x_test = data.features_at(&split.test_indices);
    let y_test = data.response_at(&split.test_indices);
    let preds = model.predict(&x_test)?;
    Ok((preds - y_test).norm_squared() / split.m() as f64)
}

/// Unweighted mean over folds of `split_mse` with fold k as the test set.
pub fn kfold_mse(spec: &PredictorSpec, data: &Dataset, k: usize, rng: &mut RngStream) -> Result<f64> {
    Ok(kfold_fold_losses(spec, data, k, rng)?.iter().sum::<f64>() / k as f64)
}

/// Per-fold test losses of one K-fold pass (fixed fold order).
pub fn kfold_fold_losses(
    spec: &PredictorSpec,
    data: &Dataset,
    k: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let plan = make_folds(data.n_rows(), k, rng)?;
    (0..k)
        .into_par_iter()
        .map(|fold| split_mse(spec, data, &plan.split(fold)))
        .collect()
}

/// Mean leave-one-out squared error, over all rows or a uniform subsample.
///
/// OLS uses the exact hat-matrix closed form `mean((r_i / (1 - h_ii))^2)`;
/// other models refit once per held-out row.
pub fn loocv_mse(
    spec: &PredictorSpec,
    data: &Dataset,
    subsample: Option<usize>,
    rng: &mut RngStream,
) -> Result<f64> {
    let n = data.n_rows();
    let indices: Vec<usize> = match subsample {
        Some(0) => {
            return Err(Error::InvalidArgument("loocv subsample must be >= 1".into()))
        }
        Some(s) if s < n => {
            let mut all: Vec<usize> = (0..n).collect();
            let (chosen, _) = rand::seq::SliceRandom::partial_shuffle(&mut all[..], rng, s);
            let mut chosen = chosen.to_vec();
            chosen.sort_unstable();
            chosen
        }
        _ => (0..n).collect(),
    };

    if let PredictorSpec::Ols = spec {
        let model = OlsModel::fit(data.features(), data.response())?;
        let residuals = data.response() - model.predict(data.features());
        let lev = leverages(data.features())?;
        let sum: f64 = indices
            .iter()
            .map(|&i| {
                let e = residuals[i] / (1.0 - lev[i]);
                e * e
            })
            .sum();
        return Ok(sum / indices.len() as f64);
    }

    let sum: f64 = indices
        .par_iter()
        .map(|&i| {
            let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let split = Split {
                train_indices: train,
                test_indices: vec![i],
            };
            split_mse(spec, data, &split)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a + b))?;
    Ok(sum / indices.len() as f64)
}

/// Estimate the three anchors: LOOCV, reference K-fold, and 2-fold CV.
pub fn estimate_anchors(
    spec: &PredictorSpec,
    data: &Dataset,
    k_ref: usize,
    loocv_subsample: Option<usize>,
    rng: &mut RngStream,
) -> Result<LossAnchors> {
    let n = data.n_rows();
    if n < 2 * k_ref {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2 * k_ref for ordered anchors, got n = {n}, k_ref = {k_ref}"
        )));
    }
    let l_loo = loocv_mse(spec, data, loocv_subsample, &mut rng.derive(LOOCV_STREAM))?;
    let l_kref = kfold_mse(spec, data, k_ref, &mut rng.derive(KREF_STREAM))?;
    let l_lmo = kfold_mse(spec, data, 2, &mut rng.derive(LMO_STREAM))?;
    LossAnchors::new(l_loo, l_kref, l_lmo, k_ref, n)
}

/// Simulation-only pure loss `(1/m) Σ [(pred_j − y_j)² − ε_j²]`, where
/// `ε_j = y_j − f_true_j`. Unbiased for `(1/m)‖μ̂ − μ‖²` given the model.
pub fn pure_loss(predictions: &DVector<f64>, f_true: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if predictions.len() != f_true.len() || predictions.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            got: f_true.len().max(y.len()),
        });
    }
    let m = predictions.len() as f64;
    let sum: f64 = (0..predictions.len())
        .map(|j| {
            let err = predictions[j] - y[j];
            let eps = y[j] - f_true[j];
            err * err - eps * eps
        })
        .sum();
    Ok(sum / m)
}
