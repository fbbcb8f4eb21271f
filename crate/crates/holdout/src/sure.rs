//! Stein's unbiased risk estimator for linear smoothers, plus the variance
//! estimator ("SURE for SURE"); the cheap substitute for the LOOCV anchor.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{leverages, OlsModel, PredictorSpec};

/// SURE evaluated on one fitted linear smoother.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SureResult {
    /// `residual_ss + 2 sigma2 divergence - sigma2 n_total`.
    pub sure: f64,
    /// Variance estimate `4 residual_ss + 4 sigma2 tr(H^2) - 2 n_total sigma2`.
    pub sure_for_sure: f64,
    /// Trace of the smoother, `sum_i d mu_hat_i / d y_i`.
    pub divergence: f64,
    pub trace_h_squared: f64,
    pub n_total: usize,
    pub sigma2: f64,
}

/// `SURE = ||mu_hat - y||^2 + 2 sigma2 sum_i d mu_hat_i/d y_i - sigma2 (n+m)`.
pub fn sure_estimate(residual_ss: f64, divergence: f64, sigma2: f64, n_total: usize) -> f64 {
    residual_ss + 2.0 * sigma2 * divergence - sigma2 * n_total as f64
}

/// Unbiased variance estimate of the SURE ("SURE for SURE"):
/// `4 residual_ss + 4 sigma2 tr(H^2) - 2 (n+m) sigma2`.
pub fn sure_variance_estimate(
    residual_ss: f64,
    trace_h_squared: f64,
    sigma2: f64,
    n_total: usize,
) -> f64 {
    4.0 * residual_ss + 4.0 * sigma2 * trace_h_squared - 2.0 * n_total as f64 * sigma2
}

/// Full SURE computation for a linear-smoother spec on a dataset.
pub fn sure_result(spec: &PredictorSpec, data: &Dataset, sigma2: f64) -> Result<SureResult> {
    if !spec.is_linear_smoother() {
        return Err(Error::DivergenceUnavailable);
    }
    let model = OlsModel::fit(data.features(), data.response())?;
    let residual_ss = (data.response() - model.predict(data.features())).norm_squared();
    // For OLS, H = QQ' is idempotent: tr(H) = tr(H^2) = p + 1. Both computed
    // from the leverage diagonal rather than assumed.
    let divergence: f64 = leverages(data.features())?.sum();
    let trace_h_squared = divergence;
    let n_total = data.n_rows();
    Ok(SureResult {
        sure: sure_estimate(residual_ss, divergence, sigma2, n_total),
        sure_for_sure: sure_variance_estimate(residual_ss, trace_h_squared, sigma2, n_total),
        divergence,
        trace_h_squared,
        n_total,
        sigma2,
    })
}

/// Per-observation risk estimate `sure / N`, usable in place of the LOOCV
/// anchor when refitting is too expensive.
pub fn sure_anchor(spec: &PredictorSpec, data: &Dataset, sigma2: f64) -> Result<f64> {
    let result = sure_result(spec, data, sigma2)?;
    Ok(result.sure / result.n_total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ForestConfig;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = RngStream::new(seed);
        let x = DMatrix::from_fn(n, p, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 0)] + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        Dataset::new(x, y, (0..p).map(|j| format!("x{j}")).collect()).unwrap()
    }

    #[test]
    fn identity_smoother_sure_is_sigma2_n() {
        // mu_hat = y: RSS = 0, divergence = n -> 2 sigma2 n - sigma2 n.
        assert_relative_eq!(sure_estimate(0.0, 30.0, 2.0, 30), 2.0 * 30.0, epsilon = 1e-12);
    }

    #[test]
    fn null_smoother_at_noise_level_is_zero() {
        // divergence = 0 and RSS = sigma2 n cancel exactly.
        assert_relative_eq!(sure_estimate(3.0 * 25.0, 0.0, 3.0, 25), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_sure_matches_mallows_expression() {
        let data = gaussian_dataset(60, 4, 1);
        let result = sure_result(&PredictorSpec::Ols, &data, 1.3).unwrap();
        // Oracle: direct RSS + 2 sigma2 (p+1) - sigma2 N.
        let model = OlsModel::fit(data.features(), data.response()).unwrap();
        let rss = (data.response() - model.predict(data.features())).norm_squared();
        assert_relative_eq!(result.sure, rss + 2.0 * 1.3 * 5.0 - 1.3 * 60.0, epsilon = 1e-8);
        assert_relative_eq!(result.divergence, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn identity_smoother_variance_is_2n_sigma2() {
        assert_relative_eq!(
            sure_variance_estimate(0.0, 40.0, 1.5, 40),
            2.0 * 40.0 * 1.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn all_zero_inputs_give_zero_variance() {
        assert_relative_eq!(sure_variance_estimate(0.0, 0.0, 0.0, 10), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ols_variance_uses_idempotent_trace() {
        let data = gaussian_dataset(50, 3, 2);
        let result = sure_result(&PredictorSpec::Ols, &data, 0.7).unwrap();
        assert_relative_eq!(result.trace_h_squared, 4.0, epsilon = 1e-6);
        let model = OlsModel::fit(data.features(), data.response()).unwrap();
        let rss = (data.response() - model.predict(data.features())).norm_squared();
        assert_relative_eq!(
            result.sure_for_sure,
            4.0 * rss + 4.0 * 0.7 * 4.0 - 2.0 * 50.0 * 0.7,
            epsilon = 1e-8
        );
    }

    #[test]
    fn forest_spec_rejected() {
        let data = gaussian_dataset(30, 2, 3);
        let spec = PredictorSpec::RandomForest(ForestConfig::default());
        assert!(matches!(
            sure_anchor(&spec, &data, 1.0),
            Err(Error::DivergenceUnavailable)
        ));
    }

    #[test]
    fn sure_linear_in_sigma2() {
        let s0 = sure_estimate(10.0, 5.0, 0.0, 40);
        let s1 = sure_estimate(10.0, 5.0, 1.0, 40);
        let s2 = sure_estimate(10.0, 5.0, 2.0, 40);
        assert_relative_eq!(s2 - s1, s1 - s0, epsilon = 1e-12);
    }

    #[test]
    fn anchor_is_sure_over_n() {
        let data = gaussian_dataset(45, 3, 4);
        let result = sure_result(&PredictorSpec::Ols, &data, 1.0).unwrap();
        let anchor = sure_anchor(&PredictorSpec::Ols, &data, 1.0).unwrap();
        assert_relative_eq!(anchor, result.sure / 45.0, epsilon = 1e-12);
    }

    #[test]
    fn near_saturated_model_algebra() {
        // p + 1 parameters on p + 2 rows: RSS tiny, SURE ~ sigma2 (2(p+1) - N).
        let data = gaussian_dataset(6, 4, 5);
        let result = sure_result(&PredictorSpec::Ols, &data, 1.0).unwrap();
        let expected_floor = 2.0 * 5.0 - 6.0; // RSS >= 0 pushes SURE above this
        assert!(result.sure >= expected_floor - 1e-8);
        assert_relative_eq!(result.divergence, 5.0, epsilon = 1e-6);
    }
}
