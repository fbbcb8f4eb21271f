//! Simulation harness: linear-DGP data generation under three noise
//! families, single-split variance-vs-bound sweeps (fixed-model and
//! full-redraw protocols), and K-fold estimator comparisons.
//!
//! All experiments fix the design matrix across repetitions and redraw only
//! noise (plus subsets/partitions), with per-repetition derived seeds so the
//! parallel reductions are deterministic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::cv::pure_loss;
use crate::dataset::{make_folds, random_split};
use crate::error::{Error, Result};
use crate::rng::RngStream;

const DESIGN_STREAM: u64 = 0x4453_474e; // "DSGN"
const NOISE_STREAM: u64 = 0x4e4f_4953; // "NOIS"
const SUBSET_STREAM: u64 = 0x5355_4253; // "SUBS"
const PARTITION_STREAM: u64 = 0x5052_5454; // "PRTT"
const TRAIN_STREAM: u64 = 0x5452_4e30; // "TRN0"
const TEST_STREAM: u64 = 0x5453_5430; // "TST0"

/// Noise family of the data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// eps_i ~ N(0, sigma2).
    Gaussian,
    /// eps_i ~ N(0, sigma2 (1 + 0.5 Z_i)), Z_i ~ U(0, 1).
    Heteroskedastic,
    /// eps_i = G_i - k theta, G_i ~ Gamma(k = 5, theta = sqrt(sigma2 / k)).
    GammaCentered,
}

impl NoiseKind {
    /// Bound constant appropriate to the family: 4 for symmetric noise,
    /// 16 for the skewed Gamma family.
    pub fn bound_constant(&self) -> f64 {
        match self {
            NoiseKind::Gaussian | NoiseKind::Heteroskedastic => 4.0,
            NoiseKind::GammaCentered => 16.0,
        }
    }

    /// Worst-case per-observation variance, for the heteroskedastic bound.
    pub fn sigma2_max(&self, sigma2: f64) -> f64 {
        match self {
            NoiseKind::Heteroskedastic => 1.5 * sigma2,
            _ => sigma2,
        }
    }
}

/// Linear data-generating process: X_ij ~ N(0,1), f* = X beta, y = f* + eps.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DgpConfig {
    pub n_rows: usize,
    pub n_features: usize,
    /// Regression coefficients; defaults to (0.1, 1.2, 0.8, 0, ..., 0).
    pub beta: Vec<f64>,
    pub noise_kind: NoiseKind,
    pub sigma2: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// Desk-scale defaults: N = 400, p = 10, sigma2 = 1.
    pub fn desk_scale(noise_kind: NoiseKind, seed: u64) -> Self {
        Self {
            n_rows: 400,
            n_features: 10,
            beta: default_beta(10),
            noise_kind,
            sigma2: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: self.beta.len(),
            });
        }
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidArgument(
                "sigma2 must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// The default sparse coefficient vector padded with zeros.
pub fn default_beta(p: usize) -> Vec<f64> {
    let mut beta = vec![0.0; p];
    for (slot, value) in beta.iter_mut().zip([0.1, 1.2, 0.8]) {
        *slot = value;
    }
    beta
}

/// One draw of the DGP.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub x: DMatrix<f64>,
    pub f_true: DVector<f64>,
    pub y: DVector<f64>,
    pub eps: DVector<f64>,
}

/// Sample `n` noise values of the configured family.
fn draw_noise(kind: NoiseKind, sigma2: f64, n: usize, rng: &mut RngStream) -> DVector<f64> {
    use rand_distr::{Distribution, Gamma, StandardNormal};
    if sigma2 == 0.0 {
        // Noiseless ablation; Gamma(k, 0) is undefined, so short-circuit.
        return DVector::zeros(n);
    }
    match kind {
        NoiseKind::Gaussian => {
            let sd = sigma2.sqrt();
            DVector::from_fn(n, |_, _| {
                sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            })
        }
        NoiseKind::Heteroskedastic => DVector::from_fn(n, |_, _| {
            let z: f64 = rng.random();
            let sd = (sigma2 * (1.0 + 0.5 * z)).sqrt();
            sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        }),
        NoiseKind::GammaCentered => {
            let shape = 5.0;
            let theta = (sigma2 / shape).sqrt();
            let gamma = Gamma::new(shape, theta).expect("valid gamma parameters");
            DVector::from_fn(n, |_, _| gamma.sample(rng) - shape * theta)
        }
    }
}

/// Draw a full dataset: standard-normal design, linear signal, chosen noise.
pub fn generate(config: &DgpConfig, rng: &mut RngStream) -> Result<GeneratedData> {
    use rand_distr::{Distribution, StandardNormal};
    config.validate()?;
    let x = DMatrix::from_fn(config.n_rows, config.n_features, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    let beta = DVector::from_column_slice(&config.beta);
    let f_true = &x * beta;
    let eps = draw_noise(config.noise_kind, config.sigma2, config.n_rows, rng);
    let y = &f_true + &eps;
    Ok(GeneratedData { x, f_true, y, eps })
}

/// OLS through precomputed normal equations with row downdating: fitting on
/// "all rows except a small test set" costs O(N p + m p^2 + p^3) instead of a
/// fresh decomposition, which makes 10^5-repetition sweeps tractable.
struct FastOls {
    /// Intercept-augmented rows a_i.
    rows: Vec<DVector<f64>>,
    /// A' A over all rows.
    ata: DMatrix<f64>,
    p1: usize,
}

impl FastOls {
    fn new(x: &DMatrix<f64>) -> Self {
        let p1 = x.ncols() + 1;
        let rows: Vec<DVector<f64>> = (0..x.nrows())
            .map(|i| {
                DVector::from_iterator(p1, std::iter::once(1.0).chain(x.row(i).iter().copied()))
            })
            .collect();
        let mut ata = DMatrix::zeros(p1, p1);
        for a in &rows {
            ata.syger(1.0, a, a, 1.0);
        }
        Self { rows, ata, p1 }
    }

    /// Coefficients of OLS fitted on all rows except `exclude`.
    fn fit_excluding(&self, y: &DVector<f64>, exclude: &[usize]) -> Result<DVector<f64>> {
        let mut ata = self.ata.clone();
        for &i in exclude {
            ata.syger(-1.0, &self.rows[i], &self.rows[i], 1.0);
        }
        // syger fills only the lower triangle; mirror it before factoring.
        for r in 0..self.p1 {
            for c in r + 1..self.p1 {
                ata[(r, c)] = ata[(c, r)];
            }
        }
        let mut excluded = vec![false; self.rows.len()];
        for &i in exclude {
            excluded[i] = true;
        }
        let mut aty = DVector::zeros(self.p1);
        for (i, a) in self.rows.iter().enumerate() {
            if !excluded[i] {
                aty.axpy(y[i], a, 1.0);
            }
        }
        let chol = ata
            .cholesky()
            .ok_or(Error::RankDeficient {
                rank: 0,
                cols: self.p1,
            })?;
        Ok(chol.solve(&aty))
    }

    fn predict_row(&self, coef: &DVector<f64>, i: usize) -> f64 {
        self.rows[i].dot(coef)
    }
}

/// Sample variance with divisor R - 1.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
}

/// Monte-Carlo standard error of the sample variance, via the fourth-moment
/// delta method: se^2 = (m4 - s^4 (R-3)/(R-1)) / R.
pub fn variance_mc_se(xs: &[f64]) -> f64 {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let s2 = sample_variance(xs);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
    ((m4 - s2 * s2 * (r - 3.0) / (r - 1.0)) / r).max(0.0).sqrt()
}

/// Per-m results of a single-split variance experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitVarianceRow {
    pub m: usize,
    pub repetitions: usize,
    /// Var over repetitions of the pure loss.
    pub empirical_variance: f64,
    /// MC standard error of `empirical_variance`.
    pub variance_mc_se: f64,
    pub mean_pure_loss: f64,
    /// `C sigma2_eff mean_pure_loss / m` with C per the noise family.
    pub bound: f64,
    pub ratio_bound_over_empirical: f64,
    /// Exact conditional variance `sum_j 4 Delta_j^2 sigma_j^2 / m^2`;
    /// only available under the fixed-model protocol.
    pub exact_variance: Option<f64>,
}

/// Which single-split protocol produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProtocol {
    /// Redraw noise, refit the model, fresh random test subset per repetition.
    FullRedraw,
    /// One trained model and fixed test covariates; only test noise redraws.
    FixedModel,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitVarianceReport {
    pub config: DgpConfig,
    pub protocol: SplitProtocol,
    pub bound_constant: f64,
    pub sigma2_eff: f64,
    pub rows: Vec<SplitVarianceRow>,
}

/// Full-redraw single-split experiment (refit per repetition): per m, redraw
/// noise, pick a fresh random test subset, refit OLS on the complement, and
/// record the pure loss on the test side.
pub fn run_split_experiment(
    config: &DgpConfig,
    m_grid: &[usize],
    repetitions: usize,
    rng: &RngStream,
) -> Result<SplitVarianceReport> {
    config.validate()?;
    if repetitions < 2 {
        return Err(Error::InvalidArgument("need at least 2 repetitions".into()));
    }
    let max_m = m_grid.iter().copied().max().unwrap_or(0);
    if max_m > config.n_rows - config.n_features - 1 {
        return Err(Error::HoldOutSizeOutOfRange {
            m: max_m,
            max: config.n_rows - config.n_features - 1,
        });
    }
    use rand_distr::{Distribution, StandardNormal};
    let mut design_rng = rng.derive(DESIGN_STREAM);
    let x = DMatrix::from_fn(config.n_rows, config.n_features, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut design_rng)
    });
    let beta = DVector::from_column_slice(&config.beta);
    let f_true = &x * beta;
    let fast = FastOls::new(&x);

    let mut rows = Vec::with_capacity(m_grid.len());
    for (mi, &m) in m_grid.iter().enumerate() {
        let losses: Vec<f64> = (0..repetitions)
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let mut rep_rng = rng.derive_indexed(NOISE_STREAM + mi as u64, rep as u64);
                let eps = draw_noise(config.noise_kind, config.sigma2, config.n_rows, &mut rep_rng);
                let y = &f_true + &eps;
                let mut subset_rng = rng
                    .derive(SUBSET_STREAM + mi as u64)
                    .derive_indexed(SUBSET_STREAM, rep as u64);
                let split = random_split(config.n_rows, m, &mut subset_rng)?;
                let coef = fast.fit_excluding(&y, &split.test_indices)?;
                let preds = DVector::from_iterator(
                    m,
                    split.test_indices.iter().map(|&i| fast.predict_row(&coef, i)),
                );
                let f_test =
                    DVector::from_iterator(m, split.test_indices.iter().map(|&i| f_true[i]));
                let y_test = DVector::from_iterator(m, split.test_indices.iter().map(|&i| y[i]));
                pure_loss(&preds, &f_test, &y_test)
            })
            .collect::<Result<_>>()?;
        rows.push(split_row(config, m, &losses, None));
    }
    Ok(SplitVarianceReport {
        config: config.clone(),
        protocol: SplitProtocol::FullRedraw,
        bound_constant: config.noise_kind.bound_constant(),
        sigma2_eff: config.noise_kind.sigma2_max(config.sigma2),
        rows,
    })
}

/// Fixed-model single-split experiment: train one OLS model on `n_rows`
/// noisy rows, fix fresh test covariates per m, and redraw only the test
/// noise each repetition. This is the regime where the bound is exact, and
/// the exact conditional variance is reported alongside.
pub fn run_fixed_model_experiment(
    config: &DgpConfig,
    m_grid: &[usize],
    repetitions: usize,
    rng: &RngStream,
) -> Result<SplitVarianceReport> {
    config.validate()?;
    if repetitions < 2 {
        return Err(Error::InvalidArgument("need at least 2 repetitions".into()));
    }
    use rand_distr::{Distribution, StandardNormal};

    // Train once on a fresh draw of the DGP.
    let mut train_rng = rng.derive(TRAIN_STREAM);
    let train = generate(config, &mut train_rng)?;
    let model = crate::models::OlsModel::fit(&train.x, &train.y)?;
    let beta = DVector::from_column_slice(&config.beta);

    let mut rows = Vec::with_capacity(m_grid.len());
    for (mi, &m) in m_grid.iter().enumerate() {
        // Fixed test covariates and (for heteroskedastic noise) a fixed
        // per-point variance profile.
        let mut test_rng = rng.derive(TEST_STREAM + mi as u64);
        let x_test = DMatrix::from_fn(m, config.n_features, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut test_rng)
        });
        let f_test = &x_test * &beta;
        let delta = model.predict(&x_test) - &f_test;
        let sigma2_point: Vec<f64> = match config.noise_kind {
            NoiseKind::Heteroskedastic => (0..m)
                .map(|_| {
                    let z: f64 = test_rng.random();
                    config.sigma2 * (1.0 + 0.5 * z)
                })
                .collect(),
            _ => vec![config.sigma2; m],
        };
        // Var(pure loss | model, covariates): the noise enters linearly, so
        // the conditional variance is sum 4 Delta_j^2 sigma_j^2 / m^2 for
        // every zero-mean family.
        let exact_variance = delta
            .iter()
            .zip(&sigma2_point)
            .map(|(d, s2)| 4.0 * d * d * s2)
            .sum::<f64>()
            / (m * m) as f64;

        let losses: Vec<f64> = (0..repetitions)
            .into_par_iter()
            .map(|rep| {
                let mut rep_rng = rng.derive_indexed(NOISE_STREAM + mi as u64, rep as u64);
                let eps: Vec<f64> = match config.noise_kind {
                    NoiseKind::Heteroskedastic => sigma2_point
                        .iter()
                        .map(|&s2| {
                            s2.sqrt()
                                * <StandardNormal as Distribution<f64>>::sample(
                                    &StandardNormal,
                                    &mut rep_rng,
                                )
                        })
                        .collect(),
                    _ => draw_noise(config.noise_kind, config.sigma2, m, &mut rep_rng)
                        .iter()
                        .copied()
                        .collect(),
                };
                // Pure loss = (1/m) sum (Delta_j^2 - 2 Delta_j eps_j).
                delta
                    .iter()
                    .zip(&eps)
                    .map(|(d, e)| d * d - 2.0 * d * e)
                    .sum::<f64>()
                    / m as f64
            })
            .collect();
        rows.push(split_row(config, m, &losses, Some(exact_variance)));
    }
    Ok(SplitVarianceReport {
        config: config.clone(),
        protocol: SplitProtocol::FixedModel,
        bound_constant: config.noise_kind.bound_constant(),
        sigma2_eff: config.noise_kind.sigma2_max(config.sigma2),
        rows,
    })
}

fn split_row(
    config: &DgpConfig,
    m: usize,
    losses: &[f64],
    exact_variance: Option<f64>,
) -> SplitVarianceRow {
    let empirical_variance = sample_variance(losses);
    let mean_pure_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    let bound = config.noise_kind.bound_constant()
        * config.noise_kind.sigma2_max(config.sigma2)
        * mean_pure_loss
        / m as f64;
    SplitVarianceRow {
        m,
        repetitions: losses.len(),
        empirical_variance,
        variance_mc_se: variance_mc_se(losses),
        mean_pure_loss,
        bound,
        ratio_bound_over_empirical: bound / empirical_variance,
        exact_variance,
    }
}

/// Per-K results of the K-fold estimator comparison.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KfoldVarianceRow {
    pub k: usize,
    /// floor(N / K), the nominal fold size used in the bounds.
    pub m: usize,
    pub repetitions: usize,
    /// Var over (noise, partition) redraws of the fold-averaged oracle loss
    /// `(1/m) sum (f_hat - f*)^2`.
    pub true_mc_variance_oracle: f64,
    /// Var over redraws of the fold-averaged pure loss; the quantity the
    /// variance bound addresses.
    pub true_mc_variance_pure: f64,
    pub pure_variance_mc_se: f64,
    /// Var across partition redraws at fixed y of the practical K-fold loss.
    pub nested_cv_variance: f64,
    /// Var over folds of the practical losses divided by K, single run.
    pub clt_plugin_variance: f64,
    pub mean_pure_loss: f64,
    /// Single-split bounds `C sigma2 E / m`.
    pub bound_raw_c4: f64,
    pub bound_raw_c16: f64,
    /// CLT-scaled bounds `C sigma2 E / (m K)`.
    pub bound_clt_c4: f64,
    pub bound_clt_c16: f64,
    /// Var over repetitions of the pure fold-average (same as
    /// `true_mc_variance_pure`) vs the max single-fold variance, for the
    /// fold-averaging lemma.
    pub max_single_fold_variance_pure: f64,
    pub max_single_fold_variance_mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KfoldVarianceReport {
    pub config: DgpConfig,
    pub partitions_per_y: usize,
    pub rows: Vec<KfoldVarianceRow>,
}

/// K-fold estimator comparison: true MC variance from fresh (noise,
/// partition) per repetition, nested-CV variance from a fixed y, the CLT
/// plug-in from a single run, and the bound scalings.
pub fn run_kfold_experiment(
    config: &DgpConfig,
    k_grid: &[usize],
    repetitions: usize,
    partitions_per_y: usize,
    rng: &RngStream,
) -> Result<KfoldVarianceReport> {
    config.validate()?;
    if repetitions < 2 || partitions_per_y < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 repetitions and 2 partitions per y".into(),
        ));
    }
    use rand_distr::{Distribution, StandardNormal};
    let mut design_rng = rng.derive(DESIGN_STREAM);
    let x = DMatrix::from_fn(config.n_rows, config.n_features, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut design_rng)
    });
    let beta = DVector::from_column_slice(&config.beta);
    let f_true = &x * beta;
    let fast = FastOls::new(&x);

    struct RepLosses {
        practical_folds: Vec<f64>,
        pure_folds: Vec<f64>,
        oracle_folds: Vec<f64>,
    }

    let kfold_pass = |y: &DVector<f64>, k: usize, part_rng: &mut RngStream| -> Result<RepLosses> {
        let plan = make_folds(config.n_rows, k, part_rng)?;
        let mut practical_folds = Vec::with_capacity(k);
        let mut pure_folds = Vec::with_capacity(k);
        let mut oracle_folds = Vec::with_capacity(k);
        for fold in 0..k {
            let split = plan.split(fold);
            let coef = fast.fit_excluding(y, &split.test_indices)?;
            let m_fold = split.test_indices.len() as f64;
            let mut practical = 0.0;
            let mut pure = 0.0;
            let mut oracle = 0.0;
            for &i in &split.test_indices {
                let pred = fast.predict_row(&coef, i);
                let err = pred - y[i];
                let delta = pred - f_true[i];
                let eps = y[i] - f_true[i];
                practical += err * err;
                pure += err * err - eps * eps;
                oracle += delta * delta;
            }
            practical_folds.push(practical / m_fold);
            pure_folds.push(pure / m_fold);
            oracle_folds.push(oracle / m_fold);
        }
        Ok(RepLosses {
            practical_folds,
            pure_folds,
            oracle_folds,
        })
    };

    let mut rows = Vec::with_capacity(k_grid.len());
    for (ki, &k) in k_grid.iter().enumerate() {
        if k < 2 || k > config.n_rows {
            return Err(Error::FoldCountOutOfRange {
                k,
                max: config.n_rows,
            });
        }
        let reps: Vec<RepLosses> = (0..repetitions)
            .into_par_iter()
            .map(|rep| {
                let mut noise_rng = rng.derive_indexed(NOISE_STREAM + ki as u64, rep as u64);
                let eps = draw_noise(config.noise_kind, config.sigma2, config.n_rows, &mut noise_rng);
                let y = &f_true + &eps;
                let mut part_rng = rng.derive_indexed(PARTITION_STREAM + ki as u64, rep as u64);
                kfold_pass(&y, k, &mut part_rng)
            })
            .collect::<Result<_>>()?;

        let mean =
            |folds: fn(&RepLosses) -> &Vec<f64>, rep: &RepLosses| -> f64 {
                folds(rep).iter().sum::<f64>() / folds(rep).len() as f64
            };
        let oracle_means: Vec<f64> =
            reps.iter().map(|r| mean(|r| &r.oracle_folds, r)).collect();
        let pure_means: Vec<f64> = reps.iter().map(|r| mean(|r| &r.pure_folds, r)).collect();
        let mean_pure_loss = pure_means.iter().sum::<f64>() / pure_means.len() as f64;

        // Fold-averaging lemma ingredients: variance of each fold index's
        // pure loss across repetitions.
        let mut max_single_fold_variance_pure = f64::NEG_INFINITY;
        let mut max_single_fold_variance_mc_se = 0.0;
        for fold in 0..k {
            let series: Vec<f64> = reps.iter().map(|r| r.pure_folds[fold]).collect();
            let v = sample_variance(&series);
            if v > max_single_fold_variance_pure {
                max_single_fold_variance_pure = v;
                max_single_fold_variance_mc_se = variance_mc_se(&series);
            }
        }

        // Nested-CV variance: fix the first repetition's y, redraw partitions.
        let mut nested_noise_rng = rng.derive_indexed(NOISE_STREAM + ki as u64, 0);
        let eps0 = draw_noise(
            config.noise_kind,
            config.sigma2,
            config.n_rows,
            &mut nested_noise_rng,
        );
        let y0 = &f_true + &eps0;
        let nested_means: Vec<f64> = (0..partitions_per_y)
            .into_par_iter()
            .map(|part| {
                let mut part_rng =
                    rng.derive(PARTITION_STREAM + ki as u64).derive_indexed(TRAIN_STREAM, part as u64);
                let losses = kfold_pass(&y0, k, &mut part_rng)?;
                Ok(losses.practical_folds.iter().sum::<f64>() / k as f64)
            })
            .collect::<Result<_>>()?;
        let nested_cv_variance = sample_variance(&nested_means);

        // CLT plug-in from the first repetition's single run.
        let clt_plugin_variance = clt_plugin(&reps[0].practical_folds)?;

        let m = config.n_rows / k;
        let base = config.sigma2 * mean_pure_loss / m as f64;
        rows.push(KfoldVarianceRow {
            k,
            m,
            repetitions,
            true_mc_variance_oracle: sample_variance(&oracle_means),
            true_mc_variance_pure: sample_variance(&pure_means),
            pure_variance_mc_se: variance_mc_se(&pure_means),
            nested_cv_variance,
            clt_plugin_variance,
            mean_pure_loss,
            bound_raw_c4: 4.0 * base,
            bound_raw_c16: 16.0 * base,
            bound_clt_c4: 4.0 * base / k as f64,
            bound_clt_c16: 16.0 * base / k as f64,
            max_single_fold_variance_pure,
            max_single_fold_variance_mc_se,
        });
    }
    Ok(KfoldVarianceReport {
        config: config.clone(),
        partitions_per_y,
        rows,
    })
}

/// Variance across partition redraws (fixed data) of the practical K-fold
/// loss of an OLS model.
pub fn nested_cv_variance(
    data: &crate::dataset::Dataset,
    spec: &crate::models::PredictorSpec,
    k: usize,
    partitions: usize,
    rng: &RngStream,
) -> Result<f64> {
    if partitions < 2 {
        return Err(Error::InvalidArgument("need at least 2 partitions".into()));
    }
    let means: Vec<f64> = (0..partitions)
        .into_par_iter()
        .map(|part| {
            let mut part_rng = rng.derive_indexed(PARTITION_STREAM, part as u64);
            crate::cv::kfold_mse(spec, data, k, &mut part_rng)
        })
        .collect::<Result<_>>()?;
    Ok(sample_variance(&means))
}

/// CLT plug-in estimator: unbiased sample variance of fold losses over K.
pub fn clt_plugin(fold_losses: &[f64]) -> Result<f64> {
    if fold_losses.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 fold losses".into(),
        ));
    }
    Ok(sample_variance(fold_losses) / fold_losses.len() as f64)
}
