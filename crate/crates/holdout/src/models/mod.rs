//! Trainable predictors: ordinary least squares and a bagged-tree
//! random forest, behind one interface.

mod forest;
mod ols;

pub use forest::{ForestConfig, ForestModel};
pub use ols::{leverages, HatMatrix, OlsModel};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Which predictor to train, with model-specific configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSpec {
    Ols,
    RandomForest(ForestConfig),
}

impl PredictorSpec {
    /// A forest with the default configuration and the given seed.
    pub fn default_forest(seed: u64) -> Self {
        PredictorSpec::RandomForest(ForestConfig {
            seed,
            ..ForestConfig::default()
        })
    }

    pub fn is_linear_smoother(&self) -> bool {
        matches!(self, PredictorSpec::Ols)
    }
}

/// A trained predictor; immutable and shareable after fitting.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Ols(OlsModel),
    Forest(ForestModel),
}

impl FittedModel {
    pub fn training_size(&self) -> usize {
        match self {
            FittedModel::Ols(m) => m.training_size(),
            FittedModel::Forest(m) => m.training_size(),
        }
    }

    /// Predict the response at each row of `x`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let expected = match self {
            FittedModel::Ols(m) => m.n_features(),
            FittedModel::Forest(m) => m.n_features(),
        };
        if x.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.ncols(),
            });
        }
        match self {
            FittedModel::Ols(m) => Ok(m.predict(x)),
            FittedModel::Forest(m) => Ok(m.predict(x)),
        }
    }
}

/// Train the predictor described by `spec` on `(x, y)`.
pub fn fit(spec: &PredictorSpec, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedModel> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    match spec {
        PredictorSpec::Ols => Ok(FittedModel::Ols(OlsModel::fit(x, y)?)),
        PredictorSpec::RandomForest(config) => {
            Ok(FittedModel::Forest(ForestModel::fit(x, y, config)?))
        }
    }
}

/// Hat matrix of the intercept-augmented OLS smoother on `x`.
pub fn hat_matrix(x: &DMatrix<f64>) -> Result<HatMatrix> {
    HatMatrix::from_design(x)
}
