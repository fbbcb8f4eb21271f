//! Ordinary least squares with an intercept, plus linear-smoother structure
//! (hat matrix, leverages) used by the LOOCV shortcut and SURE.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff for declaring the design rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Fitted least-squares model. Coefficients are `[intercept, b_1, ..., b_p]`.
#[derive(Debug, Clone)]
pub struct OlsModel {
    coefficients: DVector<f64>,
    training_size: usize,
}

impl OlsModel {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let a = augment_intercept(x);
        let cols = a.ncols();
        if a.nrows() < cols {
            return Err(Error::TooFewRows {
                n_rows: a.nrows(),
                n_features: x.ncols(),
                min_rows: cols,
            });
        }
        let svd = a.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > RANK_TOLERANCE * sigma_max)
            .count();
        if rank < cols {
            return Err(Error::RankDeficient { rank, cols });
        }
        let coefficients = svd
            .solve(y, RANK_TOLERANCE * sigma_max)
            .map_err(|msg| Error::InvalidArgument(msg.to_string()))?;
        Ok(Self {
            coefficients: coefficients.column(0).into_owned(),
            training_size: x.nrows(),
        })
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn training_size(&self) -> usize {
        self.training_size
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let intercept = self.coefficients[0];
        let slopes = self.coefficients.rows(1, self.coefficients.len() - 1);
        let mut out = x * slopes;
        out.add_scalar_mut(intercept);
        out
    }
}

/// Dense hat matrix `H = A (A'A)^-1 A'` of the intercept-augmented design.
///
/// Materializes the full N x N matrix; use [`leverages`] when only the
/// diagonal is needed.
#[derive(Debug, Clone)]
pub struct HatMatrix {
    matrix: DMatrix<f64>,
    n_parameters: usize,
}

impl HatMatrix {
    pub fn from_design(x: &DMatrix<f64>) -> Result<Self> {
        let q = thin_q(x)?;
        let n_parameters = q.ncols();
        Ok(Self {
            matrix: &q * q.transpose(),
            n_parameters,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Number of regression parameters (p + 1); equals trace(H) for full rank.
    pub fn n_parameters(&self) -> usize {
        self.n_parameters
    }

    /// Apply the smoother: `mu_hat = H y`.
    pub fn smooth(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.matrix * y
    }
}

/// Diagonal of the hat matrix without materializing it.
pub fn leverages(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let q = thin_q(x)?;
    Ok(DVector::from_iterator(
        q.nrows(),
        q.row_iter().map(|r| r.norm_squared()),
    ))
}

fn augment_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    a.view_mut((0, 1), (x.nrows(), x.ncols())).copy_from(x);
    a
}

/// Thin Q factor of the augmented design, with a rank check via SVD.
fn thin_q(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a = augment_intercept(x);
    let cols = a.ncols();
    if a.nrows() < cols {
        return Err(Error::TooFewRows {
            n_rows: a.nrows(),
            n_features: x.ncols(),
            min_rows: cols,
        });
    }
    let svd = a.clone().svd(true, false);
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > RANK_TOLERANCE * sigma_max)
        .count();
    if rank < cols {
        return Err(Error::RankDeficient { rank, cols });
    }
    let qr = a.qr();
    Ok(qr.q())
}
