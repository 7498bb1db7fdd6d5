use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{null_space_basis, numerical_rank, select_columns, select_rows};

/// Degrees of freedom of a generalized lasso fit: the dimension of
/// `X * null(P_{-A})`, where `P_{-A}` keeps the rows of the penalty matrix
/// on which `P beta` vanishes.
pub fn degrees_of_freedom(
    x: &DMatrix<f64>,
    penalty: &DMatrix<f64>,
    beta: &DVector<f64>,
    tol: f64,
) -> usize {
    let fitted = penalty * beta;
    let inactive: Vec<usize> = (0..fitted.len())
        .filter(|&i| fitted[i].abs() <= tol)
        .collect();
    let basis = null_space_basis(&select_rows(penalty, &inactive));
    if basis.ncols() == 0 {
        return 0;
    }
    numerical_rank(&(x * basis))
}

/// Elastic net degrees of freedom
/// `tr(X_A (X_A^T X_A + lambda (1 - a) I)^{-1} X_A^T)` over the active set.
pub fn elastic_net_df(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    lambda: f64,
    l1_ratio: f64,
    tol: f64,
) -> f64 {
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j].abs() > tol).collect();
    if active.is_empty() {
        return 0.0;
    }
    let ridge = lambda * (1.0 - l1_ratio);
    let sv = select_columns(x, &active).singular_values();
    sv.iter()
        .map(|&s| {
            let s2 = s * s;
            if s2 + ridge > 0.0 {
                s2 / (s2 + ridge)
            } else {
                0.0
            }
        })
        .sum()
}

/// `Cp = rss - n sigma^2 + 2 sigma^2 df`.
pub fn cp(rss: f64, n: usize, sigma2: f64, df: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::NonpositiveSigma(sigma2));
    }
    Ok(rss - n as f64 * sigma2 + 2.0 * sigma2 * df)
}
