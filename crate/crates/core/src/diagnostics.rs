//! Irrepresentability diagnostic for model-selection consistency.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, pseudo_inverse, select_rows};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrrepReport {
    pub value: f64,
    /// `1 - value`; the condition holds when positive.
    pub tau_implied: f64,
    pub support: Vec<usize>,
    pub signs: Vec<f64>,
}

impl IrrepReport {
    pub fn holds(&self) -> bool {
        self.value.is_finite() && self.tau_implied > 0.0
    }
}

/// `|| Dt_{S^c} X^T (Dt_S X^T)^+ signs ||_inf` for rows `support` of the
/// penalty matrix `Dt`. No normalization by `n` is applied. An empty
/// complement gives 0.
pub fn irrepresentability(
    x: &DMatrix<f64>,
    penalty: &DMatrix<f64>,
    support: &[usize],
    signs: &[f64],
) -> Result<IrrepReport> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if support.len() != signs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} support rows, {} signs",
            support.len(),
            signs.len()
        )));
    }
    if penalty.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "penalty has {} columns, X has {}",
            penalty.ncols(),
            x.ncols()
        )));
    }
    let m = penalty.nrows();
    if let Some(&bad) = support.iter().find(|&&i| i >= m) {
        return Err(Error::InvalidIndex {
            index: bad,
            node_count: m,
        });
    }
    if signs.iter().any(|s| s.abs() != 1.0) {
        return Err(Error::InvalidConfig("signs must be +1 or -1".into()));
    }
    let complement: Vec<usize> = (0..m).filter(|i| !support.contains(i)).collect();
    let value = if complement.is_empty() {
        0.0
    } else {
        let xt = x.transpose();
        let active = select_rows(penalty, support) * &xt;
        let inactive = select_rows(penalty, &complement) * &xt;
        let direction = pseudo_inverse(&active) * DVector::from_column_slice(signs);
        inf_norm(&(inactive * direction))
    };
    Ok(IrrepReport {
        value,
        tau_implied: 1.0 - value,
        support: support.to_vec(),
        signs: signs.to_vec(),
    })
}

/// Rows of `penalty * beta` above `tol` and their signs.
pub fn support_and_signs(
    penalty: &DMatrix<f64>,
    beta: &DVector<f64>,
    tol: f64,
) -> (Vec<usize>, Vec<f64>) {
    (penalty * beta)
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(i, v)| (i, v.signum()))
        .unzip()
}
