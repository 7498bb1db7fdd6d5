//! Small dense linear-algebra helpers shared by the solvers and diagnostics.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_CUTOFF: f64 = 1e-10;

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

fn threshold(singular_values: &DVector<f64>) -> f64 {
    RANK_CUTOFF * singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let p = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(p, p);
    }
    // Pad with zero rows so the SVD exposes a full p x p right factor.
    let padded = if m.nrows() < p {
        let mut padded = DMatrix::zeros(p, p);
        padded.rows_mut(0, m.nrows()).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return DMatrix::identity(p, p);
    }
    let cut = threshold(&svd.singular_values);
    let null_rows: Vec<usize> = (0..v_t.nrows())
        .filter(|&k| svd.singular_values[k] <= cut)
        .collect();
    DMatrix::from_fn(p, null_rows.len(), |i, j| v_t[(null_rows[j], i)])
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    let cut = threshold(&sv);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Moore-Penrose pseudoinverse with the shared relative cutoff.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let cut = threshold(&svd.singular_values);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += (v_t.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

/// Solves a symmetric positive semidefinite system, falling back to the
/// minimum-norm solution when the matrix is singular.
pub fn solve_psd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = h.clone().cholesky() {
        let x = chol.solve(rhs);
        // Cholesky can succeed on nearly singular matrices; keep it only
        // when the solve is accurate.
        let resid = inf_norm(&(h * &x - rhs));
        if resid <= 1e-9 * (1.0 + inf_norm(rhs)) {
            return x;
        }
    }
    pseudo_inverse(h) * rhs
}

pub fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Sample covariance with divisor n - 1.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let centered = center_columns(x);
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    (centered.transpose() * &centered) / denom
}

pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space_basis(&m);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).amax() < 1e-12);
        assert!((n.transpose() * &n - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn null_space_of_full_rank_is_empty() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert_eq!(null_space_basis(&m).ncols(), 0);
    }

    #[test]
    fn rank_and_pinv() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(numerical_rank(&m), 1);
        let pinv = pseudo_inverse(&m);
        assert!((&m * &pinv * &m - &m).amax() < 1e-12);
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }
}
