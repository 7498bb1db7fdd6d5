//! Brute-force reference for `min 0.5 ||y - X b||^2 + lambda ||P b||_1` on
//! tiny problems. Every sign pattern `s` in {-1, 0, 1}^m fixes the zero rows
//! `Z`; on `{b : P_Z b = 0}` the objective with `||P b||_1` replaced by
//! `s' P b` is a smooth quadratic solved in closed form. The true optimum is
//! one of these candidates, and each candidate's true objective is an upper
//! bound, so the smallest true objective over all candidates is the optimum.
//! Shares no code with the library.

use nalgebra::{DMatrix, DVector};

pub struct OracleSolution {
    pub beta: DVector<f64>,
    pub objective: f64,
}

pub fn objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &DMatrix<f64>,
    lambda: f64,
    b: &DVector<f64>,
) -> f64 {
    0.5 * (y - x * b).norm_squared() + lambda * (p * b).abs().sum()
}

/// Orthonormal basis of `{v : m v = 0}` as columns.
fn kernel(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return DMatrix::identity(dim, dim);
    }
    // Eigen-decomposition of the Gram matrix avoids wide-matrix SVD quirks.
    let g = m.transpose() * m;
    let eig = g.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cols: Vec<DVector<f64>> = (0..dim)
        .filter(|&k| eig.eigenvalues[k].abs() <= 1e-12 * top.max(1.0))
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn solve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    pen: &DMatrix<f64>,
    lambda: f64,
) -> OracleSolution {
    let m = pen.nrows();
    let dim = pen.ncols();
    assert!(
        m <= 10,
        "oracle is exponential in the number of penalty rows"
    );
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let mut best = OracleSolution {
        beta: DVector::zeros(dim),
        objective: objective(x, y, pen, lambda, &DVector::zeros(dim)),
    };
    let total = 3usize.pow(m as u32);
    let mut signs = vec![0.0; m];
    let mut last_zero_mask = usize::MAX;
    let mut basis = DMatrix::zeros(0, 0);
    let mut hinv = DMatrix::zeros(0, 0);
    for code in 0..total {
        let mut c = code;
        let mut zero_mask = 0usize;
        for (i, s) in signs.iter_mut().enumerate() {
            *s = (c % 3) as f64 - 1.0;
            if *s == 0.0 {
                zero_mask |= 1 << i;
            }
            c /= 3;
        }
        if zero_mask != last_zero_mask {
            last_zero_mask = zero_mask;
            let rows: Vec<usize> = (0..m).filter(|i| zero_mask >> i & 1 == 1).collect();
            let pz = DMatrix::from_fn(rows.len(), dim, |r, j| pen[(rows[r], j)]);
            basis = kernel(&pz, dim);
            if basis.ncols() > 0 {
                let h = basis.transpose() * &xtx * &basis;
                hinv = h
                    .clone()
                    .try_inverse()
                    .unwrap_or_else(|| h.pseudo_inverse(1e-12).unwrap());
            }
        }
        if basis.ncols() == 0 {
            continue;
        }
        let s = DVector::from_column_slice(&signs);
        let rhs = basis.transpose() * (&xty - lambda * pen.transpose() * &s);
        let b = &basis * (&hinv * rhs);
        let f = objective(x, y, pen, lambda, &b);
        if f < best.objective {
            best = OracleSolution {
                beta: b,
                objective: f,
            };
        }
    }
    best
}
