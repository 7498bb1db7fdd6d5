//! Subgradient optimality certificates and the lambda_max anchor.
//!
//! `beta` minimizes `1/2 ||Y - X beta||^2 + lambda ||P beta||_1` iff
//! `X^T (Y - X beta) = lambda P^T u` for some `u` with `||u||_inf <= 1` and
//! `u_i = sign((P beta)_i)` on the active rows. Both quantities below are
//! small linear programs over `u`.

use microlp::{ComparisonOp, OptimizationDirection, Problem as Lp};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, pseudo_inverse, select_rows};

/// Smallest achievable `||X^T (Y - X beta) - lambda P^T u||_inf` over
/// admissible subgradients `u`. Zero at an exact optimum.
pub fn kkt_residual(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &DMatrix<f64>,
    lambda: f64,
    beta: &DVector<f64>,
    active_tol: f64,
) -> f64 {
    let gradient = x.transpose() * (y - x * beta);
    kkt_residual_from_gradient(&gradient, penalty, lambda, beta, active_tol)
}

pub(crate) fn kkt_residual_from_gradient(
    gradient: &DVector<f64>,
    penalty: &DMatrix<f64>,
    lambda: f64,
    beta: &DVector<f64>,
    active_tol: f64,
) -> f64 {
    if lambda == 0.0 {
        return inf_norm(gradient);
    }
    let fitted = penalty * beta;
    let mut target = gradient.clone();
    let mut inactive = Vec::new();
    for (i, &v) in fitted.iter().enumerate() {
        if v.abs() > active_tol {
            target.axpy(-lambda * v.signum(), &penalty.row(i).transpose(), 1.0);
        } else {
            inactive.push(i);
        }
    }
    if inactive.is_empty() {
        return inf_norm(&target);
    }
    // What remains must equal lambda * P_I^T u_I with |u_I| <= 1.
    let basis = select_rows(penalty, &inactive).transpose();
    let scaled = &target / lambda;

    let least_squares = {
        let mut u = pseudo_inverse(&basis) * &scaled;
        let feasible = inf_norm(&u) <= 1.0;
        u.apply(|v| *v = v.clamp(-1.0, 1.0));
        let r = inf_norm(&(&target - (&basis * &u) * lambda));
        (r, feasible)
    };
    let scale = 1.0 + inf_norm(gradient);
    if least_squares.1 && least_squares.0 <= 1e-10 * scale {
        return least_squares.0;
    }
    match box_constrained_fit(&basis, &scaled) {
        Some(u) => {
            let r = inf_norm(&(&target - (&basis * &u) * lambda));
            r.min(least_squares.0)
        }
        None => least_squares.0,
    }
}

/// Solves `min_u ||b - M u||_inf` subject to `|u| <= 1`.
fn box_constrained_fit(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let u: Vec<_> = (0..m.ncols())
        .map(|_| lp.add_var(0.0, (-1.0, 1.0)))
        .collect();
    for j in 0..m.nrows() {
        let mut terms: Vec<_> = u
            .iter()
            .enumerate()
            .filter(|(k, _)| m[(j, *k)] != 0.0)
            .map(|(k, &var)| (var, m[(j, k)]))
            .collect();
        // b_j - M_j u <= t  and  M_j u - b_j <= t.
        terms.push((t, 1.0));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, b[j]);
        let last = terms.len() - 1;
        terms[last].1 = -1.0;
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, b[j]);
    }
    let solution = lp.solve().ok()?.into_solution().ok()?;
    Some(DVector::from_iterator(
        u.len(),
        u.iter().map(|&v| solution.var_value(v).clamp(-1.0, 1.0)),
    ))
}

/// Smallest lambda at which `beta = 0` is optimal:
/// `min { ||u||_inf : P^T u = X^T Y }`.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>, penalty: &DMatrix<f64>) -> Result<f64> {
    let c = x.transpose() * y;
    lambda_max_for(&c, penalty)
}

pub(crate) fn lambda_max_for(c: &DVector<f64>, penalty: &DMatrix<f64>) -> Result<f64> {
    if penalty.ncols() != c.len() {
        return Err(Error::DimensionMismatch(format!(
            "penalty has {} columns, X has {}",
            penalty.ncols(),
            c.len()
        )));
    }
    if inf_norm(c) == 0.0 {
        return Ok(0.0);
    }
    if penalty.is_square() {
        if let Some(u) = penalty.transpose().lu().solve(c) {
            if inf_norm(&(penalty.transpose() * &u - c)) <= 1e-9 * (1.0 + inf_norm(c)) {
                return Ok(inf_norm(&u));
            }
        }
    }
    match min_inf_norm_solution(penalty, c) {
        Some(u) if inf_norm(&(penalty.transpose() * &u - c)) <= 1e-9 * (1.0 + inf_norm(c)) => {
            Ok(inf_norm(&u))
        }
        _ => lambda_max_least_squares_for(c, penalty),
    }
}

/// Upper bound on lambda_max from the minimum-norm solution of
/// `P^T u = X^T Y`; still valid (beta = 0 is optimal above it) because the
/// solution is feasible.
pub fn lambda_max_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &DMatrix<f64>,
) -> Result<f64> {
    lambda_max_least_squares_for(&(x.transpose() * y), penalty)
}

fn lambda_max_least_squares_for(c: &DVector<f64>, penalty: &DMatrix<f64>) -> Result<f64> {
    let pt = penalty.transpose();
    let u = pseudo_inverse(&pt) * c;
    if inf_norm(&(&pt * &u - c)) > 1e-8 * (1.0 + inf_norm(c)) {
        return Err(Error::InfeasibleSystem);
    }
    Ok(inf_norm(&u))
}

fn min_inf_norm_solution(penalty: &DMatrix<f64>, c: &DVector<f64>) -> Option<DVector<f64>> {
    let m = penalty.nrows();
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let u: Vec<_> = (0..m)
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for j in 0..penalty.ncols() {
        let terms: Vec<_> = (0..m)
            .filter(|&i| penalty[(i, j)] != 0.0)
            .map(|i| (u[i], penalty[(i, j)]))
            .collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, c[j]);
    }
    for &ui in &u {
        lp.add_constraint(&[(ui, 1.0), (t, -1.0)], ComparisonOp::Le, 0.0);
        lp.add_constraint(&[(ui, 1.0), (t, 1.0)], ComparisonOp::Ge, 0.0);
    }
    let solution = lp.solve().ok()?.into_solution().ok()?;
    let u = DVector::from_iterator(m, u.iter().map(|&v| solution.var_value(v)));
    // Simplex output carries rounding; project back onto the equality set.
    let pt = penalty.transpose();
    let correction = pseudo_inverse(&pt) * (c - &pt * &u);
    Some(u + correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::stack_penalty;
    use crate::tree::make_binary_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        (x, y)
    }

    #[test]
    fn identity_penalty_lambda_max_is_max_correlation() {
        let (x, y) = random(20, 5, 1);
        let lm = lambda_max(&x, &y, &DMatrix::identity(5, 5)).unwrap();
        assert!((lm - inf_norm(&(x.transpose() * &y))).abs() < 1e-12);
    }

    #[test]
    fn square_influence_lambda_max() {
        let (x, y) = random(30, 7, 2);
        let d = make_binary_tree(3, 1.0).unwrap().influence();
        let lm = lambda_max(&x, &y, d.as_matrix()).unwrap();
        let direct = d
            .as_matrix()
            .transpose()
            .lu()
            .solve(&(x.transpose() * &y))
            .unwrap();
        assert!((lm - inf_norm(&direct)).abs() < 1e-12);
    }

    #[test]
    fn stacked_lambda_max_between_bounds() {
        let (x, y) = random(30, 7, 3);
        let d = make_binary_tree(3, 1.0).unwrap().influence();
        let pen = stack_penalty(&d, 0.5).unwrap();
        let exact = lambda_max(&x, &y, pen.matrix()).unwrap();
        let bound = lambda_max_least_squares(&x, &y, pen.matrix()).unwrap();
        assert!(exact <= bound + 1e-12);
        // Exact value is no larger than either block alone can certify.
        let only_d = lambda_max(&x, &y, d.as_matrix()).unwrap();
        assert!(exact <= only_d + 1e-10);
    }

    #[test]
    fn zero_lambda_residual_is_gradient_norm() {
        let (x, y) = random(15, 3, 4);
        let beta = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let g = x.transpose() * (&y - &x * &beta);
        let r = kkt_residual(&x, &y, &DMatrix::identity(3, 3), 0.0, &beta, 1e-8);
        assert!((r - inf_norm(&g)).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_below_lambda_max_has_positive_residual() {
        let (x, y) = random(25, 7, 5);
        let d = make_binary_tree(3, 1.0).unwrap().influence();
        let pen = stack_penalty(&d, 1.0).unwrap();
        let lm = lambda_max(&x, &y, pen.matrix()).unwrap();
        let zero = DVector::zeros(7);
        let above = kkt_residual(&x, &y, pen.matrix(), lm * 1.0001, &zero, 1e-8);
        assert!(above < 1e-8, "above lambda_max residual {above}");
        let below = kkt_residual(&x, &y, pen.matrix(), lm * 0.99, &zero, 1e-8);
        assert!(below > 1e-6, "below lambda_max residual {below}");
    }
}
