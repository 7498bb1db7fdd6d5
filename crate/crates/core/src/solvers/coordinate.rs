//! Cyclic coordinate descent for the lasso and the elastic net.

use nalgebra::{DMatrix, DVector};

use super::{check_grid, Fit, PathFit, PathPoint, Problem, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::soft_threshold;
use crate::tree::InfluenceMatrix;

/// Minimizes `1/2 ||y - X b||^2 + l1 ||b||_1 + l2/2 ||b||^2` in place,
/// keeping `resid = y - X b` in sync. Returns (sweeps, converged).
fn descend(
    x: &DMatrix<f64>,
    col_sq: &[f64],
    l1: f64,
    l2: f64,
    beta: &mut DVector<f64>,
    resid: &mut DVector<f64>,
    settings: &SolverSettings,
) -> (usize, bool) {
    let p = x.ncols();
    let update = |j: usize, beta: &mut DVector<f64>, resid: &mut DVector<f64>| -> f64 {
        let denom = col_sq[j] + l2;
        if denom == 0.0 {
            return 0.0;
        }
        let old = beta[j];
        let col = x.column(j);
        let rho = col.dot(resid) + col_sq[j] * old;
        let new = soft_threshold(rho, l1) / denom;
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            resid.axpy(-delta, &col, 1.0);
        }
        delta.abs()
    };

    let mut sweeps = 0;
    while sweeps < settings.max_iter {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..p {
            max_change = max_change.max(update(j, beta, resid));
        }
        if max_change < settings.cd_tol {
            return (sweeps, true);
        }
        // Iterate on the active set until it settles, then re-check all.
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        while sweeps < settings.max_iter {
            sweeps += 1;
            let mut change = 0.0_f64;
            for &j in &active {
                change = change.max(update(j, beta, resid));
            }
            if change < settings.cd_tol {
                break;
            }
        }
    }
    (sweeps, false)
}

fn column_norms(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter().map(|c| c.norm_squared()).collect()
}

fn path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    l1_ratio: f64,
    settings: &SolverSettings,
) -> Result<PathFit> {
    check_grid(grid)?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but Y has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    let col_sq = column_norms(x);
    let mut beta = DVector::zeros(x.ncols());
    let mut resid = y.clone();
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let (iterations, converged) = descend(
            x,
            &col_sq,
            lambda * l1_ratio,
            lambda * (1.0 - l1_ratio),
            &mut beta,
            &mut resid,
            settings,
        );
        points.push(PathPoint {
            lambda,
            beta_hat: beta.clone(),
            iterations,
            converged,
        });
    }
    Ok(PathFit { points })
}

/// Lasso path on design `z`, warm-starting each grid point from the last.
pub fn solve_lasso_path(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<PathFit> {
    path(z, y, grid, 1.0, settings)
}

/// Total-effect penalty `||D beta||_1` through the change of variables
/// `gamma = D beta`: a lasso in `gamma` with design `X D^{-1}`, mapped back
/// by `beta = D^{-1} gamma`.
pub fn solve_total_effect_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    influence: &InfluenceMatrix,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<PathFit> {
    if influence.dim() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "influence matrix is {0}x{0}, X has {1} columns",
            influence.dim(),
            x.ncols()
        )));
    }
    let inverse = influence.inverse();
    let z = x * &inverse;
    let mut fit = solve_lasso_path(&z, y, grid, settings)?;
    for point in &mut fit.points {
        point.beta_hat = &inverse * &point.beta_hat;
    }
    Ok(fit)
}

fn check_l1_ratio(l1_ratio: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::InvalidL1Ratio(l1_ratio));
    }
    Ok(())
}

/// Elastic net path for
/// `1/2 ||Y - X beta||^2 + lambda (a ||beta||_1 + (1 - a) ||beta||^2 / 2)`.
pub fn solve_elastic_net_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    l1_ratio: f64,
    settings: &SolverSettings,
) -> Result<PathFit> {
    check_l1_ratio(l1_ratio)?;
    path(x, y, grid, l1_ratio, settings)
}

pub fn elastic_net_objective(
    problem: &Problem,
    lambda: f64,
    l1_ratio: f64,
    beta: &DVector<f64>,
) -> f64 {
    0.5 * problem.rss(beta)
        + lambda * (l1_ratio * beta.lp_norm(1) + (1.0 - l1_ratio) * beta.norm_squared() / 2.0)
}

/// Largest violation of the elastic net subgradient conditions.
pub fn elastic_net_kkt_residual(
    problem: &Problem,
    lambda: f64,
    l1_ratio: f64,
    beta: &DVector<f64>,
    active_tol: f64,
) -> f64 {
    let g = problem.correlation(beta);
    let l1 = lambda * l1_ratio;
    let l2 = lambda * (1.0 - l1_ratio);
    g.iter()
        .zip(beta.iter())
        .map(|(&gj, &bj)| {
            let h = gj - l2 * bj;
            if bj.abs() > active_tol {
                (h - l1 * bj.signum()).abs()
            } else {
                (h.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn solve_elastic_net(
    problem: &Problem,
    lambda: f64,
    l1_ratio: f64,
    settings: &SolverSettings,
) -> Result<Fit> {
    check_l1_ratio(l1_ratio)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda(lambda));
    }
    let x = problem.x();
    let col_sq = column_norms(x);
    let mut beta = DVector::zeros(problem.p());
    let mut resid = problem.y().clone();
    let (iterations, stopped) = descend(
        x,
        &col_sq,
        lambda * l1_ratio,
        lambda * (1.0 - l1_ratio),
        &mut beta,
        &mut resid,
        settings,
    );
    Ok(certify_elastic_net(
        problem, lambda, l1_ratio, beta, iterations, stopped, settings,
    ))
}

pub(crate) fn certify_elastic_net(
    problem: &Problem,
    lambda: f64,
    l1_ratio: f64,
    beta: DVector<f64>,
    iterations: usize,
    stopped: bool,
    settings: &SolverSettings,
) -> Fit {
    let kkt = elastic_net_kkt_residual(problem, lambda, l1_ratio, &beta, settings.active_tol);
    Fit {
        objective_value: elastic_net_objective(problem, lambda, l1_ratio, &beta),
        lambda,
        kkt_residual: kkt,
        iterations,
        converged: stopped && kkt <= problem.kkt_tolerance(settings),
        beta_hat: beta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inf_norm;
    use crate::solvers::{kkt_residual, lambda_grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn problem(n: usize, p: usize, seed: u64) -> Problem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        Problem::new(x, y).unwrap()
    }

    fn orthonormal(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        g.qr().q()
    }

    #[test]
    fn orthonormal_design_is_soft_thresholding() {
        let z = orthonormal(30, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = DVector::from_fn(30, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            2.0 * z
        });
        let zty = z.transpose() * &y;
        let grid = lambda_grid(inf_norm(&zty), 30, 1e-3);
        let fit = solve_lasso_path(&z, &y, &grid, &SolverSettings::default()).unwrap();
        for point in &fit.points {
            let expected = zty.map(|v| soft_threshold(v, point.lambda));
            assert!((&point.beta_hat - expected).amax() < 1e-10);
        }
    }

    #[test]
    fn lambda_max_gives_zero() {
        let prob = problem(25, 6, 2);
        let lm = inf_norm(prob.xty());
        let fit = solve_lasso_path(prob.x(), prob.y(), &[lm], &SolverSettings::default()).unwrap();
        assert_eq!(fit.points[0].beta_hat.amax(), 0.0);
    }

    #[test]
    fn full_l1_ratio_matches_lasso() {
        let prob = problem(20, 7, 3);
        let lam = 0.3 * inf_norm(prob.xty());
        let en = solve_elastic_net(&prob, lam, 1.0, &SolverSettings::default()).unwrap();
        let lasso =
            solve_lasso_path(prob.x(), prob.y(), &[lam], &SolverSettings::default()).unwrap();
        assert!((&en.beta_hat - &lasso.points[0].beta_hat).amax() < 1e-10);
        let r = kkt_residual(
            prob.x(),
            prob.y(),
            &DMatrix::identity(7, 7),
            lam,
            &en.beta_hat,
            1e-8,
        );
        assert!(r < 1e-7);
    }

    #[test]
    fn zero_l1_ratio_is_ridge() {
        let prob = problem(20, 7, 4);
        let lam = 2.5;
        let fit = solve_elastic_net(&prob, lam, 0.0, &SolverSettings::default()).unwrap();
        let ridge = (prob.gram() + DMatrix::identity(7, 7) * lam)
            .cholesky()
            .unwrap()
            .solve(prob.xty());
        assert!((&fit.beta_hat - ridge).amax() < 1e-8);
    }

    #[test]
    fn elastic_net_subgradient_conditions() {
        let prob = problem(20, 7, 5);
        let (lam, a) = (0.2 * inf_norm(prob.xty()), 0.5);
        let fit = solve_elastic_net(&prob, lam, a, &SolverSettings::default()).unwrap();
        assert!(fit.converged);
        let g = prob.correlation(&fit.beta_hat);
        for j in 0..7 {
            let h = g[j] - lam * (1.0 - a) * fit.beta_hat[j];
            assert!(h.abs() <= lam * a + 1e-8);
            if fit.beta_hat[j] != 0.0 {
                assert!((h - lam * a * fit.beta_hat[j].signum()).abs() < 1e-8);
            }
        }
        assert!(matches!(
            solve_elastic_net(&prob, lam, 1.5, &SolverSettings::default()),
            Err(Error::InvalidL1Ratio(_))
        ));
    }

    #[test]
    fn rejects_increasing_grid() {
        let prob = problem(10, 3, 6);
        assert!(matches!(
            solve_lasso_path(prob.x(), prob.y(), &[0.1, 0.2], &SolverSettings::default()),
            Err(Error::InvalidGrid)
        ));
    }
}
