use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::degrees_of_freedom;
use crate::error::{Error, Result};
use crate::linalg::{inf_norm, select_rows, solve_psd};
use crate::solvers::{
    lambda_grid, lambda_max, solve_lasso_path, stack_penalty, AdmmSolver, PathFit, Problem,
    SolverSettings, StackedPenalty,
};
use crate::tree::InfluenceMatrix;

const CV_FOLDS: usize = 10;
const CV_GRID_POINTS: usize = 30;
const CV_MIN_RATIO: f64 = 1e-3;
/// Mixing weight of the combined penalty used for the refit estimator.
const REFIT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    Known,
    OrdinaryLeastSquares,
    CrossValidatedRefit,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaEstimate {
    pub sigma2: f64,
    pub method: SigmaMethod,
    pub warning: Option<String>,
}

/// Noise variance for Cp. A known value passes through; with `n > p + 1`
/// the OLS residual variance `rss / (n - p)` is used; otherwise a penalized
/// fit is tuned by 10-fold cross-validation and `rss / (n - df)` of its
/// refit is returned. The refit uses the combined penalty (alpha = 1) when
/// an influence matrix is given, the lasso otherwise.
pub fn estimate_sigma(
    problem: &Problem,
    influence: Option<&InfluenceMatrix>,
    known: Option<f64>,
    seed: u64,
    settings: &SolverSettings,
) -> Result<SigmaEstimate> {
    if let Some(s2) = known {
        if !(s2 > 0.0) || !s2.is_finite() {
            return Err(Error::NonpositiveSigma(s2));
        }
        return Ok(SigmaEstimate {
            sigma2: s2,
            method: SigmaMethod::Known,
            warning: None,
        });
    }
    let (n, p) = (problem.n(), problem.p());
    if n > p + 1 {
        let beta = solve_psd(problem.gram(), problem.xty());
        let rss = problem.rss(&beta);
        let sigma2 = rss / (n - p) as f64;
        let warning = (sigma2 <= 1e-14 * (1.0 + problem.y().norm_squared())).then(|| {
            "residual sum of squares is zero; noise variance estimate is degenerate".to_string()
        });
        return Ok(SigmaEstimate {
            sigma2,
            method: SigmaMethod::OrdinaryLeastSquares,
            warning,
        });
    }
    cross_validated_refit(problem, influence, seed, settings)
}

fn penalty_for(influence: Option<&InfluenceMatrix>, p: usize) -> Result<StackedPenalty> {
    match influence {
        Some(d) => stack_penalty(d, REFIT_ALPHA),
        None => Ok(StackedPenalty::identity(p)),
    }
}

fn fit_path(
    problem: &Problem,
    penalty: &StackedPenalty,
    tree: bool,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<PathFit> {
    if tree {
        Ok(PathFit::from(
            AdmmSolver::new(problem, penalty, *settings)?.solve_path(grid)?,
        ))
    } else {
        solve_lasso_path(problem.x(), problem.y(), grid, settings)
    }
}

fn cross_validated_refit(
    problem: &Problem,
    influence: Option<&InfluenceMatrix>,
    seed: u64,
    settings: &SolverSettings,
) -> Result<SigmaEstimate> {
    let (n, p) = (problem.n(), problem.p());
    let penalty = penalty_for(influence, p)?;
    let tree = influence.is_some();
    let lmax = lambda_max(problem.x(), problem.y(), penalty.matrix())?;
    if lmax == 0.0 {
        return Err(Error::DegenerateResidual);
    }
    let grid = lambda_grid(lmax, CV_GRID_POINTS, CV_MIN_RATIO);

    let folds = CV_FOLDS.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut errors = vec![0.0; grid.len()];
    for fold in 0..folds {
        let test: Vec<usize> = order.iter().copied().skip(fold).step_by(folds).collect();
        let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
        if train.is_empty() || test.is_empty() {
            continue;
        }
        let sub = Problem::new(
            select_rows(problem.x(), &train),
            DVector::from_iterator(train.len(), train.iter().map(|&i| problem.y()[i])),
        )?;
        let path = fit_path(&sub, &penalty, tree, &grid, settings)?;
        let x_test: DMatrix<f64> = select_rows(problem.x(), &test);
        let y_test = DVector::from_iterator(test.len(), test.iter().map(|&i| problem.y()[i]));
        for (k, point) in path.points.iter().enumerate() {
            errors[k] += (&y_test - &x_test * &point.beta_hat).norm_squared();
        }
    }
    // First minimum: ties go to the larger lambda.
    let best = errors
        .iter()
        .enumerate()
        .fold(0, |b, (k, &e)| if e < errors[b] { k } else { b });

    let path = fit_path(problem, &penalty, tree, &grid[..=best], settings)?;
    let beta = &path.points[best].beta_hat;
    let rss = problem.rss(beta);
    let df = degrees_of_freedom(problem.x(), penalty.matrix(), beta, settings.active_tol);
    if rss <= 1e-14 * (1.0 + inf_norm(problem.y()).powi(2)) || df >= n {
        return Err(Error::DegenerateResidual);
    }
    Ok(SigmaEstimate {
        sigma2: rss / (n - df) as f64,
        method: SigmaMethod::CrossValidatedRefit,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::make_binary_tree;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn known_sigma_passes_through() {
        let prob = Problem::new(gaussian(10, 2, 1), DVector::zeros(10)).unwrap();
        let est = estimate_sigma(&prob, None, Some(1.0), 0, &SolverSettings::default()).unwrap();
        assert_eq!(est.sigma2, 1.0);
        assert_eq!(est.method, SigmaMethod::Known);
    }

    #[test]
    fn noiseless_response_flags_warning() {
        let x = gaussian(20, 3, 2);
        let y = &x * DVector::from_vec(vec![1.0, -1.0, 2.0]);
        let prob = Problem::new(x, y).unwrap();
        let est = estimate_sigma(&prob, None, None, 0, &SolverSettings::default()).unwrap();
        assert!(est.sigma2 < 1e-20);
        assert!(est.warning.is_some());
    }

    #[test]
    fn pure_noise_variance_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma: f64 = 1.7;
        let y = DVector::from_fn(1000, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        });
        let prob = Problem::new(gaussian(1000, 5, 4), y).unwrap();
        let est = estimate_sigma(&prob, None, None, 0, &SolverSettings::default()).unwrap();
        assert!(
            (est.sigma2 / sigma.powi(2) - 1.0).abs() < 0.1,
            "{}",
            est.sigma2
        );
    }

    #[test]
    fn wide_design_uses_refit() {
        let tree = make_binary_tree(4, 1.0).unwrap();
        let d = tree.influence();
        let x = gaussian(12, 15, 5) * d.as_matrix();
        let mut beta = DVector::zeros(15);
        beta[0] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = &x * &beta + DVector::from_fn(12, |_, _| StandardNormal.sample(&mut rng));
        let prob = Problem::new(x, y).unwrap();
        let est = estimate_sigma(&prob, Some(&d), None, 1, &SolverSettings::default()).unwrap();
        assert_eq!(est.method, SigmaMethod::CrossValidatedRefit);
        assert!(est.sigma2 > 0.0 && est.sigma2.is_finite());
    }

    #[test]
    fn zero_response_wide_design_is_degenerate() {
        let prob = Problem::new(gaussian(3, 5, 7), DVector::zeros(3)).unwrap();
        let err = estimate_sigma(&prob, None, None, 0, &SolverSettings::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateResidual));
    }
}
