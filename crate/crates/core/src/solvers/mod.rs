//! Penalized least-squares solvers.
//!
//! Two independent routes solve `1/2 ||Y - X beta||^2 + lambda ||P beta||_1`:
//! operator splitting ([`admm`]) for any penalty matrix `P`, and cyclic
//! coordinate descent ([`coordinate`]) for the plain lasso, the elastic net,
//! and the total-effect penalty after the change of variables
//! `gamma = D beta`. [`kkt`] certifies solutions from either route.

pub mod admm;
pub mod coordinate;
pub mod kkt;
mod penalty;

pub use admm::{solve_genlasso, AdmmSolver, AdmmState};
pub use coordinate::{
    elastic_net_kkt_residual, solve_elastic_net, solve_elastic_net_path, solve_lasso_path,
    solve_total_effect_path,
};
pub use kkt::{kkt_residual, lambda_max, lambda_max_least_squares};
pub use penalty::{stack_penalty, StackedPenalty};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::inf_norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Threshold above which `(P beta)_i` counts as nonzero.
    pub active_tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    /// A fit is certified when its KKT residual is at most
    /// `kkt_factor * (1 + ||X^T Y||_inf)`.
    pub kkt_factor: f64,
    /// Coordinate descent stops when no coefficient moves more than this.
    pub cd_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_abs: 1e-10,
            tol_rel: 1e-8,
            active_tol: 1e-8,
            max_iter: 50_000,
            rho: 1.0,
            kkt_factor: 1e-6,
            cd_tol: 1e-10,
        }
    }
}

/// Validated regression data with cached Gram quantities.
#[derive(Debug, Clone)]
pub struct Problem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
}

impl Problem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(
                "non-finite values in X or Y".into(),
            ));
        }
        let gram = x.transpose() * &x;
        let xty = x.transpose() * &y;
        Ok(Problem { x, y, gram, xty })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn rss(&self, beta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * beta).norm_squared()
    }

    /// Negative loss gradient `X^T (Y - X beta)`.
    pub fn correlation(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.xty - &self.gram * beta
    }

    pub fn genlasso_objective(
        &self,
        penalty: &StackedPenalty,
        lambda: f64,
        beta: &DVector<f64>,
    ) -> f64 {
        0.5 * self.rss(beta) + lambda * penalty.l1(beta)
    }

    pub fn kkt_tolerance(&self, settings: &SolverSettings) -> f64 {
        settings.kkt_factor * (1.0 + inf_norm(&self.xty))
    }
}

/// A certified solution at one value of lambda.
#[derive(Debug, Clone, Serialize)]
pub struct Fit {
    #[serde(serialize_with = "crate::io::serialize_dvector")]
    pub beta_hat: DVector<f64>,
    pub lambda: f64,
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub beta_hat: DVector<f64>,
    pub iterations: usize,
    /// Solver stopping rule satisfied (not a KKT certificate).
    pub converged: bool,
}

/// Solutions along a strictly decreasing lambda grid, each warm-started
/// from the previous point.
#[derive(Debug, Clone, Default)]
pub struct PathFit {
    pub points: Vec<PathPoint>,
}

impl PathFit {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<Vec<Fit>> for PathFit {
    fn from(fits: Vec<Fit>) -> Self {
        PathFit {
            points: fits
                .into_iter()
                .map(|f| PathPoint {
                    lambda: f.lambda,
                    beta_hat: f.beta_hat,
                    iterations: f.iterations,
                    converged: f.converged,
                })
                .collect(),
        }
    }
}

/// `points` geometric values from `lambda_max` down to
/// `min_ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, points: usize, min_ratio: f64) -> Vec<f64> {
    if points == 0 || !(lambda_max > 0.0) {
        return Vec::new();
    }
    if points == 1 {
        return vec![lambda_max];
    }
    let log_ratio = min_ratio.ln();
    (0..points)
        .map(|k| lambda_max * (log_ratio * k as f64 / (points - 1) as f64).exp())
        .collect()
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !decreasing || grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidGrid);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = lambda_grid(2.0, 100, 1e-4);
        assert_eq!(g.len(), 100);
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert!((g[99] - 2e-4).abs() < 1e-15);
        assert!(check_grid(&g).is_ok());
        assert!(check_grid(&[1.0, 1.0]).is_err());
        assert!(check_grid(&[1.0, 0.0]).is_err());
    }
}
