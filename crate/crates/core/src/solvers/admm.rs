//! Operator splitting for the generalized lasso.
//!
//! With the split `z = P beta` and scaled dual `u`, each iteration solves
//! `(X^T X + rho P^T P) beta = X^T Y + rho P^T (z - u)`, soft-thresholds
//! `z = S(P beta + u, lambda / rho)` and updates `u += P beta - z`. The
//! penalty parameter is doubled or halved when the primal and dual
//! residuals drift apart by more than 10x; factorizations are cached per
//! rho. Iterates are periodically polished by solving the equality
//! constrained problem on the current sign pattern, and a polished point is
//! accepted as soon as it passes the KKT certificate.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kkt::kkt_residual_from_gradient;
use super::{check_grid, Fit, Problem, SolverSettings, StackedPenalty};
use crate::error::{Error, Result};
use crate::linalg::{inf_norm, null_space_basis, select_rows, soft_threshold, solve_psd};

const POLISH_EVERY: usize = 25;
const RHO_CHECK_EVERY: usize = 10;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
/// Polished points are accepted with a certificate tighter than the
/// reporting tolerance.
const POLISH_FACTOR: f64 = 1e-9;

/// Iterate carried between warm-started solves.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub beta: DVector<f64>,
    pub z: DVector<f64>,
    pub u: DVector<f64>,
    pub rho: f64,
    pub lambda: f64,
}

pub struct AdmmSolver<'a> {
    problem: &'a Problem,
    penalty: &'a StackedPenalty,
    settings: SolverSettings,
    ptp: DMatrix<f64>,
    factors: HashMap<u64, Cholesky<f64, Dyn>>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(
        problem: &'a Problem,
        penalty: &'a StackedPenalty,
        settings: SolverSettings,
    ) -> Result<Self> {
        if penalty.ncols() != problem.p() {
            return Err(Error::DimensionMismatch(format!(
                "penalty has {} columns, X has {}",
                penalty.ncols(),
                problem.p()
            )));
        }
        let ptp = penalty.matrix().transpose() * penalty.matrix();
        Ok(AdmmSolver {
            problem,
            penalty,
            settings,
            ptp,
            factors: HashMap::new(),
        })
    }

    fn factor(&mut self, rho: f64) -> Result<&Cholesky<f64, Dyn>> {
        let key = rho.to_bits();
        if !self.factors.contains_key(&key) {
            let system = self.problem.gram() + &self.ptp * rho;
            let chol = system.cholesky().ok_or(Error::SingularSystem)?;
            self.factors.insert(key, chol);
        }
        Ok(&self.factors[&key])
    }

    fn cold_state(&self, lambda: f64) -> AdmmState {
        let m = self.penalty.nrows();
        AdmmState {
            beta: DVector::zeros(self.problem.p()),
            z: DVector::zeros(m),
            u: DVector::zeros(m),
            rho: self.settings.rho,
            lambda,
        }
    }

    /// Solves at one lambda, optionally warm-started from a previous state.
    pub fn solve(&mut self, lambda: f64, warm: Option<&AdmmState>) -> Result<(Fit, AdmmState)> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::NegativeLambda(lambda));
        }
        let mut state = match warm {
            Some(w) => {
                let mut s = w.clone();
                // The unscaled dual lives in lambda times the unit ball.
                if w.lambda > 0.0 && lambda > 0.0 {
                    s.u *= lambda / w.lambda;
                }
                s.lambda = lambda;
                s
            }
            None => self.cold_state(lambda),
        };
        let settings = self.settings;
        let m = self.penalty.nrows() as f64;
        let p = self.problem.p() as f64;
        let pen = self.penalty.matrix().clone();
        let pen_t = pen.transpose();
        let xty = self.problem.xty().clone();
        let polish_tol = POLISH_FACTOR * (1.0 + inf_norm(&xty));

        let mut last_pattern: Option<Vec<i8>> = None;
        let mut iterations = 0;
        let mut criteria_met = false;
        let mut polished: Option<(DVector<f64>, f64)> = None;

        while iterations < settings.max_iter {
            iterations += 1;
            let rhs = &xty + &pen_t * (&state.z - &state.u) * state.rho;
            state.beta = self.factor(state.rho)?.solve(&rhs);
            let fitted = &pen * &state.beta;
            let z_old = state.z.clone();
            let shifted = &fitted + &state.u;
            let kappa = lambda / state.rho;
            state.z = shifted.map(|v| soft_threshold(v, kappa));
            state.u += &fitted - &state.z;

            let primal = (&fitted - &state.z).norm();
            let dual = state.rho * (&pen_t * (&state.z - &z_old)).norm();
            let eps_pri =
                m.sqrt() * settings.tol_abs + settings.tol_rel * fitted.norm().max(state.z.norm());
            let eps_dual = p.sqrt() * settings.tol_abs
                + settings.tol_rel * state.rho * (&pen_t * &state.u).norm();
            if primal <= eps_pri && dual <= eps_dual {
                criteria_met = true;
                break;
            }

            if iterations % POLISH_EVERY == 0 {
                let pattern = sign_pattern(&state.z);
                if last_pattern.as_ref() != Some(&pattern) {
                    if let Some((beta, r)) = self.polish(lambda, &state.z) {
                        if r <= polish_tol {
                            polished = Some((beta, r));
                            break;
                        }
                    }
                    last_pattern = Some(pattern);
                }
            }

            if iterations % RHO_CHECK_EVERY == 0 {
                let new_rho = if primal > 10.0 * dual {
                    (state.rho * 2.0).min(RHO_MAX)
                } else if dual > 10.0 * primal {
                    (state.rho / 2.0).max(RHO_MIN)
                } else {
                    state.rho
                };
                if new_rho != state.rho {
                    state.u *= state.rho / new_rho;
                    state.rho = new_rho;
                }
            }
        }

        let kkt_tol = self.problem.kkt_tolerance(&settings);
        let (beta, kkt, certified_by_polish) = match polished {
            Some((beta, r)) => (beta, r, true),
            None => {
                // Final polish attempt, keep whichever point certifies better.
                let raw_r = self.residual(lambda, &state.beta);
                match self.polish(lambda, &state.z) {
                    Some((beta, r)) if r <= raw_r => (beta, r, r <= polish_tol),
                    _ => (state.beta.clone(), raw_r, false),
                }
            }
        };
        let converged = (criteria_met || certified_by_polish) && kkt <= kkt_tol;
        let fit = Fit {
            objective_value: self.problem.genlasso_objective(self.penalty, lambda, &beta),
            beta_hat: beta.clone(),
            lambda,
            kkt_residual: kkt,
            iterations,
            converged,
        };
        if certified_by_polish {
            // Continue later solves from a point consistent with the polish.
            state.beta = beta;
            state.z = &pen * &state.beta;
            state.z.apply(|v| {
                if v.abs() <= settings.active_tol {
                    *v = 0.0
                }
            });
        }
        Ok((fit, state))
    }

    /// Warm-started solves along a strictly decreasing grid.
    pub fn solve_path(&mut self, grid: &[f64]) -> Result<Vec<Fit>> {
        check_grid(grid)?;
        let mut state: Option<AdmmState> = None;
        let mut fits = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let (fit, next) = self.solve(lambda, state.as_ref())?;
            fits.push(fit);
            state = Some(next);
        }
        Ok(fits)
    }

    fn residual(&self, lambda: f64, beta: &DVector<f64>) -> f64 {
        let gradient = self.problem.correlation(beta);
        kkt_residual_from_gradient(
            &gradient,
            self.penalty.matrix(),
            lambda,
            beta,
            self.settings.active_tol,
        )
    }

    /// Minimizes the objective with the sign pattern of `z` frozen: rows
    /// where `z` vanishes are constrained to zero, active rows contribute the
    /// linear term `lambda * s^T P_A beta`. Returns the point and its KKT
    /// residual when the resulting signs agree with the pattern.
    fn polish(&self, lambda: f64, z: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
        let pen = self.penalty.matrix();
        let inactive: Vec<usize> = (0..z.len()).filter(|&i| z[i] == 0.0).collect();
        let basis = null_space_basis(&select_rows(pen, &inactive));
        let beta = if basis.ncols() == 0 {
            DVector::zeros(self.problem.p())
        } else {
            let mut linear = self.problem.xty().clone();
            for (i, &v) in z.iter().enumerate() {
                if v != 0.0 {
                    linear.axpy(-lambda * v.signum(), &pen.row(i).transpose(), 1.0);
                }
            }
            let hessian = basis.transpose() * self.problem.gram() * &basis;
            let theta = solve_psd(&hessian, &(basis.transpose() * linear));
            &basis * theta
        };
        let fitted = pen * &beta;
        for (i, &v) in z.iter().enumerate() {
            if v != 0.0 && fitted[i] * v < 0.0 && fitted[i].abs() > self.settings.active_tol {
                return None;
            }
        }
        Some((beta.clone(), self.residual(lambda, &beta)))
    }
}

fn sign_pattern(z: &DVector<f64>) -> Vec<i8> {
    z.iter()
        .map(|&v| v.signum() as i8 * (v != 0.0) as i8)
        .collect()
}

/// One-shot generalized lasso solve from a cold start.
pub fn solve_genlasso(
    problem: &Problem,
    penalty: &StackedPenalty,
    lambda: f64,
    settings: SolverSettings,
) -> Result<Fit> {
    let mut solver = AdmmSolver::new(problem, penalty, settings)?;
    solver.solve(lambda, None).map(|(fit, _)| fit)
}
