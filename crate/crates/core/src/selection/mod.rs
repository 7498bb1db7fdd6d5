//! Cp tuning over `(alpha, lambda)` and per-node effect reports.

mod df;
mod effects;
mod sigma;

pub use df::{cp, degrees_of_freedom, elastic_net_df};
pub use effects::{effect_report, EffectReport, EffectRow};
pub use sigma::{estimate_sigma, SigmaEstimate, SigmaMethod};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solvers::coordinate::certify_elastic_net;
use crate::solvers::{
    kkt_residual, lambda_grid, lambda_max, solve_elastic_net_path, solve_lasso_path,
    solve_total_effect_path, stack_penalty, AdmmSolver, Fit, PathFit, Problem, SolverSettings,
    StackedPenalty,
};
use crate::tree::InfluenceMatrix;

pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];
pub const DEFAULT_L1_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Which penalty is tuned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PenaltyFamily {
    /// `||D beta||_1 + alpha ||beta||_1` for every alpha in the grid;
    /// `alpha = 0` is the total-effect penalty alone.
    Tree { alpha_grid: Vec<f64> },
    /// Plain lasso `||beta||_1`.
    Lasso,
    /// Elastic net for every l1 fraction in the grid.
    ElasticNet { l1_grid: Vec<f64> },
}

impl PenaltyFamily {
    pub fn total_effect() -> Self {
        PenaltyFamily::Tree {
            alpha_grid: vec![0.0],
        }
    }

    fn mixing_grid(&self) -> Vec<f64> {
        match self {
            PenaltyFamily::Tree { alpha_grid } => alpha_grid.clone(),
            PenaltyFamily::Lasso => vec![0.0],
            PenaltyFamily::ElasticNet { l1_grid } => l1_grid.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub min_ratio: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 100,
            min_ratio: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpRow {
    /// Mixing parameter: alpha for the tree family, the l1 fraction for the
    /// elastic net, 0 for the lasso.
    pub alpha: f64,
    pub lambda: f64,
    pub df: f64,
    pub rss: f64,
    pub cp: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuningResult {
    pub best_alpha: f64,
    pub best_lambda: f64,
    pub sigma2: f64,
    pub cp_table: Vec<CpRow>,
    pub fit: Fit,
    #[serde(serialize_with = "crate::io::serialize_dvector")]
    pub gamma_hat: DVector<f64>,
}

impl TuningResult {
    pub fn best_cp(&self) -> f64 {
        self.cp_table
            .iter()
            .find(|r| r.alpha == self.best_alpha && r.lambda == self.best_lambda)
            .map(|r| r.cp)
            .unwrap_or(f64::NAN)
    }
}

/// Solved path for one value of the mixing parameter.
struct MixPath {
    mix: f64,
    path: PathFit,
    /// Certified fits when the solver produced them (operator splitting).
    fits: Option<Vec<Fit>>,
    penalty: Option<StackedPenalty>,
}

/// Tunes the penalty by minimizing Cp jointly over the mixing grid and a
/// geometric lambda grid anchored at lambda_max. Ties go to the larger
/// lambda. `influence` is required for the tree family and, when given,
/// defines `gamma_hat = D beta_hat` for every family.
pub fn select_model(
    problem: &Problem,
    influence: Option<&InfluenceMatrix>,
    family: &PenaltyFamily,
    grid: &GridSpec,
    sigma2: f64,
    settings: &SolverSettings,
) -> Result<TuningResult> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::NonpositiveSigma(sigma2));
    }
    if let Some(d) = influence {
        if d.dim() != problem.p() {
            return Err(Error::DimensionMismatch(format!(
                "influence matrix is {0}x{0}, X has {1} columns",
                d.dim(),
                problem.p()
            )));
        }
    }
    let mixes = family.mixing_grid();
    if mixes.is_empty() {
        return Err(Error::InvalidConfig("empty mixing grid".into()));
    }

    let paths = mixes
        .iter()
        .map(|&mix| solve_mix(problem, influence, family, mix, grid, settings))
        .collect::<Result<Vec<_>>>()?;

    let n = problem.n();
    let x = problem.x();
    let mut table = Vec::new();
    let mut best: Option<(usize, usize)> = None;
    let mut best_row: Option<CpRow> = None;
    for (k, mp) in paths.iter().enumerate() {
        for (i, point) in mp.path.points.iter().enumerate() {
            let df = match (family, &mp.penalty) {
                (PenaltyFamily::ElasticNet { .. }, _) => elastic_net_df(
                    x,
                    &point.beta_hat,
                    point.lambda,
                    mp.mix,
                    settings.active_tol,
                ),
                (_, Some(pen)) => {
                    degrees_of_freedom(x, pen.matrix(), &point.beta_hat, settings.active_tol) as f64
                }
                (_, None) => unreachable!("genlasso paths carry their penalty"),
            };
            let rss = problem.rss(&point.beta_hat);
            let row = CpRow {
                alpha: mp.mix,
                lambda: point.lambda,
                df,
                rss,
                cp: cp(rss, n, sigma2, df)?,
            };
            let better = match best_row {
                None => true,
                Some(b) => row.cp < b.cp || (row.cp == b.cp && row.lambda > b.lambda),
            };
            if better {
                best = Some((k, i));
                best_row = Some(row);
            }
            table.push(row);
        }
    }

    let (k, i) = best.expect("at least one grid point");
    let chosen = &paths[k];
    let fit = match &chosen.fits {
        Some(fits) => fits[i].clone(),
        None => certify_point(problem, family, chosen, i, settings),
    };
    let gamma_hat = match influence {
        Some(d) => d.total_effects(&fit.beta_hat),
        None => fit.beta_hat.clone(),
    };
    let best_row = best_row.expect("at least one grid point");
    Ok(TuningResult {
        best_alpha: best_row.alpha,
        best_lambda: best_row.lambda,
        sigma2,
        cp_table: table,
        fit,
        gamma_hat,
    })
}

fn certify_point(
    problem: &Problem,
    family: &PenaltyFamily,
    mp: &MixPath,
    i: usize,
    settings: &SolverSettings,
) -> Fit {
    let point = &mp.path.points[i];
    if let PenaltyFamily::ElasticNet { .. } = family {
        return certify_elastic_net(
            problem,
            point.lambda,
            mp.mix,
            point.beta_hat.clone(),
            point.iterations,
            point.converged,
            settings,
        );
    }
    let pen = mp
        .penalty
        .as_ref()
        .expect("genlasso paths carry their penalty");
    let kkt = kkt_residual(
        problem.x(),
        problem.y(),
        pen.matrix(),
        point.lambda,
        &point.beta_hat,
        settings.active_tol,
    );
    Fit {
        beta_hat: point.beta_hat.clone(),
        lambda: point.lambda,
        objective_value: problem.genlasso_objective(pen, point.lambda, &point.beta_hat),
        kkt_residual: kkt,
        iterations: point.iterations,
        converged: point.converged && kkt <= problem.kkt_tolerance(settings),
    }
}

fn solve_mix(
    problem: &Problem,
    influence: Option<&InfluenceMatrix>,
    family: &PenaltyFamily,
    mix: f64,
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<MixPath> {
    let (x, y) = (problem.x(), problem.y());
    let p = problem.p();
    let zero_path = |penalty: Option<StackedPenalty>| MixPath {
        mix,
        path: PathFit {
            points: vec![crate::solvers::PathPoint {
                lambda: 0.0,
                beta_hat: DVector::zeros(p),
                iterations: 0,
                converged: true,
            }],
        },
        fits: None,
        penalty,
    };
    match family {
        PenaltyFamily::Tree { .. } => {
            let d = influence.ok_or_else(|| {
                Error::InvalidConfig("the tree penalty needs an influence matrix".into())
            })?;
            let penalty = stack_penalty(d, mix)?;
            let lmax = lambda_max(x, y, penalty.matrix())?;
            if lmax == 0.0 {
                return Ok(zero_path(Some(penalty)));
            }
            let lambdas = lambda_grid(lmax, grid.points, grid.min_ratio);
            if mix == 0.0 {
                let path = solve_total_effect_path(x, y, d, &lambdas, settings)?;
                Ok(MixPath {
                    mix,
                    path,
                    fits: None,
                    penalty: Some(penalty),
                })
            } else {
                let fits = AdmmSolver::new(problem, &penalty, *settings)?.solve_path(&lambdas)?;
                Ok(MixPath {
                    mix,
                    path: PathFit::from(fits.clone()),
                    fits: Some(fits),
                    penalty: Some(penalty),
                })
            }
        }
        PenaltyFamily::Lasso => {
            let penalty = StackedPenalty::identity(p);
            let lmax = crate::linalg::inf_norm(problem.xty());
            if lmax == 0.0 {
                return Ok(zero_path(Some(penalty)));
            }
            let lambdas = lambda_grid(lmax, grid.points, grid.min_ratio);
            Ok(MixPath {
                mix,
                path: solve_lasso_path(x, y, &lambdas, settings)?,
                fits: None,
                penalty: Some(penalty),
            })
        }
        PenaltyFamily::ElasticNet { .. } => {
            if !(mix > 0.0 && mix <= 1.0) {
                return Err(Error::InvalidL1Ratio(mix));
            }
            let lmax = crate::linalg::inf_norm(problem.xty()) / mix;
            if lmax == 0.0 {
                return Ok(zero_path(None));
            }
            let lambdas = lambda_grid(lmax, grid.points, grid.min_ratio);
            Ok(MixPath {
                mix,
                path: solve_elastic_net_path(x, y, &lambdas, mix, settings)?,
                fits: None,
                penalty: None,
            })
        }
    }
}

/// Column means and standard deviations (divisor n - 1).
pub fn column_moments(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows();
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    x.column_iter()
        .map(|c| {
            let mean = c.mean();
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / denom;
            (mean, var.sqrt())
        })
        .unzip()
}
