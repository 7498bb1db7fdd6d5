mod common;

use common::{gaussian_matrix, gaussian_vector, oracle, random_tree, rng, sparse_beta};
use nalgebra::DVector;
use rand::Rng;
use treelasso::linalg::inf_norm;
use treelasso::solvers::{
    kkt_residual, lambda_grid, lambda_max, solve_genlasso, solve_total_effect_path, stack_penalty,
    AdmmSolver, Problem, SolverSettings,
};

#[test]
fn admm_matches_enumeration_oracle() {
    let mut r = rng(101);
    let settings = SolverSettings::default();
    for _ in 0..12 {
        let p = r.gen_range(1..=3);
        let n = r.gen_range(p + 2..=10);
        let tree = random_tree(&mut r, p);
        let alpha = [0.0, 0.5, 1.0][r.gen_range(0..3)];
        let pen = stack_penalty(&tree.influence(), alpha).unwrap();
        let x = gaussian_matrix(&mut r, n, p);
        let y = &x * sparse_beta(&mut r, p) + gaussian_vector(&mut r, n);
        let prob = Problem::new(x.clone(), y.clone()).unwrap();
        for lambda in [0.1, 1.0, 10.0] {
            let fit = solve_genlasso(&prob, &pen, lambda, settings).unwrap();
            let best = oracle::solve(&x, &y, pen.matrix(), lambda);
            let f = oracle::objective(&x, &y, pen.matrix(), lambda, &fit.beta_hat);
            assert!(
                (f - best.objective).abs() <= 1e-8 * best.objective.abs().max(1.0),
                "{f} vs {}",
                best.objective
            );
            assert!((fit.objective_value - f).abs() <= 1e-9 * f.abs().max(1.0));
        }
    }
}

#[test]
fn transform_and_admm_agree_on_total_effect_penalty() {
    let mut r = rng(7);
    let settings = SolverSettings::default();
    for _ in 0..10 {
        let p = r.gen_range(2..=10);
        let n = r.gen_range(p + 2..=40);
        let tree = random_tree(&mut r, p);
        let d = tree.influence();
        let x = gaussian_matrix(&mut r, n, p) * d.as_matrix();
        let y = &x * sparse_beta(&mut r, p) + gaussian_vector(&mut r, n);
        let pen = stack_penalty(&d, 0.0).unwrap();
        let lmax = lambda_max(&x, &y, pen.matrix()).unwrap();
        let grid = lambda_grid(lmax, 8, 1e-2);
        let cd = solve_total_effect_path(&x, &y, &d, &grid, &settings).unwrap();
        let prob = Problem::new(x, y).unwrap();
        let admm = AdmmSolver::new(&prob, &pen, settings)
            .unwrap()
            .solve_path(&grid)
            .unwrap();
        for (a, b) in cd.points.iter().zip(&admm) {
            assert!(inf_norm(&(&a.beta_hat - &b.beta_hat)) < 1e-5);
        }
    }
}

#[test]
fn optimal_objective_decreases_with_lambda() {
    let mut r = rng(8);
    let tree = random_tree(&mut r, 6);
    let x = gaussian_matrix(&mut r, 30, 6) * tree.influence().as_matrix();
    let y = &x * sparse_beta(&mut r, 6) + gaussian_vector(&mut r, 30);
    let pen = stack_penalty(&tree.influence(), 0.5).unwrap();
    let prob = Problem::new(x.clone(), y.clone()).unwrap();
    let lmax = lambda_max(&x, &y, pen.matrix()).unwrap();
    let grid = lambda_grid(lmax, 20, 1e-3);
    let fits = AdmmSolver::new(&prob, &pen, SolverSettings::default())
        .unwrap()
        .solve_path(&grid)
        .unwrap();
    let tol = prob.kkt_tolerance(&SolverSettings::default());
    for w in fits.windows(2) {
        assert!(
            w[1].objective_value <= w[0].objective_value + 1e-9 * w[0].objective_value.max(1.0)
        );
    }
    for f in &fits {
        assert!(f.converged);
        assert!(f.kkt_residual <= tol);
        let again = kkt_residual(&x, &y, pen.matrix(), f.lambda, &f.beta_hat, 1e-8);
        assert!(again <= tol);
    }
}

#[test]
fn zero_above_lambda_max_for_random_trees() {
    let mut r = rng(9);
    for _ in 0..10 {
        let p = r.gen_range(2..=8);
        let n = r.gen_range(3..=15);
        let tree = random_tree(&mut r, p);
        let x = gaussian_matrix(&mut r, n, p);
        let y = gaussian_vector(&mut r, n);
        let alpha = r.gen_range(0.0..2.0);
        let pen = stack_penalty(&tree.influence(), alpha).unwrap();
        let lmax = lambda_max(&x, &y, pen.matrix()).unwrap();
        let prob = Problem::new(x, y).unwrap();
        let fit = solve_genlasso(&prob, &pen, lmax * 1.0001, SolverSettings::default()).unwrap();
        assert!(
            inf_norm(&fit.beta_hat) < 1e-7,
            "{}",
            inf_norm(&fit.beta_hat)
        );
        let below = solve_genlasso(&prob, &pen, lmax * 0.9, SolverSettings::default()).unwrap();
        assert!(below.beta_hat != DVector::zeros(p));
    }
}
