use nalgebra::DMatrix;

use super::{InfluenceMatrix, Tree};
use crate::error::{Error, Result};
use crate::linalg::sample_covariance;

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    /// Add `1e-8 * trace / p` to the diagonal when the covariance is not
    /// positive definite.
    pub ridge_fallback: bool,
    /// Zero every entry that is not on an ancestor path of the tree.
    pub mask_to_tree: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            ridge_fallback: true,
            mask_to_tree: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InfluenceEstimate {
    pub influence: InfluenceMatrix,
    /// Set when the ridge fallback was needed.
    pub regularized: bool,
    pub ridge: f64,
}

/// Estimates `D` from data whose columns follow the tree's topological
/// order. With `Cov(x) = D^T Omega D`, the upper Cholesky factor of the
/// sample covariance is `Omega^{1/2} D`; dividing each row by its diagonal
/// entry recovers `D`.
pub fn estimate_influence_from_data(
    x: &DMatrix<f64>,
    tree: &Tree,
    options: EstimateOptions,
) -> Result<InfluenceEstimate> {
    let p = tree.node_count();
    if x.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, tree has {p} nodes",
            x.ncols()
        )));
    }
    let cov = sample_covariance(x);
    let (lower, regularized, ridge) = match cov.clone().cholesky() {
        Some(chol) => (chol.unpack(), false, 0.0),
        None if options.ridge_fallback => {
            let ridge = 1e-8 * cov.trace() / p as f64;
            let shifted = &cov + DMatrix::identity(p, p) * ridge;
            let chol = shifted.cholesky().ok_or(Error::CovarianceNotPd)?;
            (chol.unpack(), true, ridge)
        }
        None => return Err(Error::CovarianceNotPd),
    };
    let mut upper = lower.transpose();
    for i in 0..p {
        let diag = upper[(i, i)];
        if !(diag > 0.0) {
            return Err(Error::CovarianceNotPd);
        }
        for j in i..p {
            upper[(i, j)] /= diag;
        }
        upper[(i, i)] = 1.0;
    }
    let mut influence = InfluenceMatrix::from_matrix(upper)?;
    if options.mask_to_tree {
        influence = influence.masked_to(tree);
    }
    Ok(InfluenceEstimate {
        influence,
        regularized,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{make_binary_tree, Edge};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn star() -> Tree {
        let labels = vec!["a".into(), "b".into(), "c".into()];
        Tree::new(labels, &[Edge::new(0, 1, 1.0), Edge::new(0, 2, 1.0)]).unwrap()
    }

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn recovers_star_influence() {
        let t = star();
        let x = gaussian(10_000, 3, 7) * t.influence().as_matrix();
        let est = estimate_influence_from_data(&x, &t, EstimateOptions::default()).unwrap();
        assert!(!est.regularized);
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((est.influence.as_matrix() - expected).amax() < 0.05);
    }

    #[test]
    fn independent_columns_give_identity() {
        let t = make_binary_tree(2, 1.0).unwrap();
        let x = gaussian(10_000, 3, 11);
        let est = estimate_influence_from_data(&x, &t, EstimateOptions::default()).unwrap();
        assert!((est.influence.as_matrix() - DMatrix::identity(3, 3)).amax() < 0.05);
    }

    #[test]
    fn rank_deficient_without_fallback_fails() {
        let t = star();
        let x = gaussian(2, 3, 1);
        let opts = EstimateOptions {
            ridge_fallback: false,
            mask_to_tree: false,
        };
        assert!(matches!(
            estimate_influence_from_data(&x, &t, opts),
            Err(Error::CovarianceNotPd)
        ));
        let est = estimate_influence_from_data(&x, &t, EstimateOptions::default()).unwrap();
        assert!(est.regularized);
        assert!(est.ridge > 0.0);
    }

    #[test]
    fn masking_respects_tree_support() {
        let t = make_binary_tree(2, 1.0).unwrap();
        let x = gaussian(50, 3, 3);
        let opts = EstimateOptions {
            ridge_fallback: true,
            mask_to_tree: true,
        };
        let est = estimate_influence_from_data(&x, &t, opts).unwrap();
        assert_eq!(est.influence.as_matrix()[(1, 2)], 0.0);
    }
}
