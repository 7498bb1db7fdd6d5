use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tree::InfluenceMatrix;

/// Penalty matrix `[D; alpha I]` of the generalized lasso.
///
/// With `alpha = 0` only the `D` block is kept; the plain lasso corresponds
/// to [`StackedPenalty::identity`].
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPenalty {
    matrix: DMatrix<f64>,
    alpha: f64,
}

pub fn stack_penalty(d: &InfluenceMatrix, alpha: f64) -> Result<StackedPenalty> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::NegativeAlpha(alpha));
    }
    let d = d.as_matrix();
    if alpha == 0.0 {
        return Ok(StackedPenalty {
            matrix: d.clone(),
            alpha,
        });
    }
    let p = d.ncols();
    let mut matrix = DMatrix::zeros(2 * p, p);
    matrix.rows_mut(0, p).copy_from(d);
    for i in 0..p {
        matrix[(p + i, i)] = alpha;
    }
    Ok(StackedPenalty { matrix, alpha })
}

impl StackedPenalty {
    pub fn identity(p: usize) -> Self {
        StackedPenalty {
            matrix: DMatrix::identity(p, p),
            alpha: 0.0,
        }
    }

    /// Arbitrary penalty matrix with `p` columns.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        StackedPenalty { matrix, alpha: 0.0 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.matrix * beta
    }

    pub fn l1(&self, beta: &DVector<f64>) -> f64 {
        self.apply(beta).lp_norm(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Edge, Tree};

    #[test]
    fn identity_stack() {
        let s = stack_penalty(&InfluenceMatrix::identity(2), 1.0).unwrap();
        let expected = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.matrix(), &expected);
    }

    #[test]
    fn zero_alpha_keeps_d() {
        let d = InfluenceMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]))
            .unwrap();
        let s = stack_penalty(&d, 0.0).unwrap();
        assert_eq!(s.matrix(), d.as_matrix());
    }

    #[test]
    fn star_stack() {
        let labels = vec!["a".into(), "b".into(), "c".into()];
        let t = Tree::new(labels, &[Edge::new(0, 1, 0.5), Edge::new(0, 2, 0.5)]).unwrap();
        let d = t.influence();
        let s = stack_penalty(&d, 0.5).unwrap();
        assert_eq!(s.nrows(), 6);
        assert_eq!(&s.matrix().rows(0, 3).into_owned(), d.as_matrix());
        assert_eq!(
            s.matrix().rows(3, 3).into_owned(),
            DMatrix::identity(3, 3) * 0.5
        );
    }

    #[test]
    fn negative_alpha_rejected() {
        assert!(matches!(
            stack_penalty(&InfluenceMatrix::identity(2), -0.1),
            Err(Error::NegativeAlpha(_))
        ));
    }
}
