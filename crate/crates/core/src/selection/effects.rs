use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{InfluenceMatrix, NodeRole, Tree};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRow {
    pub label: String,
    pub level: usize,
    pub role: &'static str,
    pub direct: f64,
    pub total: f64,
    pub direct_active: bool,
    pub total_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectReport {
    pub rows: Vec<EffectRow>,
    pub active_tol: f64,
}

impl EffectReport {
    pub fn direct(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.direct))
    }

    pub fn total(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.total))
    }
}

/// Direct effects `beta_hat` and total effects `gamma_hat = D beta_hat`
/// per node.
pub fn effect_report(
    tree: &Tree,
    influence: &InfluenceMatrix,
    beta: &DVector<f64>,
    active_tol: f64,
) -> Result<EffectReport> {
    let p = tree.node_count();
    if beta.len() != p || influence.dim() != p {
        return Err(Error::DimensionMismatch(format!(
            "tree has {p} nodes, beta has {} entries, influence matrix is {1}x{1}",
            beta.len(),
            influence.dim()
        )));
    }
    let gamma = influence.total_effects(beta);
    let rows = (0..p)
        .map(|j| EffectRow {
            label: tree.label(j).to_string(),
            level: tree.level(j),
            role: role_name(tree.role(j)),
            direct: beta[j],
            total: gamma[j],
            direct_active: beta[j].abs() > active_tol,
            total_active: gamma[j].abs() > active_tol,
        })
        .collect();
    Ok(EffectReport { rows, active_tol })
}

fn role_name(role: NodeRole) -> &'static str {
    role.as_str()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{make_binary_tree, Edge};

    #[test]
    fn star_cancellation() {
        let labels = vec!["r".into(), "a".into(), "b".into()];
        let tree = Tree::new(labels, &[Edge::new(0, 1, 1.0), Edge::new(0, 2, 1.0)]).unwrap();
        let beta = DVector::from_vec(vec![1.0, -0.5, -0.5]);
        let rep = effect_report(&tree, &tree.influence(), &beta, 1e-8).unwrap();
        assert!(rep.rows[0].direct_active);
        assert!(!rep.rows[0].total_active);
        assert_eq!(rep.total(), DVector::from_vec(vec![0.0, -0.5, -0.5]));
        assert_eq!(rep.rows[0].role, "root");
    }

    #[test]
    fn identity_influence_copies_beta() {
        let tree = make_binary_tree(2, 1.0).unwrap();
        let beta = DVector::from_vec(vec![0.3, 0.0, -1.0]);
        let rep = effect_report(&tree, &InfluenceMatrix::identity(3), &beta, 1e-8).unwrap();
        assert_eq!(rep.total(), beta);
    }

    #[test]
    fn root_only_direct_effect() {
        let tree = make_binary_tree(3, 1.0).unwrap();
        let mut beta = DVector::zeros(7);
        beta[0] = 1.0;
        let rep = effect_report(&tree, &tree.influence(), &beta, 1e-8).unwrap();
        assert_eq!(rep.total(), beta);
        assert_eq!(rep.rows[6].level, 3);
    }
}
