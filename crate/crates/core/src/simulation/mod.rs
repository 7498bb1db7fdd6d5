//! Data generation from the tree model, the scenario registry and the
//! replication study.

mod study;

pub use study::{run_study, Method, ReplicationConfig, StudyReport, StudyRow, UserScenario};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{make_binary_tree, Tree};

/// Draws `n` rows `x_i = eps_i D` with `eps_i ~ N(0, diag(omega))` and the
/// response `y = X beta_star + sigma * e`. `eps` is drawn row by row, then
/// the noise, all from one ChaCha8 stream seeded by `seed`.
pub fn generate_data(
    tree: &Tree,
    beta_star: &DVector<f64>,
    n: usize,
    sigma: f64,
    omega: Option<&[f64]>,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = tree.node_count();
    if beta_star.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "beta_star has {} entries, tree has {p} nodes",
            beta_star.len()
        )));
    }
    let sds: Vec<f64> = match omega {
        None => vec![1.0; p],
        Some(w) if w.len() != p => {
            return Err(Error::DimensionMismatch(format!(
                "omega has {} entries, tree has {p} nodes",
                w.len()
            )))
        }
        Some(w) => {
            if let Some((index, &value)) = w
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
            {
                return Err(Error::NonpositiveSd { index, value });
            }
            w.iter().map(|v| v.sqrt()).collect()
        }
    };
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::NonpositiveSigma(sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eps = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            let z: f64 = StandardNormal.sample(&mut rng);
            eps[(i, j)] = sds[j] * z;
        }
    }
    let x = eps * tree.influence().as_matrix();
    let noise = DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    });
    let y = &x * beta_star + noise;
    Ok((x, y))
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub tree: Tree,
    pub beta_star: DVector<f64>,
    pub description: String,
}

impl Scenario {
    pub fn gamma_star(&self) -> DVector<f64> {
        self.tree.influence().total_effects(&self.beta_star)
    }
}

pub const SCENARIO_NAMES: [&str; 10] = [
    "p7-a", "p7-b", "p7-c", "p7-d", "p127-a", "p127-b", "p127-c", "p127-d", "p127-e", "p127-f",
];

/// Canonical scenarios on unit-weight binary trees. Nodes are numbered in
/// breadth-first order, so node `i` has children `2i+1` and `2i+2`.
pub fn scenario(name: &str) -> Result<Scenario> {
    let (levels, kind, node) = match name {
        "p7-a" => (3, Kind::Single, 0),
        "p7-b" => (3, Kind::Single, 1),
        "p7-c" => (3, Kind::Single, 3),
        "p7-d" => (3, Kind::Cancel, 1),
        "p127-a" => (7, Kind::Single, 0),
        "p127-b" => (7, Kind::Single, 7),
        "p127-c" => (7, Kind::Single, 63),
        "p127-d" => (7, Kind::Cancel, 1),
        "p127-e" => (7, Kind::Cancel, 7),
        "p127-f" => (7, Kind::Cancel, 31),
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    let tree = make_binary_tree(levels, 1.0)?;
    let mut beta_star = DVector::zeros(tree.node_count());
    beta_star[node] = 1.0;
    let label = tree.label(node).to_string();
    let description = match kind {
        Kind::Single => format!("direct effect 1 at {label} (level {})", tree.level(node)),
        Kind::Cancel => {
            for &c in tree.children(node) {
                beta_star[c] = -0.5;
            }
            format!(
                "direct effect 1 at {label} (level {}), -0.5 at each child; total effect of {label} is zero",
                tree.level(node)
            )
        }
    };
    Ok(Scenario {
        name: name.to_string(),
        tree,
        beta_star,
        description,
    })
}

enum Kind {
    Single,
    Cancel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// `None` when the truth has no active entries.
    pub sensitivity: Option<f64>,
    /// `None` when the truth has no inactive entries.
    pub specificity: Option<f64>,
    pub mse: f64,
}

/// Support recovery and squared error; an entry is predicted active when
/// `|estimate_j| > tol`. The truth is active where it is nonzero.
pub fn evaluate(estimate: &DVector<f64>, truth: &DVector<f64>, tol: f64) -> Result<Metrics> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} entries, truth has {}",
            estimate.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fnn, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (e, t) in estimate.iter().zip(truth.iter()) {
        match (*t != 0.0, e.abs() > tol) {
            (true, true) => tp += 1,
            (true, false) => fnn += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    Ok(Metrics {
        sensitivity: ratio(tp, fnn),
        specificity: ratio(tn, fp),
        mse: (estimate - truth).norm_squared(),
    })
}
