#![allow(dead_code)]

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use treelasso::tree::{Edge, Tree};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Random forest over `p` nodes: node `i > 0` gets a parent among `0..i`
/// with probability 0.8, weights uniform on `[0.5, 2]`.
pub fn random_tree(rng: &mut ChaCha8Rng, p: usize) -> Tree {
    let labels = (0..p).map(|i| format!("V{i}")).collect();
    let edges: Vec<Edge> = (1..p)
        .filter_map(|i| {
            rng.gen_bool(0.8)
                .then(|| Edge::new(rng.gen_range(0..i), i, rng.gen_range(0.5..2.0)))
        })
        .collect();
    Tree::new(labels, &edges).unwrap()
}

/// Sparse coefficient vector with about half the entries set to +-1.
pub fn sparse_beta(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| {
        if rng.gen_bool(0.5) {
            if rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    })
}
