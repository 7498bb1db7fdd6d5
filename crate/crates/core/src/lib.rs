//! Tree-guided l1 regularization for linear regression.
//!
//! Predictors are nodes of a weighted directed hierarchical tree. The
//! influence matrix `D = (I - A)^{-1}` of the tree turns direct effects
//! `beta` into total effects `gamma = D beta`; penalizing `||D beta||_1`
//! (optionally mixed with `alpha ||beta||_1`) gives a generalized lasso that
//! is solved, tuned by Cp, and reported per node.

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod selection;
pub mod simulation;
pub mod solvers;
pub mod tree;

pub use error::{Error, Result};
