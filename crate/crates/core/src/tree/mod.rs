//! Weighted directed hierarchical trees over predictor nodes.
//!
//! A [`Tree`] stores its nodes in topological order (every parent precedes
//! its children), so the adjacency matrix is strictly upper triangular and
//! the influence matrix `D = (I - A)^{-1}` is unit upper triangular.

mod estimate;

pub use estimate::{estimate_influence_from_data, EstimateOptions, InfluenceEstimate};

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A weighted parent -> child edge, by node index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(parent: usize, child: usize, weight: f64) -> Self {
        Edge {
            parent,
            child,
            weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Root,
    Internal,
    Leaf,
}

impl NodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Root => "root",
            NodeRole::Internal => "internal",
            NodeRole::Leaf => "leaf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    labels: Vec<String>,
    /// Parent index and edge weight for every non-root node.
    parents: Vec<Option<(usize, f64)>>,
    children: Vec<Vec<usize>>,
    levels: Vec<usize>,
}

impl Tree {
    /// Validates the structure and returns the tree with nodes renumbered
    /// in topological order. Among nodes that are ready at the same time the
    /// one with the smallest input index comes first, so input that is
    /// already topologically ordered keeps its numbering.
    pub fn new(labels: Vec<String>, edges: &[Edge]) -> Result<Tree> {
        let p = labels.len();
        if p == 0 {
            return Err(Error::EmptyTree);
        }
        let mut seen = HashMap::with_capacity(p);
        for (i, label) in labels.iter().enumerate() {
            if seen.insert(label.as_str(), i).is_some() {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }

        let mut parent_of: Vec<Option<(usize, f64)>> = vec![None; p];
        let mut children_of: Vec<Vec<usize>> = vec![Vec::new(); p];
        for e in edges {
            for index in [e.parent, e.child] {
                if index >= p {
                    return Err(Error::InvalidIndex {
                        index,
                        node_count: p,
                    });
                }
            }
            if !e.weight.is_finite() {
                return Err(Error::NonFiniteWeight {
                    parent: labels[e.parent].clone(),
                    child: labels[e.child].clone(),
                });
            }
            if e.weight == 0.0 {
                return Err(Error::ZeroWeightEdge {
                    parent: labels[e.parent].clone(),
                    child: labels[e.child].clone(),
                });
            }
            if e.parent == e.child {
                return Err(Error::CycleDetected);
            }
            if parent_of[e.child].is_some() {
                return Err(Error::MultipleParents(labels[e.child].clone()));
            }
            parent_of[e.child] = Some((e.parent, e.weight));
            children_of[e.parent].push(e.child);
        }

        // Kahn's algorithm; every node has in-degree at most one.
        let mut ready: BinaryHeap<Reverse<usize>> = (0..p)
            .filter(|&j| parent_of[j].is_none())
            .map(Reverse)
            .collect();
        if ready.is_empty() {
            return Err(Error::CycleDetected);
        }
        let mut order = Vec::with_capacity(p);
        while let Some(Reverse(j)) = ready.pop() {
            order.push(j);
            for &c in &children_of[j] {
                ready.push(Reverse(c));
            }
        }
        if order.len() != p {
            return Err(Error::CycleDetected);
        }

        let mut new_index = vec![0usize; p];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let new_labels: Vec<String> = order.iter().map(|&old| labels[old].clone()).collect();
        let mut parents = vec![None; p];
        let mut children = vec![Vec::new(); p];
        let mut levels = vec![1usize; p];
        for (new, &old) in order.iter().enumerate() {
            if let Some((par, w)) = parent_of[old] {
                let par = new_index[par];
                parents[new] = Some((par, w));
                children[par].push(new);
                levels[new] = levels[par] + 1;
            }
        }
        for c in &mut children {
            c.sort_unstable();
        }
        Ok(Tree {
            labels: new_labels,
            parents,
            children,
            levels,
        })
    }

    /// Builds a tree from `(parent_label, child_label, weight)` triples.
    pub fn from_labeled_edges(
        labels: Vec<String>,
        edges: &[(String, String, f64)],
    ) -> Result<Tree> {
        let index: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let lookup = |l: &str| -> Result<usize> {
            index
                .get(l)
                .copied()
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))
        };
        let edges = edges
            .iter()
            .map(|(pa, ch, w)| Ok(Edge::new(lookup(pa)?, lookup(ch)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        Tree::new(labels, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parents[node].map(|(p, _)| p)
    }

    pub fn edge_weight(&self, node: usize) -> Option<f64> {
        self.parents[node].map(|(_, w)| w)
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Depth of the node; roots are at level 1.
    pub fn level(&self, node: usize) -> usize {
        self.levels[node]
    }

    pub fn depth(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    pub fn role(&self, node: usize) -> NodeRole {
        match (self.parents[node].is_some(), self.children[node].is_empty()) {
            (false, _) => NodeRole::Root,
            (true, true) => NodeRole::Leaf,
            (true, false) => NodeRole::Internal,
        }
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&j| self.role(j) == NodeRole::Root)
            .collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&j| self.children[j].is_empty())
            .collect()
    }

    /// Edges ordered by child index.
    pub fn edges(&self) -> Vec<Edge> {
        self.parents
            .iter()
            .enumerate()
            .filter_map(|(c, pw)| pw.map(|(p, w)| Edge::new(p, c, w)))
            .collect()
    }

    /// True when `ancestor` lies on the path from a root to `node` (or is
    /// the node itself).
    pub fn is_ancestor_or_self(&self, ancestor: usize, mut node: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.parent(node) {
                Some(p) if p >= ancestor => node = p,
                _ => return false,
            }
        }
    }

    /// Same topology with every edge weight replaced by `weight(parent, child)`.
    pub fn reweighted(&self, mut weight: impl FnMut(usize, usize) -> f64) -> Result<Tree> {
        let edges: Vec<Edge> = self
            .edges()
            .into_iter()
            .map(|e| Edge::new(e.parent, e.child, weight(e.parent, e.child)))
            .collect();
        Tree::new(self.labels.clone(), &edges)
    }

    pub fn adjacency(&self) -> AdjacencyMatrix {
        let p = self.node_count();
        let mut a = DMatrix::zeros(p, p);
        for e in self.edges() {
            a[(e.parent, e.child)] = e.weight;
        }
        AdjacencyMatrix(a)
    }

    /// `D = (I - A)^{-1}` by back-substitution: row i of D is `e_i` plus the
    /// weighted rows of its children, processed from the last node upward.
    pub fn influence(&self) -> InfluenceMatrix {
        let p = self.node_count();
        let mut d = DMatrix::<f64>::identity(p, p);
        for i in (0..p).rev() {
            for &c in &self.children[i] {
                let w = self.parents[c].expect("child has a parent").1;
                // Rows of descendants have support only at columns >= c.
                for j in c..p {
                    let v = d[(c, j)];
                    if v != 0.0 {
                        d[(i, j)] += w * v;
                    }
                }
            }
        }
        InfluenceMatrix(d)
    }
}

/// Full binary tree with `levels` levels, `2^levels - 1` nodes labelled
/// `X1..Xp` in breadth-first order and every edge weighted `weight`.
pub fn make_binary_tree(levels: usize, weight: f64) -> Result<Tree> {
    if levels < 1 {
        return Err(Error::InvalidLevels(levels));
    }
    if levels > 30 {
        return Err(Error::InvalidLevels(levels));
    }
    let p = (1usize << levels) - 1;
    let labels = (1..=p).map(|i| format!("X{i}")).collect();
    let edges: Vec<Edge> = (1..p).map(|c| Edge::new((c - 1) / 2, c, weight)).collect();
    Tree::new(labels, &edges)
}

/// Reweights every edge `(i, j)` of `topology` to `sd_j / sd_i`.
pub fn compositional_adjacency(topology: &Tree, column_sds: &[f64]) -> Result<Tree> {
    if column_sds.len() != topology.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} standard deviations for {} nodes",
            column_sds.len(),
            topology.node_count()
        )));
    }
    for (index, &value) in column_sds.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonpositiveSd { index, value });
        }
    }
    topology.reweighted(|parent, child| column_sds[child] / column_sds[parent])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix(DMatrix<f64>);

impl AdjacencyMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Unit upper-triangular influence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix(DMatrix<f64>);

impl InfluenceMatrix {
    pub fn from_matrix(d: DMatrix<f64>) -> Result<Self> {
        if !d.is_square() {
            return Err(Error::NotUnitTriangular);
        }
        for i in 0..d.nrows() {
            if (d[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::NotUnitTriangular);
            }
            for j in 0..i {
                if d[(i, j)] != 0.0 {
                    return Err(Error::NotUnitTriangular);
                }
            }
        }
        Ok(InfluenceMatrix(d))
    }

    pub fn identity(p: usize) -> Self {
        InfluenceMatrix(DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// `D^{-1}` by triangular solve. For a tree-derived matrix this is `I - A`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let p = self.dim();
        self.0
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("unit triangular matrix is invertible")
    }

    /// Total effects `gamma = D beta`.
    pub fn total_effects(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.0 * beta
    }

    /// Zeroes entries that are not on an ancestor path of `tree`.
    pub fn masked_to(&self, tree: &Tree) -> InfluenceMatrix {
        let p = self.dim();
        InfluenceMatrix(DMatrix::from_fn(p, p, |i, j| {
            if tree.is_ancestor_or_self(i, j) {
                self.0[(i, j)]
            } else {
                0.0
            }
        }))
    }
}
