//! Signed matrix-weighted directed graphs: edge storage, the matrix sign
//! calculus sgn(Q) / |Q| = sgn(Q)·Q, neighbor and antagonized sets, the block
//! Laplacian, and data-level validation.
//!
//! Edge (i, j) denotes a directed edge from agent j to agent i carrying the
//! symmetric sign-definite weight A_ij; a negative weight encodes antagonism.
//! Agent indices are 1-based throughout, matching the file format and report
//! output.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::{
    classify_definiteness_default, DefinitenessClass, LinalgError, Mat, SymMatrix,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("agent index {0} out of range 1..={1}")]
    IndexOutOfRange(usize, usize),
    #[error("self-loop on agent {0} is not allowed")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({to}, {from}) has a {rows}x{cols} matrix, expected {dim}x{dim}")]
    WrongDimension { to: usize, from: usize, rows: usize, cols: usize, dim: usize },
    #[error("graph must have at least one agent and dimension at least one")]
    EmptyShape,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A directed edge weight: the raw matrix as provided, its exactly symmetric
/// form, and the definiteness class of the symmetric form. The absolute value
/// and its row sums are precomputed for sign-definite weights because the
/// simulator touches them every step.
#[derive(Debug, Clone)]
pub struct SignedMatrixWeight {
    raw: Mat,
    sym: SymMatrix,
    class: DefinitenessClass,
    abs: Option<SymMatrix>,
    abs_row_sums: Vec<f64>,
}

impl PartialEq for SignedMatrixWeight {
    // The raw matrix determines every derived field.
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl SignedMatrixWeight {
    pub fn new(raw: Mat) -> Result<Self, LinalgError> {
        let sym = SymMatrix::new(&raw)?;
        let class = classify_definiteness_default(&sym)?;
        let sign = sign_of(class);
        let abs = sign.map(|s| sym.scale(s as f64));
        let abs_row_sums = match &abs {
            Some(a) => (0..a.dim()).map(|r| (0..a.dim()).map(|c| a.get(r, c)).sum()).collect(),
            None => Vec::new(),
        };
        Ok(SignedMatrixWeight { raw, sym, class, abs, abs_row_sums })
    }

    pub fn raw(&self) -> &Mat {
        &self.raw
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.sym
    }

    pub fn class(&self) -> DefinitenessClass {
        self.class
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    /// True when the raw input was symmetric as written.
    pub fn raw_symmetric(&self) -> bool {
        let n = self.raw.rows();
        (0..n).all(|i| (0..n).all(|j| self.raw[(i, j)] == self.raw[(j, i)]))
    }
}

fn sign_of(class: DefinitenessClass) -> Option<i32> {
    match class {
        DefinitenessClass::PositiveDefinite | DefinitenessClass::PositiveSemiDefinite => Some(1),
        DefinitenessClass::Zero => Some(0),
        DefinitenessClass::NegativeDefinite | DefinitenessClass::NegativeSemiDefinite => Some(-1),
        DefinitenessClass::Indefinite => None,
    }
}

/// Matrix sign: +1 for nonzero positive (semi)definite, −1 for nonzero
/// negative (semi)definite, 0 for zero. Indefinite weights have no sign;
/// they are flagged by `validate_graph` and rejected upstream.
pub fn msgn(w: &SignedMatrixWeight) -> i32 {
    sign_of(w.class).expect("msgn on indefinite weight; validate the graph first")
}

/// Matrix absolute value |A| = sgn(A)·A, positive semidefinite or zero.
pub fn mabs(w: &SignedMatrixWeight) -> &SymMatrix {
    w.abs.as_ref().expect("mabs on indefinite weight; validate the graph first")
}

pub(crate) fn mabs_row_sums(w: &SignedMatrixWeight) -> &[f64] {
    &w.abs_row_sums
}

/// Directed graph with N agents of state dimension d and a sparse map of
/// matrix-weighted edges keyed (to, from). Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGraph {
    n_agents: usize,
    dim: usize,
    edges: BTreeMap<(usize, usize), SignedMatrixWeight>,
}

impl MatrixGraph {
    /// Build a graph from raw edge matrices. Structurally impossible input
    /// (bad indices, self-loops, duplicate edges, wrong matrix shape) is a
    /// hard error; zero-class weights are normalized to absent edges; weights
    /// that are merely invalid data (asymmetric or indefinite) are stored and
    /// reported by `validate_graph`.
    pub fn new(
        n_agents: usize,
        dim: usize,
        edges: impl IntoIterator<Item = (usize, usize, Mat)>,
    ) -> Result<Self, GraphError> {
        if n_agents == 0 || dim == 0 {
            return Err(GraphError::EmptyShape);
        }
        let mut map = BTreeMap::new();
        for (to, from, raw) in edges {
            for &idx in &[to, from] {
                if idx < 1 || idx > n_agents {
                    return Err(GraphError::IndexOutOfRange(idx, n_agents));
                }
            }
            if to == from {
                return Err(GraphError::SelfLoop(to));
            }
            if raw.rows() != dim || raw.cols() != dim {
                return Err(GraphError::WrongDimension {
                    to,
                    from,
                    rows: raw.rows(),
                    cols: raw.cols(),
                    dim,
                });
            }
            let w = SignedMatrixWeight::new(raw)?;
            if w.class == DefinitenessClass::Zero {
                continue; // zero weight means no edge
            }
            if map.insert((to, from), w).is_some() {
                return Err(GraphError::DuplicateEdge(to, from));
            }
        }
        Ok(MatrixGraph { n_agents, dim, edges: map })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.n_agents * self.dim
    }

    /// Edges in deterministic (to, from) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &SignedMatrixWeight)> {
        self.edges.iter().map(|(&(to, from), w)| (to, from, w))
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, to: usize, from: usize) -> Option<&SignedMatrixWeight> {
        self.edges.get(&(to, from))
    }
}

/// Neighbor sets of one agent: in-neighbors, out-neighbors, and the negative
/// and positive in-neighbor split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    pub in_neighbors: Vec<usize>,
    pub out_neighbors: Vec<usize>,
    pub negative_in: Vec<usize>,
    pub positive_in: Vec<usize>,
}

/// Neighbor sets of agent `i` (sorted ascending). `negative_in` and
/// `positive_in` partition `in_neighbors`.
pub fn neighbor_sets(g: &MatrixGraph, i: usize) -> NeighborSets {
    assert!(i >= 1 && i <= g.n_agents, "agent index {i} out of range");
    let mut s = NeighborSets {
        in_neighbors: Vec::new(),
        out_neighbors: Vec::new(),
        negative_in: Vec::new(),
        positive_in: Vec::new(),
    };
    for (to, from, w) in g.edges() {
        if to == i {
            s.in_neighbors.push(from);
            if msgn(w) < 0 {
                s.negative_in.push(from);
            } else {
                s.positive_in.push(from);
            }
        }
        if from == i {
            s.out_neighbors.push(to);
        }
    }
    s
}

/// The antagonized set: agents with at least one incoming negative edge.
pub fn antagonized_set(g: &MatrixGraph) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for (to, _, w) in g.edges() {
        if msgn(w) < 0 && !out.contains(&to) {
            out.push(to);
        }
    }
    out.sort_unstable();
    out
}

/// Signed block Laplacian: off-diagonal block (i, j) is −A_ij, diagonal
/// block (i, i) is the sum of |A_ik| over in-neighbors k.
pub fn laplacian(g: &MatrixGraph) -> Mat {
    let d = g.dim;
    let mut l = Mat::zeros(g.n_states(), g.n_states());
    for (to, from, w) in g.edges() {
        let (bi, bj) = ((to - 1) * d, (from - 1) * d);
        let a = w.matrix();
        let aabs = mabs(w);
        for r in 0..d {
            for c in 0..d {
                l[(bi + r, bj + c)] -= a.get(r, c);
                l[(bi + r, bi + c)] += aabs.get(r, c);
            }
        }
    }
    l
}

/// Sum of |A_ij| over a set of in-neighbors of agent `i`.
pub(crate) fn sum_abs_in(g: &MatrixGraph, i: usize, from: &[usize]) -> SymMatrix {
    let mut s = SymMatrix::zeros(g.dim);
    for &j in from {
        s = s.add(mabs(g.weight(i, j).expect("edge listed in neighbor set")));
    }
    s
}

/// Sum of |A_ji| over out-neighbors of agent `i` (weights of edges leaving i).
pub(crate) fn sum_abs_out(g: &MatrixGraph, i: usize, to: &[usize]) -> SymMatrix {
    let mut s = SymMatrix::zeros(g.dim);
    for &j in to {
        s = s.add(mabs(g.weight(j, i).expect("edge listed in neighbor set")));
    }
    s
}

/// One data-level rule violation found by `validate_graph`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub to: usize,
    pub from: usize,
    pub rule: ViolationRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationRule {
    /// The raw matrix is not symmetric as written.
    Asymmetric,
    /// The (symmetrized) weight has both positive and negative eigenvalues.
    Indefinite,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match self.rule {
            ViolationRule::Asymmetric => "matrix is not symmetric",
            ViolationRule::Indefinite => "matrix is indefinite (mixed eigenvalue signs)",
        };
        write!(f, "edge (to={}, from={}): {}", self.to, self.from, what)
    }
}

/// Check every stored edge for symmetry and sign-definiteness. An empty list
/// means the graph satisfies the model's weight constraints.
pub fn validate_graph(g: &MatrixGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for (to, from, w) in g.edges() {
        if !w.raw_symmetric() {
            out.push(Violation { to, from, rule: ViolationRule::Asymmetric });
        }
        if w.class == DefinitenessClass::Indefinite {
            out.push(Violation { to, from, rule: ViolationRule::Indefinite });
        }
    }
    out
}
