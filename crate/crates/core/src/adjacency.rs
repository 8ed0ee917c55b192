//! Weighted adjacency matrices of stacking hierarchies.
//!
//! Entry `(i, j)` of an [`AdjacencyMatrix`] is the probability that object `i`
//! is placed directly on object `j`. Object `i` therefore *supports* object
//! `j` with probability `A[j][i]`.
//!
//! Every product over edge probabilities in this module treats the edge
//! events as mutually independent.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SquareMatrix;

/// Probabilities handed to logarithms inside [`fuse`] are clamped to
/// `[FUSION_FLOOR, 1 - FUSION_FLOOR]`.
pub const FUSION_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdjacencyError {
    #[error("adjacency matrix must contain at least one object")]
    Empty,
    #[error("edge ({i}, {j}) out of range for {n} objects")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("self-loop on object {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("probability {p} at ({i}, {j}) is outside [0, 1]")]
    ProbabilityOutOfRange { i: usize, j: usize, p: f64 },
    #[error("diagonal entry {i} is {p}, expected 0")]
    NonZeroDiagonal { i: usize, p: f64 },
    #[error("row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("dimension mismatch: expected {expected} objects, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no observations to fuse")]
    NoObservations,
    #[error("fusion conflict at ({i}, {j}): one view reports 0 and another reports 1")]
    FusionConflict { i: usize, j: usize },
    #[error("degree {degree} out of range [{min}, {max}]")]
    DegreeOutOfRange { degree: usize, min: usize, max: usize },
    #[error("thresholded graph contains a cycle: {}", format_cycle(.0))]
    Cycle(Vec<usize>),
}

fn format_cycle(cycle: &[usize]) -> String {
    let mut parts: Vec<String> = cycle.iter().map(|v| v.to_string()).collect();
    if let Some(first) = cycle.first() {
        parts.push(first.to_string());
    }
    parts.join(" -> ")
}

/// A single weighted edge `i -> j`: object `i` rests directly on object `j`
/// with probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeProbability {
    pub i: usize,
    pub j: usize,
    pub p: f64,
}

impl EdgeProbability {
    pub fn new(i: usize, j: usize, p: f64) -> Self {
        Self { i, j, p }
    }
}

/// Square matrix of edge-existence probabilities with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    inner: SquareMatrix,
}

impl AdjacencyMatrix {
    /// The matrix of `n` objects with no relations. `n` may be zero.
    pub fn zeros(n: usize) -> Self {
        Self { inner: SquareMatrix::zeros(n) }
    }

    /// Every off-diagonal entry set to `p`.
    pub fn uniform(n: usize, p: f64) -> Result<Self, AdjacencyError> {
        check_probability(0, 0, p)?;
        let mut inner = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    inner.set(i, j, p);
                }
            }
        }
        Ok(Self { inner })
    }

    pub fn from_edges(n: usize, edges: &[EdgeProbability]) -> Result<Self, AdjacencyError> {
        if n == 0 {
            return Err(AdjacencyError::Empty);
        }
        let mut seen = BTreeSet::new();
        let mut inner = SquareMatrix::zeros(n);
        for e in edges {
            if e.i >= n || e.j >= n {
                return Err(AdjacencyError::IndexOutOfRange { i: e.i, j: e.j, n });
            }
            if e.i == e.j {
                return Err(AdjacencyError::SelfLoop(e.i));
            }
            check_probability(e.i, e.j, e.p)?;
            if !seen.insert((e.i, e.j)) {
                return Err(AdjacencyError::DuplicateEdge { i: e.i, j: e.j });
            }
            inner.set(e.i, e.j, e.p);
        }
        Ok(Self { inner })
    }

    /// Full-matrix constructor. Rows must form a square matrix with entries
    /// in `[0, 1]` and an exactly-zero diagonal.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, AdjacencyError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(AdjacencyError::NotSquare { row: i, len: row.len(), n });
            }
            data.extend_from_slice(row);
        }
        let inner = SquareMatrix::from_row_major(n, data).expect("length checked");
        Self::from_square(inner)
    }

    pub fn from_square(inner: SquareMatrix) -> Result<Self, AdjacencyError> {
        let n = inner.dim();
        for i in 0..n {
            for j in 0..n {
                let p = inner.get(i, j);
                if i == j {
                    if p != 0.0 {
                        return Err(AdjacencyError::NonZeroDiagonal { i, p });
                    }
                } else {
                    check_probability(i, j, p)?;
                }
            }
        }
        Ok(Self { inner })
    }

    /// Number of objects.
    pub fn n(&self) -> usize {
        self.inner.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    /// All strictly positive off-diagonal entries, row-major.
    pub fn edges(&self) -> impl Iterator<Item = EdgeProbability> + '_ {
        let n = self.n();
        (0..n)
            .flat_map(move |i| (0..n).map(move |j| (i, j)))
            .filter(move |&(i, j)| i != j && self.get(i, j) > 0.0)
            .map(move |(i, j)| EdgeProbability::new(i, j, self.get(i, j)))
    }

    /// `true` if every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.inner.as_slice().iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Restriction to `indices`, in the given order: entry `(a, b)` of the
    /// result is entry `(indices[a], indices[b])` of `self`.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self, AdjacencyError> {
        let n = self.n();
        let k = indices.len();
        let mut out = SquareMatrix::zeros(k);
        for (a, &ia) in indices.iter().enumerate() {
            for (b, &ib) in indices.iter().enumerate() {
                if ia >= n || ib >= n {
                    return Err(AdjacencyError::IndexOutOfRange { i: ia, j: ib, n });
                }
                if a != b {
                    out.set(a, b, self.get(ia, ib));
                }
            }
        }
        Ok(Self { inner: out })
    }

    /// `A^degree`. Entry `(i, j)` sums, over every directed path of length
    /// `degree` from `i` to `j`, the product of its edge probabilities. For
    /// `degree >= 2` entries may exceed 1 when parallel paths exist; the raw
    /// power is returned without renormalisation.
    pub fn moment(&self, degree: usize) -> Result<SquareMatrix, AdjacencyError> {
        if degree == 0 {
            return Err(AdjacencyError::DegreeOutOfRange { degree, min: 1, max: usize::MAX });
        }
        Ok(self.inner.pow(degree as u32))
    }

    /// Expected-support score per object: column sums of
    /// `A + A^2 + ... + A^max_degree`. The argmax is the object that holds up
    /// the most objects, directly and indirectly.
    pub fn support_counts(&self, max_degree: usize) -> Result<Vec<f64>, AdjacencyError> {
        let n = self.n();
        if max_degree == 0 || max_degree + 1 > n {
            return Err(AdjacencyError::DegreeOutOfRange { degree: max_degree, min: 1, max: n.saturating_sub(1) });
        }
        let mut power = self.inner.clone();
        let mut total = self.inner.clone();
        for _ in 1..max_degree {
            power = power.matmul(&self.inner);
            total.add_assign(&power);
        }
        Ok(total.column_sums())
    }

    /// Probability that each object supports nothing, `prod_j (1 - A[j][i])`,
    /// accumulated in log space. Factors with `A[j][i] == 1` short-circuit to
    /// an exact zero.
    pub fn safe_grasp_probs(&self) -> SafeGraspVector {
        let n = self.n();
        let probs = (0..n)
            .map(|i| {
                let mut log_clear = 0.0;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let a = self.get(j, i);
                    if a >= 1.0 {
                        return 0.0;
                    }
                    log_clear += (-a).ln_1p();
                }
                log_clear.exp()
            })
            .collect();
        SafeGraspVector { probs }
    }

    /// Largest binary entropy (nats) among the safe-grasp probabilities.
    pub fn max_entropy(&self) -> f64 {
        self.safe_grasp_probs().max_entropy()
    }

    /// Edges `(i, j)` with `A[i][j] > threshold`.
    pub fn thresholded_edges(&self, threshold: f64) -> Vec<(usize, usize)> {
        self.edges().filter(|e| e.p > threshold).map(|e| (e.i, e.j)).collect()
    }

    /// Topological layering of the graph with edges `A[i][j] > threshold`.
    ///
    /// Layer 0 holds the objects nothing rests on (graspable first); each
    /// following layer becomes free once all previous layers are removed.
    /// Objects inside a layer are in ascending index order.
    pub fn extract_order(&self, threshold: f64) -> Result<Vec<Vec<usize>>, AdjacencyError> {
        let n = self.n();
        let edges = self.thresholded_edges(threshold);
        let mut indegree = vec![0usize; n];
        let mut successors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            indegree[j] += 1;
            successors[i].push(j);
        }
        let mut removed = vec![false; n];
        let mut layers = Vec::new();
        let mut frontier: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &v in &frontier {
                removed[v] = true;
                for &w in &successors[v] {
                    indegree[w] -= 1;
                    if indegree[w] == 0 {
                        next.push(w);
                    }
                }
            }
            next.sort_unstable();
            layers.push(std::mem::replace(&mut frontier, next));
        }
        if removed.iter().all(|&r| r) {
            return Ok(layers);
        }
        Err(AdjacencyError::Cycle(find_cycle(n, &edges, &removed)))
    }
}

impl fmt::Display for AdjacencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.inner.fmt(f)
    }
}

fn check_probability(i: usize, j: usize, p: f64) -> Result<(), AdjacencyError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AdjacencyError::ProbabilityOutOfRange { i, j, p })
    }
}

/// Walks predecessors among the non-removed vertices (each has one, since
/// Kahn's algorithm stalled there) until a vertex repeats. The returned cycle
/// follows edge direction and starts at its smallest vertex.
fn find_cycle(n: usize, edges: &[(usize, usize)], removed: &[bool]) -> Vec<usize> {
    let mut predecessor = vec![None; n];
    for &(i, j) in edges {
        if !removed[i] && !removed[j] && predecessor[j].is_none() {
            predecessor[j] = Some(i);
        }
    }
    let start = (0..n).find(|&v| !removed[v]).expect("stalled vertex exists");
    let mut position = vec![None; n];
    let mut walk = Vec::new();
    let mut v = start;
    while position[v].is_none() {
        position[v] = Some(walk.len());
        walk.push(v);
        v = predecessor[v].expect("stalled vertex has a predecessor");
    }
    let mut cycle: Vec<usize> = walk[position[v].unwrap()..].to_vec();
    cycle.reverse();
    let min_pos = cycle.iter().enumerate().min_by_key(|&(_, v)| *v).map(|(k, _)| k).unwrap_or(0);
    cycle.rotate_left(min_pos);
    cycle
}

/// Bayesian fusion of per-view adjacency matrices sharing one object order.
///
/// Each cell becomes `prod a / (prod (1 - a) + prod a)`, which is the
/// posterior under a uniform per-cell prior. Products are accumulated in log
/// space on probabilities clamped to [`FUSION_FLOOR`]; exact 0 or 1 entries
/// bypass the clamp and dominate the cell, and a cell holding both an exact 0
/// and an exact 1 is reported as a [`AdjacencyError::FusionConflict`].
/// Entries of exactly 0.5 carry no evidence and leave a cell untouched.
pub fn fuse(observations: &[AdjacencyMatrix]) -> Result<AdjacencyMatrix, AdjacencyError> {
    let first = observations.first().ok_or(AdjacencyError::NoObservations)?;
    let n = first.n();
    if let Some(bad) = observations.iter().find(|a| a.n() != n) {
        return Err(AdjacencyError::DimensionMismatch { expected: n, found: bad.n() });
    }
    if observations.len() == 1 {
        return Ok(first.clone());
    }
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let cell =
                fuse_cell(observations.iter().map(|a| a.get(i, j))).ok_or(AdjacencyError::FusionConflict { i, j })?;
            out.set(i, j, cell);
        }
    }
    Ok(AdjacencyMatrix { inner: out })
}

fn fuse_cell(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut saw_zero, mut saw_one) = (false, false);
    let mut informative = Vec::new();
    for a in values {
        if a == 0.0 {
            saw_zero = true;
        } else if a == 1.0 {
            saw_one = true;
        } else if a != 0.5 {
            informative.push(a);
        }
    }
    match (saw_zero, saw_one) {
        (true, true) => return None,
        (true, false) => return Some(0.0),
        (false, true) => return Some(1.0),
        (false, false) => {}
    }
    // sorted so that the sums do not depend on observation order
    informative.sort_by(f64::total_cmp);
    match informative.as_slice() {
        [] => Some(0.5),
        [a] => Some(*a),
        values => {
            let (mut log_present, mut log_absent) = (0.0f64, 0.0f64);
            for &a in values {
                let a = a.clamp(FUSION_FLOOR, 1.0 - FUSION_FLOOR);
                log_present += a.ln();
                log_absent += (-a).ln_1p();
            }
            Some(1.0 / (1.0 + (log_absent - log_present).exp()))
        }
    }
}

/// Binary entropy in nats with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

/// Per-object probability of supporting no other object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafeGraspVector {
    probs: Vec<f64>,
}

impl SafeGraspVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Index of the safest object; ties go to the lowest index.
    pub fn safest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &p) in self.probs.iter().enumerate() {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Objects whose safe-grasp probability is at least `threshold`.
    pub fn safe_set(&self, threshold: f64) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] >= threshold).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.probs.iter().map(|&p| binary_entropy(p)).collect()
    }

    pub fn max_entropy(&self) -> f64 {
        self.probs.iter().map(|&p| binary_entropy(p)).fold(0.0, f64::max)
    }
}
