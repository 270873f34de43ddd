//! Matrix-theoretic predicates and constructions: directed graphs of
//! matrices, strongly connected components, Metzler and M-matrix tests,
//! Perron roots of nonnegative matrices, and block triangularization by
//! symmetric permutation.

use nalgebra::{DMatrix, DVector};

use crate::eigen;
use crate::error::{Error, MMatrixFailure, Result};

/// Entrywise slack when testing computed inverses for nonnegativity.
const INVERSE_SLACK: f64 = 1e-12;

/// The directed graph `G(A)` of a square matrix: an edge `i -> j` for every
/// `A[i][j] != 0` (exact zero test; Jacobians are assembled symbolically so
/// structural zeros are exact). Self-loops are kept but do not affect strong
/// connectivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl DirectedGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (i, j) in edges {
            assert!(i < n && j < n, "edge ({i},{j}) out of range for {n} vertices");
            adj[i].push(j);
        }
        for out in &mut adj {
            out.sort_unstable();
            out.dedup();
        }
        DirectedGraph { n, adj }
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.adj[i].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, out)| out.iter().map(move |&j| (i, j)))
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }
}

/// Builds `G(A)`.
pub fn digraph(a: &DMatrix<f64>) -> DirectedGraph {
    assert_eq!(a.nrows(), a.ncols(), "digraph of a non-square matrix");
    let n = a.nrows();
    DirectedGraph::new(
        n,
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| a[(i, j)] != 0.0),
    )
}

/// Reachability from `i` to `j` by a path of length >= 0; `i == j` is always
/// reachable. (With this convention a produced chemoattractant satisfies the
/// path condition immediately.)
pub fn has_path(g: &DirectedGraph, i: usize, j: usize) -> Result<bool> {
    if i >= g.n || j >= g.n {
        return Err(Error::Precondition(format!(
            "vertex index out of range: ({i},{j}) in a {}-vertex graph",
            g.n
        )));
    }
    if i == j {
        return Ok(true);
    }
    let mut seen = vec![false; g.n];
    let mut stack = vec![i];
    seen[i] = true;
    while let Some(v) = stack.pop() {
        for &w in g.successors(v) {
            if w == j {
                return Ok(true);
            }
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    Ok(false)
}

/// The classes (strongly connected components) of a matrix graph, ordered so
/// that listing vertices class by class makes `P A P^t` lower block
/// triangular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecomposition {
    /// SCCs in reverse topological order of the condensation.
    pub classes: Vec<Vec<usize>>,
    /// `permutation[k]` = original vertex at permuted position `k`.
    pub permutation: Vec<usize>,
    /// Condensation edges `(from_class, to_class)` in the output class order.
    pub condensation_edges: Vec<(usize, usize)>,
}

struct Tarjan<'g> {
    g: &'g DirectedGraph,
    index: usize,
    idx: Vec<Option<usize>>,
    low: Vec<usize>,
    stack: Vec<usize>,
    on_stack: Vec<bool>,
    comps: Vec<Vec<usize>>,
}

impl Tarjan<'_> {
    fn strongconnect(&mut self, v: usize) {
        self.idx[v] = Some(self.index);
        self.low[v] = self.index;
        self.index += 1;
        self.stack.push(v);
        self.on_stack[v] = true;

        for i in 0..self.g.successors(v).len() {
            let w = self.g.successors(v)[i];
            if self.idx[w].is_none() {
                self.strongconnect(w);
                self.low[v] = self.low[v].min(self.low[w]);
            } else if self.on_stack[w] {
                self.low[v] = self.low[v].min(self.idx[w].unwrap());
            }
        }

        if self.low[v] == self.idx[v].unwrap() {
            let mut comp = Vec::new();
            loop {
                let w = self.stack.pop().expect("tarjan stack underflow");
                self.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            self.comps.push(comp);
        }
    }
}

/// Tarjan's algorithm. The component output order (first-completed first) is
/// exactly the reverse topological order of the condensation, so every edge
/// between classes points from a later class to an earlier one.
pub fn strongly_connected_components(g: &DirectedGraph) -> ClassDecomposition {
    let n = g.n_vertices();
    let mut t = Tarjan {
        g,
        index: 0,
        idx: vec![None; n],
        low: vec![0; n],
        stack: Vec::new(),
        on_stack: vec![false; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if t.idx[v].is_none() {
            t.strongconnect(v);
        }
    }
    let classes = t.comps;

    let mut class_of = vec![usize::MAX; n];
    for (cid, comp) in classes.iter().enumerate() {
        for &v in comp {
            class_of[v] = cid;
        }
    }
    let mut condensation_edges: Vec<(usize, usize)> = g
        .edges()
        .map(|(i, j)| (class_of[i], class_of[j]))
        .filter(|(a, b)| a != b)
        .collect();
    condensation_edges.sort_unstable();
    condensation_edges.dedup();

    let permutation = classes.iter().flatten().copied().collect();
    ClassDecomposition {
        classes,
        permutation,
        condensation_edges,
    }
}

/// True iff `G(A)` is strongly connected; 1x1 matrices count as irreducible.
pub fn is_irreducible(a: &DMatrix<f64>) -> bool {
    if a.nrows() <= 1 {
        return true;
    }
    strongly_connected_components(&digraph(a)).classes.len() == 1
}

/// True iff every off-diagonal entry is nonnegative.
pub fn is_metzler(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= 0.0))
}

/// Detailed nonsingular M-matrix test: nonpositive off-diagonals, numerical
/// nonsingularity, and an entrywise nonnegative inverse (with `1e-12`
/// roundoff slack).
pub fn m_matrix_check(a: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, MMatrixFailure> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "M-matrix test on a non-square matrix");
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] > 0.0 {
                return Err(MMatrixFailure::SignPattern);
            }
        }
    }
    let lu = a.clone().full_piv_lu();
    let scale = a.amax();
    let tol = (n as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() <= tol) {
        return Err(MMatrixFailure::Singular);
    }
    let inv = match lu.try_inverse() {
        Some(inv) => inv,
        None => return Err(MMatrixFailure::Singular),
    };
    if inv.iter().any(|&x| x < -INVERSE_SLACK) {
        return Err(MMatrixFailure::NegativeInverse);
    }
    Ok(inv)
}

/// True iff `A` is a nonsingular M-matrix (equivalently, its inverse exists
/// and is entrywise nonnegative).
pub fn is_nonsingular_m_matrix(a: &DMatrix<f64>) -> bool {
    m_matrix_check(a).is_ok()
}

/// Minimum and maximum row sums of a nonnegative matrix; these sandwich the
/// spectral radius.
pub fn row_sum_bounds(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if a.iter().any(|&x| x < 0.0) {
        return Err(Error::Precondition(
            "row_sum_bounds requires a nonnegative matrix".into(),
        ));
    }
    let sums: Vec<f64> = (0..a.nrows()).map(|i| a.row(i).sum()).collect();
    let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

const PERRON_MAX_ITER: usize = 100_000;
const PERRON_TOL: f64 = 1e-12;

/// Perron root and positive eigenvector of a nonnegative irreducible matrix.
///
/// Power iteration on `A + (max diag + 1) I` (primitive, so the iteration
/// converges geometrically); falls back to a dense eigensolve for the root
/// if the iteration stagnates. The returned root is clamped into the row-sum
/// bounds, which always contain it; the vector has unit max-norm.
pub fn perron_root(a: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Precondition("perron_root of an empty matrix".into()));
    }
    if a.iter().any(|&x| x < 0.0) {
        return Err(Error::Precondition(
            "perron_root requires a nonnegative matrix".into(),
        ));
    }
    if !is_irreducible(a) {
        return Err(Error::Precondition(
            "perron_root requires an irreducible matrix".into(),
        ));
    }
    let (smin, smax) = row_sum_bounds(a)?;

    let shift = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max) + 1.0;
    let shifted = a + DMatrix::identity(n, n) * shift;

    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut lambda = 0.0f64;
    let mut converged = false;
    for _ in 0..PERRON_MAX_ITER {
        let y = &shifted * &x;
        let norm = y.amax();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let next = y / norm;
        let delta = (norm - lambda).abs();
        lambda = norm;
        x = next;
        if delta < PERRON_TOL * lambda.max(1.0) {
            converged = true;
            break;
        }
    }

    let mut rho = lambda - shift;
    // Accept the iteration only if it actually solved the eigenproblem.
    let residual = (a * &x - &x * rho).amax();
    let ok = converged && residual <= 1e-10 * smax.max(1.0);
    if !ok {
        let eigs = eigen::eigenvalues(a)?;
        rho = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
        // Refine the vector with extra iterations on the primitive shift.
        for _ in 0..10_000 {
            let y = &shifted * &x;
            let norm = y.amax();
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            x = y / norm;
        }
    }
    if x.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::EigenFailure);
    }
    Ok((rho.clamp(smin, smax), x))
}

/// Symmetric permutation of `A` into lower block triangular form `T = PAP^t`
/// whose diagonal blocks are the (irreducible) classes of `A`.
pub fn block_triangularize(a: &DMatrix<f64>) -> (DMatrix<f64>, ClassDecomposition) {
    let decomp = strongly_connected_components(&digraph(a));
    let perm = &decomp.permutation;
    let n = a.nrows();
    let t = DMatrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])]);
    (t, decomp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, rows, data)
    }

    #[test]
    fn digraph_edges() {
        let g = digraph(&m(2, &[0.0, 1.0, 0.0, 0.0]));
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1)]);

        let g = digraph(&DMatrix::identity(3, 3));
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 0), (1, 1), (2, 2)]);

        // Dimerization Jacobian: every entry nonzero, complete with loops.
        let g = digraph(&m(2, &[-3.0, 1.0, 2.0, -2.0]));
        assert_eq!(g.edges().count(), 4);
    }

    #[test]
    fn scc_ordering_makes_lower_triangular() {
        let g = DirectedGraph::new(2, [(0, 1)]);
        let d = strongly_connected_components(&g);
        assert_eq!(d.classes, vec![vec![1], vec![0]]);
        assert_eq!(d.condensation_edges, vec![(1, 0)]);

        let g = DirectedGraph::new(3, [(0, 1), (1, 2), (2, 0), (0, 2), (1, 0), (2, 1)]);
        let d = strongly_connected_components(&g);
        assert_eq!(d.classes, vec![vec![0, 1, 2]]);

        let g = DirectedGraph::new(4, [(0, 1), (1, 0), (1, 2), (2, 3), (3, 2)]);
        let d = strongly_connected_components(&g);
        assert_eq!(d.classes, vec![vec![2, 3], vec![0, 1]]);
        assert_eq!(d.condensation_edges, vec![(1, 0)]);
    }

    #[test]
    fn irreducibility() {
        assert!(is_irreducible(&m(2, &[0.0, 1.0, 1.0, 0.0])));
        assert!(!is_irreducible(&m(2, &[1.0, 1.0, 0.0, 1.0])));
        assert!(is_irreducible(&m(2, &[-3.0, 1.0, 2.0, -2.0])));
        // Single vertex is vacuously strongly connected.
        assert!(is_irreducible(&m(1, &[0.0])));
    }

    #[test]
    fn metzler() {
        assert!(is_metzler(&m(2, &[-5.0, 0.0, 2.0, -1.0])));
        // Trimolecular Jacobian at v* = (1, 2, 1) with k1=2, k2=3, g1=1.
        let j = m(3, &[-5.0, -2.0, 3.0, -4.0, -2.0, 3.0, 4.0, 2.0, -3.0]);
        assert!(!is_metzler(&j));
        let dimer = m(2, &[-3.0, 1.0, 2.0, -2.0]);
        assert!(is_metzler(&dimer));
    }

    #[test]
    fn m_matrix_examples() {
        assert!(is_nonsingular_m_matrix(&DMatrix::identity(3, 3)));
        assert!(is_nonsingular_m_matrix(&m(2, &[2.0, -1.0, -1.0, 2.0])));
        assert_eq!(
            m_matrix_check(&m(2, &[1.0, -2.0, -2.0, 1.0])),
            Err(MMatrixFailure::NegativeInverse)
        );
        assert_eq!(
            m_matrix_check(&m(2, &[1.0, 1.0, -2.0, 1.0])),
            Err(MMatrixFailure::SignPattern)
        );
        assert_eq!(
            m_matrix_check(&m(2, &[1.0, -1.0, -1.0, 1.0])),
            Err(MMatrixFailure::Singular)
        );
    }

    #[test]
    fn row_sums() {
        assert_eq!(row_sum_bounds(&m(2, &[1.0, 2.0, 3.0, 4.0])).unwrap(), (3.0, 7.0));
        assert_eq!(row_sum_bounds(&DMatrix::identity(4, 4)).unwrap(), (1.0, 1.0));
        assert!(row_sum_bounds(&m(2, &[1.0, -0.5, 0.0, 1.0])).is_err());
    }

    #[test]
    fn perron_examples() {
        let (rho, x) = perron_root(&m(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((rho - 1.0).abs() < 1e-10);
        assert!((x[0] - x[1]).abs() < 1e-8);

        let (rho, _) = perron_root(&m(2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let expected = (5.0 + 33.0f64.sqrt()) / 2.0;
        assert!((rho - expected).abs() < 1e-10 * expected);

        let (rho, x) = perron_root(&m(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!((rho - 3.0).abs() < 1e-10);
        assert!(x.iter().all(|&c| c > 0.0));

        assert!(perron_root(&m(2, &[1.0, 1.0, 0.0, 1.0])).is_err());
        assert!(perron_root(&m(2, &[1.0, -1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn perron_root_within_row_sum_sandwich() {
        let (rho, _) = perron_root(&m(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let (s, big_s) = row_sum_bounds(&m(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!(s <= rho && rho <= big_s);
    }

    #[test]
    fn block_triangularization() {
        // Already irreducible: one class, T is a symmetric permutation of A.
        let a = m(2, &[0.0, 1.0, 1.0, 0.0]);
        let (t, d) = block_triangularize(&a);
        assert_eq!(d.classes.len(), 1);
        assert_eq!(t, a);

        let a = m(2, &[1.0, 0.0, 1.0, 1.0]);
        let (t, d) = block_triangularize(&a);
        assert_eq!(d.classes, vec![vec![0], vec![1]]);
        assert_eq!(t, m(2, &[1.0, 0.0, 1.0, 1.0]));

        // The 4-vertex SCC instance as a 0/1 matrix: two 2x2 diagonal blocks.
        let a = m(
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        let (t, d) = block_triangularize(&a);
        assert_eq!(d.classes, vec![vec![2, 3], vec![0, 1]]);
        // Upper-right block (rows 0..2, cols 2..4) must be zero.
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(t[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn path_queries() {
        let g = DirectedGraph::new(2, [(0, 1)]);
        assert!(has_path(&g, 0, 1).unwrap());
        assert!(!has_path(&g, 1, 0).unwrap());
        // Length >= 0 convention.
        assert!(has_path(&g, 1, 1).unwrap());

        let chain = DirectedGraph::new(3, [(0, 1), (1, 2)]);
        assert!(has_path(&chain, 0, 2).unwrap());
        assert!(!has_path(&chain, 2, 0).unwrap());

        assert!(has_path(&chain, 0, 7).is_err());
    }

    #[test]
    fn dimerization_transpose_path() {
        // J = [[-3, 1], [2, -2]]: G(J^t) has the edge v1 -> v2 since J21 > 0.
        let j = m(2, &[-3.0, 1.0, 2.0, -2.0]);
        let gt = digraph(&j.transpose());
        assert!(has_path(&gt, 0, 1).unwrap());
    }
}
