//! Undirected connected graphs and the matrices derived from them.
//!
//! Node indices are zero-based in the Rust API. Config files and printed
//! output use one-based labels.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{kron_identity, sym_eigenvalues, sym_pinv};

/// Edge list of the five-agent example network, one-based.
pub const FIG1_EDGES: [(usize, usize); 7] = [(1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (3, 5), (4, 5)];

/// An undirected, unweighted, connected graph without self-loops or multi-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    /// Edges stored as `(lo, hi)` with `lo < hi`, in insertion order.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Build a graph from zero-based edges, rejecting self-loops, duplicates,
    /// out-of-range indices and disconnected node sets.
    pub fn new(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut seen = BTreeSet::new();
        let mut stored = Vec::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); n_nodes];
        for &(i, j) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
            stored.push(key);
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let g = Graph {
            n_nodes,
            edges: stored,
            neighbors,
        };
        let components = g.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(g)
    }

    /// Same as [`Graph::new`] but with one-based node labels.
    pub fn from_one_based(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut zero = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}): one-based labels start at 1"
                )));
            }
            zero.push((i - 1, j - 1));
        }
        Self::new(n_nodes, &zero)
    }

    /// The five-node network used by the logistic-regression experiment.
    pub fn fig1() -> Self {
        Self::from_one_based(5, &FIG1_EDGES).expect("fig1 graph is valid")
    }

    /// Resolve a built-in graph by name: `fig1`, `path<N>`, `cycle<N>`, `complete<N>`.
    pub fn named(name: &str) -> Result<Self> {
        let parse_n = |prefix: &str| -> Option<usize> { name.strip_prefix(prefix)?.parse().ok() };
        if name == "fig1" {
            return Ok(Self::fig1());
        }
        if let Some(n) = parse_n("path") {
            let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            return Self::new(n, &edges);
        }
        if let Some(n) = parse_n("cycle") {
            if n < 3 {
                return Err(Error::InvalidGraph("cycle needs at least 3 nodes".into()));
            }
            let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            return Self::new(n, &edges);
        }
        if let Some(n) = parse_n("complete") {
            let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
            return Self::new(n, &edges);
        }
        Err(Error::InvalidGraph(format!("unknown graph name '{name}'")))
    }

    /// Random connected graph: a random spanning tree plus each remaining
    /// pair independently with probability `p_extra`.
    pub fn random_connected<R: Rng + ?Sized>(n_nodes: usize, p_extra: f64, rng: &mut R) -> Self {
        assert!(n_nodes >= 1);
        let mut edges = BTreeSet::new();
        for i in 1..n_nodes {
            let j = rng.random_range(0..i);
            edges.insert((j, i));
        }
        for i in 0..n_nodes {
            for j in (i + 1)..n_nodes {
                if !edges.contains(&(i, j)) && rng.random_bool(p_extra) {
                    edges.insert((i, j));
                }
            }
        }
        let edges: Vec<_> = edges.into_iter().collect();
        Self::new(n_nodes, &edges).expect("spanning tree keeps the graph connected")
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(lo, hi)` pairs, zero-based.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted one-hop neighbours of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n_nodes).map(|i| self.degree(i)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// `L = diag(A 1) - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency();
        for i in 0..self.n_nodes {
            l[(i, i)] = self.degree(i) as f64;
        }
        l
    }

    /// Signed N×M incidence matrix. Column k has +1 at the lower-index
    /// endpoint of edge k and -1 at the higher one.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n_nodes, self.edges.len());
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            b[(i, k)] = 1.0;
            b[(j, k)] = -1.0;
        }
        b
    }

    pub fn matrices(&self) -> GraphMatrices {
        GraphMatrices::new(self)
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n_nodes];
        let mut count = 0;
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for &w in &self.neighbors[u] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

/// Laplacian, incidence, agreement projection and spectral constants of a graph.
#[derive(Debug, Clone)]
pub struct GraphMatrices {
    pub laplacian: DMatrix<f64>,
    pub incidence: DMatrix<f64>,
    /// `Π_N = I - 11ᵀ/N`, computed as `L L⁺`.
    pub projection: DMatrix<f64>,
    /// Laplacian eigenvalues, ascending; the first is zero.
    pub eigenvalues: Vec<f64>,
    /// Smallest nonzero Laplacian eigenvalue (algebraic connectivity).
    pub lambda2: f64,
    /// Largest Laplacian eigenvalue.
    pub lambda_n: f64,
    /// `1 / (2 lambda2)`, the largest eigenvalue of `½ (BᵀB)⁺`.
    pub lambda_bar: f64,
}

impl GraphMatrices {
    fn new(g: &Graph) -> Self {
        let laplacian = g.laplacian();
        let incidence = g.incidence();
        let pinv = sym_pinv(&laplacian);
        let projection = &laplacian * &pinv;
        let eigenvalues: Vec<f64> = sym_eigenvalues(&laplacian).iter().copied().collect();
        let n = eigenvalues.len();
        // A single node has no nonzero eigenvalue; treat its consensus as trivial.
        let lambda2 = if n > 1 { eigenvalues[1] } else { f64::INFINITY };
        let lambda_n = eigenvalues[n - 1];
        GraphMatrices {
            laplacian,
            incidence,
            projection,
            eigenvalues,
            lambda2,
            lambda_n,
            lambda_bar: 1.0 / (2.0 * lambda2),
        }
    }

    /// Number of Laplacian eigenvalues above `1e-10 * lambda_n`.
    pub fn laplacian_rank(&self) -> usize {
        let cutoff = 1e-10 * self.lambda_n.abs().max(f64::MIN_POSITIVE);
        self.eigenvalues.iter().filter(|&&v| v > cutoff).count()
    }

    /// Largest eigenvalue of `½ (BᵀB)⁺` computed directly from the incidence
    /// matrix, independently of `lambda_bar`.
    pub fn lambda_bar_from_incidence(&self) -> f64 {
        let btb = self.incidence.transpose() * &self.incidence;
        let half_pinv = sym_pinv(&btb) * 0.5;
        sym_eigenvalues(&half_pinv)
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

/// Kronecker lift `mat ⊗ I_d` of an N×N graph matrix to the stacked Nd space.
pub fn stack(mat: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    assert!(d >= 1, "stack dimension must be positive");
    kron_identity(mat, d)
}

/// Pretty-prints a matrix with integer entries where possible.
pub struct MatrixDisplay<'a>(pub &'a DMatrix<f64>);

impl fmt::Display for MatrixDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.0;
        for r in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols())
                .map(|c| {
                    let v = m[(r, c)];
                    if v == v.round() && v.abs() < 1e15 {
                        format!("{:>4}", v as i64)
                    } else {
                        format!("{v:>10.6}")
                    }
                })
                .collect();
            writeln!(f, "[{} ]", row.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones_projection(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
    }

    #[test]
    fn fig1_laplacian_matches_printed_matrix() {
        let g = Graph::fig1();
        let expected = DMatrix::from_row_slice(
            5,
            5,
            &[
                4., -1., -1., -1., -1., //
                -1., 2., -1., 0., 0., //
                -1., -1., 3., 0., -1., //
                -1., 0., 0., 2., -1., //
                -1., 0., -1., -1., 3.,
            ],
        );
        assert_eq!(g.laplacian(), expected);
        assert_eq!(g.degrees(), vec![4, 2, 3, 2, 3]);
    }

    #[test]
    fn k2_closed_form() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let m = g.matrices();
        assert_eq!(m.laplacian, DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]));
        let p = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(max_abs_diff(&m.projection, &p) < 1e-12);
        assert!((m.lambda2 - 2.0).abs() < 1e-12);
        assert!((m.lambda_bar - 0.25).abs() < 1e-12);
    }

    #[test]
    fn three_cycle_spectrum() {
        // Oracle: L = 3I - J has eigenvalues 0 (on 1) and 3 (on 1⊥).
        let m = Graph::named("cycle3").unwrap().matrices();
        assert!((m.lambda2 - 3.0).abs() < 1e-12);
        assert!((m.lambda_n - 3.0).abs() < 1e-12);
        assert!((m.lambda_bar - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(Graph::new(3, &[(0, 0)]), Err(Error::InvalidGraph(_))));
        assert!(matches!(
            Graph::new(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(matches!(Graph::new(3, &[(0, 3)]), Err(Error::InvalidGraph(_))));
        assert!(matches!(
            Graph::from_one_based(3, &[(0, 1)]),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn rejects_disconnected() {
        let err = Graph::from_one_based(3, &[(1, 2)]).unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2 }));
    }

    #[test]
    fn stack_examples() {
        let k2 = Graph::new(2, &[(0, 1)]).unwrap().matrices();
        assert!(max_abs_diff(&stack(&k2.projection, 1), &k2.projection) < 1e-15);

        let lifted = stack(&k2.laplacian, 2);
        let i2 = DMatrix::<f64>::identity(2, 2);
        let mut expected = DMatrix::zeros(4, 4);
        expected.view_mut((0, 0), (2, 2)).copy_from(&i2);
        expected.view_mut((2, 2), (2, 2)).copy_from(&i2);
        expected.view_mut((0, 2), (2, 2)).copy_from(&(-&i2));
        expected.view_mut((2, 0), (2, 2)).copy_from(&(-&i2));
        assert_eq!(lifted, expected);

        let big = stack(&Graph::fig1().laplacian(), 5);
        assert_eq!(big.shape(), (25, 25));
        for r in 0..25 {
            assert_eq!(big.row(r).sum(), 0.0);
        }
    }

    #[test]
    fn random_graph_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(2..=10);
            let g = Graph::random_connected(n, 0.3, &mut rng);
            let m = g.matrices();
            let ones = nalgebra::DVector::from_element(n, 1.0);
            assert!((&m.laplacian * &ones).amax() <= 1e-12 * n as f64);
            let bbt = &m.incidence * m.incidence.transpose();
            assert!(max_abs_diff(&bbt, &m.laplacian) < 1e-12);
            assert!(max_abs_diff(&m.projection, &ones_projection(n)) < 1e-10);
            assert_eq!(m.laplacian_rank(), n - 1);
            assert!((m.lambda_bar - m.lambda_bar_from_incidence()).abs() < 1e-10);
        }
    }

    #[test]
    fn named_graphs() {
        assert_eq!(Graph::named("path4").unwrap().n_edges(), 3);
        assert_eq!(Graph::named("complete4").unwrap().n_edges(), 6);
        assert!(Graph::named("nope").is_err());
    }
}
