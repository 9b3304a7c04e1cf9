//! Unified kNN graph construction: observation sets, per-acquisition edge
//! sets, their union, and the adjacency/degree/Laplacian views with the
//! observed/missing block partition.
//!
//! Node ids are zero-based throughout the library.

mod kdtree;

pub use kdtree::{brute_force_knn_of, KdTree, TREE_MAX_DIM};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::tensor::FiberMatrix;

/// Ids of fully observed fibers, with the complement derived on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservationSet {
    n: usize,
    observed: Vec<usize>,
}

impl ObservationSet {
    /// `observed` may be unsorted; duplicates or out-of-range ids are errors.
    pub fn new(n: usize, mut observed: Vec<usize>) -> Result<Self> {
        observed.sort_unstable();
        for w in observed.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidParameter(format!("duplicate observed id {}", w[0])));
            }
        }
        if let Some(&last) = observed.last() {
            if last >= n {
                return Err(Error::NodeOutOfRange { id: last, n });
            }
        }
        Ok(Self { n, observed })
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            observed: (0..n).collect(),
        }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self {
            n: mask.len(),
            observed: mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Observed ids, strictly increasing.
    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    /// Missing ids `{0..n} \ observed`, strictly increasing.
    pub fn missing(&self) -> Vec<usize> {
        let mask = self.mask();
        (0..self.n).filter(|&i| !mask[i]).collect()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &i in &self.observed {
            m[i] = true;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.n - self.observed.len()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.observed.binary_search(&id).is_ok()
    }
}

/// Undirected, loop-free edge set with pairs stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    /// Self-loops are dropped and pairs canonicalised and deduplicated.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (u, v) in pairs {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self { n, edges })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted canonical pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }
}

/// kNN edges among the observed fibers of one acquisition.
///
/// Each observed node is joined to its `k` nearest observed nodes by
/// Euclidean distance over the rows of `features`; the directed relation is
/// symmetrised by union. Rows of unobserved nodes are never read.
pub fn knn_edges(features: &FiberMatrix, observed: &ObservationSet, k: usize) -> Result<EdgeSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if observed.n() != features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "observation set over {} nodes, features have {} rows",
            observed.n(),
            features.rows()
        )));
    }
    if observed.len() < k + 1 {
        return Err(Error::TooFewObserved {
            observed: observed.len(),
            required: k + 1,
        });
    }
    let ids = observed.observed();
    knn_edges_among(&features.select_rows(ids), ids, observed.n(), k)
}

/// kNN edges where row `a` of `local` holds the features of node `ids[a]`.
pub fn knn_edges_among(local: &FiberMatrix, ids: &[usize], n: usize, k: usize) -> Result<EdgeSet> {
    if local.rows() != ids.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} node ids",
            local.rows(),
            ids.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if ids.len() < k + 1 {
        return Err(Error::TooFewObserved {
            observed: ids.len(),
            required: k + 1,
        });
    }
    if local.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kNN features"));
    }
    let dim = local.cols();
    let mut pairs = Vec::with_capacity(ids.len() * k);
    if dim == 0 {
        return Err(Error::InvalidParameter("features need at least one channel".into()));
    }
    if dim <= TREE_MAX_DIM {
        let tree = KdTree::new(local.as_slice(), dim);
        for (a, &p) in ids.iter().enumerate() {
            pairs.extend(tree.knn_of(a, k).into_iter().map(|b| (p, ids[b])));
        }
    } else {
        for (a, &p) in ids.iter().enumerate() {
            pairs.extend(
                brute_force_knn_of(local.as_slice(), dim, a, k)
                    .into_iter()
                    .map(|b| (p, ids[b])),
            );
        }
    }
    EdgeSet::new(n, pairs)
}

/// Set union of edge sets over the same node count.
pub fn union_edges(sets: &[EdgeSet]) -> Result<EdgeSet> {
    let n = match sets.first() {
        Some(s) => s.n,
        None => return Err(Error::InvalidParameter("no edge sets to combine".into())),
    };
    if let Some(bad) = sets.iter().find(|s| s.n != n) {
        return Err(Error::ShapeMismatch(format!(
            "edge sets over {} and {} nodes",
            n, bad.n
        )));
    }
    let mut edges: Vec<(usize, usize)> = sets.iter().flat_map(|s| s.edges.iter().copied()).collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(EdgeSet { n, edges })
}

/// Symmetric adjacency without self-loops plus degree and Laplacian views.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    adjacency: CsrMatrix,
    degree: Vec<f64>,
    zero_degree: Vec<usize>,
}

/// Unweighted graph with `A_ij = 1` for each edge.
pub fn build_graph(e: &EdgeSet) -> SparseGraph {
    SparseGraph::from_weighted_edges(e.n, e.edges.iter().map(|&(u, v)| (u, v, 1.0)))
        .expect("edge set invariants guarantee a valid graph")
}

impl SparseGraph {
    /// Weighted construction; each `(u, v, w)` sets `A_uv = A_vu = w`.
    pub fn from_weighted_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut trip = Vec::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::NodeOutOfRange { id: u.max(v), n });
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at node {u}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!("edge weight {w}")));
            }
            trip.push((u, v, w));
            trip.push((v, u, w));
        }
        // dedup by keeping a single orientation pair per edge
        trip.sort_unstable_by_key(|t| (t.0, t.1));
        trip.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        let adjacency = CsrMatrix::from_triplets(n, n, trip);
        let degree: Vec<f64> = (0..n).map(|i| adjacency.row_sum(i)).collect();
        let zero_degree = (0..n).filter(|&i| degree[i] == 0.0).collect();
        Ok(Self {
            adjacency,
            degree,
            zero_degree,
        })
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Diagonal of `D`.
    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Nodes with no incident edge.
    pub fn zero_degree_nodes(&self) -> &[usize] {
        &self.zero_degree
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adjacency.row(i).0
    }

    /// `L = D - A`, built on each call.
    pub fn laplacian(&self) -> CsrMatrix {
        let n = self.n();
        let mut trip: Vec<(usize, usize, f64)> = self.adjacency.triplets().map(|(i, j, v)| (i, j, -v)).collect();
        trip.extend((0..n).map(|i| (i, i, self.degree[i])));
        CsrMatrix::from_triplets(n, n, trip)
    }

    /// Connected-component label of every node, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

/// Blocks of `A`, `D` and `L` under the (observed, missing) node ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianBlocks {
    /// Observed ids, increasing; row/column order of every `_o` index.
    pub omega: Vec<usize>,
    /// Missing ids, increasing; row/column order of every `_c` index.
    pub omega_c: Vec<usize>,
    pub a_oo: CsrMatrix,
    pub a_oc: CsrMatrix,
    pub a_co: CsrMatrix,
    pub a_cc: CsrMatrix,
    pub l_co: CsrMatrix,
    pub l_cc: CsrMatrix,
    pub d_oo: Vec<f64>,
    pub d_cc: Vec<f64>,
}

pub fn partition_blocks(g: &SparseGraph, omega: &ObservationSet) -> Result<LaplacianBlocks> {
    if omega.n() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "observation set over {} nodes, graph has {}",
            omega.n(),
            g.n()
        )));
    }
    let o = omega.observed().to_vec();
    let c = omega.missing();
    let a = g.adjacency();
    let l = g.laplacian();
    Ok(LaplacianBlocks {
        a_oo: a.submatrix(&o, &o),
        a_oc: a.submatrix(&o, &c),
        a_co: a.submatrix(&c, &o),
        a_cc: a.submatrix(&c, &c),
        l_co: l.submatrix(&c, &o),
        l_cc: l.submatrix(&c, &c),
        d_oo: o.iter().map(|&i| g.degrees()[i]).collect(),
        d_cc: c.iter().map(|&i| g.degrees()[i]).collect(),
        omega: o,
        omega_c: c,
    })
}

impl LaplacianBlocks {
    /// `L` permuted to (observed, missing) order, rebuilt from the blocks.
    pub fn reassemble_laplacian(&self) -> CsrMatrix {
        let no = self.omega.len();
        let n = no + self.omega_c.len();
        let mut trip = Vec::new();
        for (i, &d) in self.d_oo.iter().enumerate() {
            trip.push((i, i, d));
        }
        for (i, &d) in self.d_cc.iter().enumerate() {
            trip.push((no + i, no + i, d));
        }
        let mut push = |m: &CsrMatrix, ro: usize, co: usize| {
            for (i, j, v) in m.triplets() {
                trip.push((ro + i, co + j, -v));
            }
        };
        push(&self.a_oo, 0, 0);
        push(&self.a_oc, 0, no);
        push(&self.a_co, no, 0);
        push(&self.a_cc, no, no);
        CsrMatrix::from_triplets(n, n, trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> FiberMatrix {
        FiberMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn knn_three_points() {
        let f = col(&[0.0, 1.0, 10.0]);
        let e = knn_edges(&f, &ObservationSet::full(3), 1).unwrap();
        assert_eq!(e.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn knn_two_components() {
        let f = col(&[0.0, 1.0, 10.0, 11.0]);
        let e = knn_edges(&f, &ObservationSet::full(4), 1).unwrap();
        assert_eq!(e.edges(), &[(0, 1), (2, 3)]);
    }

    #[test]
    fn knn_complete_when_k_is_all_others() {
        let f = col(&[3.0, -1.0, 4.0, 1.5, 9.0]);
        let e = knn_edges(&f, &ObservationSet::full(5), 4).unwrap();
        assert_eq!(e.len(), 10);
    }

    #[test]
    fn knn_ignores_unobserved_rows() {
        let f = col(&[0.0, 0.1, 5.0, 6.0]);
        let obs = ObservationSet::new(4, vec![0, 2, 3]).unwrap();
        let e = knn_edges(&f, &obs, 1).unwrap();
        assert!(e.edges().iter().all(|&(u, v)| u != 1 && v != 1));
    }

    #[test]
    fn knn_errors() {
        let f = col(&[0.0, 1.0]);
        assert_eq!(
            knn_edges(&f, &ObservationSet::full(2), 2),
            Err(Error::TooFewObserved {
                observed: 2,
                required: 3
            })
        );
    }

    #[test]
    fn union_basics() {
        let a = EdgeSet::new(3, [(0, 1)]).unwrap();
        let b = EdgeSet::new(3, [(2, 1)]).unwrap();
        assert_eq!(union_edges(&[a.clone(), a.clone()]).unwrap(), a);
        assert_eq!(union_edges(&[a, b]).unwrap().edges(), &[(0, 1), (1, 2)]);
        assert!(union_edges(&[EdgeSet::empty(2), EdgeSet::empty(3)]).is_err());
    }

    #[test]
    fn path_graph_views() {
        let g = build_graph(&EdgeSet::new(3, [(0, 1), (1, 2)]).unwrap());
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        let l = g.laplacian();
        assert_eq!(l.get(1, 1), 2.0);
        for i in 0..3 {
            assert_eq!(l.row_sum(i), 0.0);
        }
    }

    #[test]
    fn empty_graph_flags_everything() {
        let g = build_graph(&EdgeSet::empty(4));
        assert_eq!(g.zero_degree_nodes(), &[0, 1, 2, 3]);
        assert_eq!(g.adjacency().nnz(), 0);
    }

    #[test]
    fn path_blocks() {
        let g = build_graph(&EdgeSet::new(3, [(0, 1), (1, 2)]).unwrap());
        let b = partition_blocks(&g, &ObservationSet::new(3, vec![0, 2]).unwrap()).unwrap();
        assert_eq!(b.l_cc.to_dense(), vec![2.0]);
        assert_eq!(b.l_co.to_dense(), vec![-1.0, -1.0]);
        let all = partition_blocks(&g, &ObservationSet::full(3)).unwrap();
        assert_eq!((all.l_cc.nrows(), all.l_cc.ncols()), (0, 0));
    }

    #[test]
    fn edge_set_canonical() {
        let e = EdgeSet::new(4, [(3, 1), (1, 3), (2, 2)]).unwrap();
        assert_eq!(e.edges(), &[(1, 3)]);
        assert!(EdgeSet::new(2, [(0, 2)]).is_err());
    }
}
