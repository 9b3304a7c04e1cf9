//! Exact k-nearest-neighbour search over a fixed point cloud.
//!
//! Neighbours are ordered by squared Euclidean distance, ties broken by the
//! smaller point index. The query point itself is never returned.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

const LEAF_SIZE: usize = 8;

/// Dimension above which the tree is skipped in favour of a linear scan.
pub const TREE_MAX_DIM: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.id.cmp(&other.id))
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

pub struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

struct Bounded {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl Bounded {
    fn worst(&self) -> Option<f64> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek().map(|c| c.dist2)
        }
    }

    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn into_sorted_ids(self) -> Vec<usize> {
        self.heap.into_sorted_vec().into_iter().map(|c| c.id).collect()
    }
}

impl<'a> KdTree<'a> {
    /// `points` is row-major with `dim` coordinates per point.
    pub fn new(points: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        let n = points.len() / dim;
        let mut tree = Self {
            points,
            dim,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points[i * self.dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (points, dim) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + best_dim].total_cmp(&points[b * dim + best_dim])
        });
        let value = points[self.order[mid] * dim + best_dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to point `query_id`, excluding itself.
    pub fn knn_of(&self, query_id: usize, k: usize) -> Vec<usize> {
        let mut acc = Bounded {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        };
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let q = self.point(query_id);
        self.search(0, q, query_id, &mut acc);
        acc.into_sorted_ids()
    }

    fn search(&self, node: usize, q: &[f64], skip: usize, acc: &mut Bounded) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i != skip {
                        acc.offer(Candidate {
                            dist2: dist2(q, self.point(i)),
                            id: i,
                        });
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, skip, acc);
                // equal distances must still be visited for the id tie-break
                match acc.worst() {
                    Some(w) if diff * diff > w => {}
                    _ => self.search(far, q, skip, acc),
                }
            }
        }
    }
}

/// Linear-scan kNN used for high-dimensional features.
pub fn brute_force_knn_of(points: &[f64], dim: usize, query_id: usize, k: usize) -> Vec<usize> {
    let n = points.len() / dim;
    let q = &points[query_id * dim..(query_id + 1) * dim];
    let mut acc = Bounded {
        k,
        heap: BinaryHeap::with_capacity(k + 1),
    };
    if k == 0 {
        return Vec::new();
    }
    for i in (0..n).filter(|&i| i != query_id) {
        acc.offer(Candidate {
            dist2: dist2(q, &points[i * dim..(i + 1) * dim]),
            id: i,
        });
    }
    acc.into_sorted_ids()
}
