//! Exact k-nearest-neighbor search over the training design. The tree is
//! built once per dataset and shared read-only across prediction threads.
//! Ties in distance are broken toward the lower point index so queries are
//! deterministic on gridded designs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::{LigpError, Result};

const LEAF_SIZE: usize = 24;

#[derive(Debug, Clone)]
enum Node {
    Split { dim: usize, value: f64, left: usize, right: usize },
    Leaf { start: usize, end: usize },
}

/// Static k-d tree over the rows of an N×d matrix.
#[derive(Debug, Clone)]
pub struct KdTree {
    data: Vec<f64>, // row-major copy for cache-friendly scans
    n: usize,
    d: usize,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// (squared distance, point index), ordered so the heap root is the worst
/// retained neighbor and equal distances favor the lower index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    idx: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .partial_cmp(&other.d2)
            .unwrap()
            .then_with(|| self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn build(x: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(LigpError::invalid("cannot index an empty design"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LigpError::invalid("design contains non-finite values"));
        }
        let mut data = vec![0.0; n * d];
        for i in 0..n {
            for k in 0..d {
                data[i * d + k] = x[(i, k)];
            }
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 2);
        build_node(&data, d, &mut order, 0, n, &mut nodes);
        Ok(Self { data, n, d, nodes, order })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn point(&self, idx: u32) -> &[f64] {
        let i = idx as usize * self.d;
        &self.data[i..i + self.d]
    }

    /// Indices of the k nearest rows to `query`, ascending by
    /// (distance, index).
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<u32>> {
        if query.len() != self.d {
            return Err(LigpError::invalid("query dimension mismatch"));
        }
        if k == 0 || k > self.n {
            return Err(LigpError::invalid(format!(
                "k must be in 1..={}, got {k}",
                self.n
            )));
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut out = heap.into_sorted_vec();
        debug_assert_eq!(out.len(), k);
        Ok(out.drain(..).map(|c| c.idx).collect())
    }

    fn search(&self, node: usize, query: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start..*end] {
                    let p = self.point(idx);
                    let mut d2 = 0.0;
                    for c in 0..self.d {
                        let diff = p[c] - query[c];
                        d2 += diff * diff;
                    }
                    let cand = Candidate { d2, idx };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let delta = query[*dim] - value;
                let (near, far) = if delta <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.search(near, query, k, heap);
                // Visit the far side unless every point there is strictly
                // worse than the current k-th; equal plane distance may hide
                // equal-distance points with lower indices.
                if heap.len() < k || delta * delta <= heap.peek().unwrap().d2 {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

fn build_node(
    data: &[f64],
    d: usize,
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let my_idx = nodes.len();
    nodes.push(Node::Leaf { start, end });
    let len = end - start;
    if len <= LEAF_SIZE {
        return my_idx;
    }

    // Split on the dimension with the widest spread.
    let mut best_dim = 0;
    let mut best_spread = -1.0;
    for c in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &idx in &order[start..end] {
            let v = data[idx as usize * d + c];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > best_spread {
            best_spread = hi - lo;
            best_dim = c;
        }
    }
    if best_spread <= 0.0 {
        return my_idx; // all points coincide; keep as leaf
    }

    let mid = len / 2;
    let slice = &mut order[start..end];
    slice.select_nth_unstable_by(mid, |&a, &b| {
        let va = data[a as usize * d + best_dim];
        let vb = data[b as usize * d + best_dim];
        va.partial_cmp(&vb).unwrap().then_with(|| a.cmp(&b))
    });
    let split_value = data[slice[mid] as usize * d + best_dim];

    let left = build_node(data, d, order, start, start + mid, nodes);
    let right = build_node(data, d, order, start + mid, end, nodes);
    nodes[my_idx] = Node::Split { dim: best_dim, value: split_value, left, right };
    my_idx
}

/// Brute-force reference: full sort by (distance, index).
pub fn brute_force_knn(x: &DMatrix<f64>, query: &[f64], k: usize) -> Vec<u32> {
    let mut all: Vec<Candidate> = (0..x.nrows())
        .map(|i| {
            let mut d2 = 0.0;
            for c in 0..x.ncols() {
                let diff = x[(i, c)] - query[c];
                d2 += diff * diff;
            }
            Candidate { d2, idx: i as u32 }
        })
        .collect();
    all.sort_unstable();
    all.truncate(k);
    all.iter().map(|c| c.idx).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn matches_brute_force_on_random_clouds() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for &(n, d, k) in &[(200usize, 2usize, 10usize), (1000, 4, 25), (500, 8, 60)] {
            let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
            let tree = KdTree::build(&x).unwrap();
            for _ in 0..20 {
                let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.2..1.2)).collect();
                assert_eq!(tree.knn(&q, k).unwrap(), brute_force_knn(&x, &q, k));
            }
        }
    }

    #[test]
    fn large_instance_exactness() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let x = DMatrix::from_fn(10_000, 8, |_, _| rng.gen_range(0.0..1.0));
        let tree = KdTree::build(&x).unwrap();
        let q: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert_eq!(tree.knn(&q, 150).unwrap(), brute_force_knn(&x, &q, 150));
    }

    #[test]
    fn deterministic_ties_on_grid() {
        // 5×5 integer grid queried from a symmetry point: many exact ties.
        let mut rows = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                rows.push([i as f64, j as f64]);
            }
        }
        let x = DMatrix::from_fn(25, 2, |r, c| rows[r][c]);
        let tree = KdTree::build(&x).unwrap();
        let got = tree.knn(&[2.0, 2.0], 9).unwrap();
        assert_eq!(got, brute_force_knn(&x, &[2.0, 2.0], 9));
        // 4 distance-1 points exist; the four distance-sqrt(2) diagonal
        // points tie and must appear in index order.
        assert_eq!(got[0], 12);
    }

    #[test]
    fn query_on_design_row_returns_it_first() {
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        let x = DMatrix::from_fn(300, 3, |_, _| rng.gen_range(0.0..1.0));
        let tree = KdTree::build(&x).unwrap();
        let q: Vec<f64> = (0..3).map(|c| x[(123, c)]).collect();
        assert_eq!(tree.knn(&q, 5).unwrap()[0], 123);
    }

    #[test]
    fn k_equals_n_returns_all_sorted() {
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        let x = DMatrix::from_fn(50, 2, |_, _| rng.gen_range(0.0..1.0));
        let tree = KdTree::build(&x).unwrap();
        let q = [0.5, 0.5];
        let got = tree.knn(&q, 50).unwrap();
        assert_eq!(got, brute_force_knn(&x, &q, 50));
        assert!(tree.knn(&q, 51).is_err());
    }
}
