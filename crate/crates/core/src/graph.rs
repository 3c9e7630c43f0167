//! Directed k-nearest-neighbor graphs over a [`VectorStore`].

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::meter::DistanceMeter;
use crate::store::VectorStore;
use crate::{Error, Result};

/// Node `i` links to its `k` nearest nodes (excluding itself), sorted by
/// ascending distance with ties broken by the lower id.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    n: usize,
    neighbors: Vec<u32>,
    distances: Vec<f32>,
}

/// `(squared distance, id)` ordered lexicographically; the tie rule everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub dist: f64,
    pub id: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the `k` smallest candidates offered to it.
#[derive(Debug, Clone)]
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    #[inline]
    pub fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if c < *top {
                *top = c;
            }
        }
    }

    pub fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

impl KnnGraph {
    /// Assembles a graph from per-node sorted candidate lists.
    pub(crate) fn from_rows(k: usize, rows: Vec<Vec<Candidate>>) -> Self {
        let n = rows.len();
        let mut neighbors = Vec::with_capacity(n * k);
        let mut distances = Vec::with_capacity(n * k);
        for row in rows {
            debug_assert_eq!(row.len(), k);
            for c in row {
                neighbors.push(c.id);
                distances.push(libm::sqrt(c.dist) as f32);
            }
        }
        Self { k, n, neighbors, distances }
    }

    /// Builds a graph from raw adjacency, validating shape, ranges,
    /// self-loops, duplicates and distance order.
    pub fn from_parts(k: usize, n: usize, neighbors: Vec<u32>, distances: Vec<f32>) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("graph degree must be positive"));
        }
        if n > 0 && k >= n {
            return Err(Error::param("graph degree must be below the node count"));
        }
        let expected = n.checked_mul(k).ok_or_else(|| Error::param("graph too large"))?;
        for len in [neighbors.len(), distances.len()] {
            if len != expected {
                return Err(Error::LengthMismatch { expected, found: len });
            }
        }
        let graph = Self { k, n, neighbors, distances };
        for i in 0..n {
            let ids = graph.neighbors(i);
            let ds = graph.neighbor_distances(i);
            for (j, &id) in ids.iter().enumerate() {
                if id as usize >= n {
                    return Err(Error::IdOutOfRange { id: id as usize, count: n });
                }
                if id as usize == i {
                    return Err(Error::param("self-loop in graph"));
                }
                if ids[..j].contains(&id) {
                    return Err(Error::param("duplicate neighbor in graph"));
                }
                if !ds[j].is_finite() || (j > 0 && ds[j] < ds[j - 1]) {
                    return Err(Error::param("neighbor distances not sorted"));
                }
            }
        }
        Ok(graph)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[node * self.k..(node + 1) * self.k]
    }

    pub fn neighbor_distances(&self, node: usize) -> &[f32] {
        &self.distances[node * self.k..(node + 1) * self.k]
    }

    pub fn raw_neighbors(&self) -> &[u32] {
        &self.neighbors
    }

    pub fn raw_distances(&self) -> &[f32] {
        &self.distances
    }

    /// View exposing only the first `e` neighbors of every node.
    pub fn truncate(&self, e: usize) -> Result<GraphView<'_>> {
        if e == 0 || e > self.k {
            return Err(Error::param("expansions must be in 1..=k"));
        }
        Ok(GraphView { graph: self, e })
    }

    pub fn full_view(&self) -> GraphView<'_> {
        GraphView { graph: self, e: self.k }
    }
}

/// A k-NN graph seen as its E-NN prefix graph. No data is copied.
#[derive(Debug, Clone, Copy)]
pub struct GraphView<'a> {
    graph: &'a KnnGraph,
    e: usize,
}

impl<'a> GraphView<'a> {
    #[inline]
    pub fn neighbors(&self, node: usize) -> &'a [u32] {
        &self.graph.neighbors(node)[..self.e]
    }

    pub fn degree(&self) -> usize {
        self.e
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn graph(&self) -> &'a KnnGraph {
        self.graph
    }
}

/// Exact k-NN graph by scanning every pair, one row at a time.
///
/// This is the reference builder: `n * (n - 1)` distance evaluations.
pub fn build_brute_force(store: &VectorStore, k: usize) -> Result<KnnGraph> {
    build_brute_force_metered(store, k, &mut DistanceMeter::new())
}

pub fn build_brute_force_metered(
    store: &VectorStore,
    k: usize,
    meter: &mut DistanceMeter,
) -> Result<KnnGraph> {
    let n = store.len();
    if k == 0 || k >= n {
        return Err(Error::param("graph degree must satisfy 1 <= k <= n - 1"));
    }
    meter.prepare(n);
    let rows = (0..n)
        .map(|i| {
            meter.begin_query();
            let q = store.row(i);
            let mut top = TopK::new(k);
            for j in (0..n).filter(|&j| j != i) {
                let (dist, _) = meter.squared(store, j, q);
                top.offer(Candidate { dist, id: j as u32 });
            }
            top.into_sorted()
        })
        .collect();
    Ok(KnnGraph::from_rows(k, rows))
}

/// Exact k-NN graph evaluating each unordered pair once: `n * (n - 1) / 2`
/// evaluations, charged to `meter`. Produces the same graph as
/// [`build_brute_force`] because the kernel is symmetric bit-for-bit.
pub fn build_symmetric(store: &VectorStore, k: usize, meter: &mut DistanceMeter) -> Result<KnnGraph> {
    let n = store.len();
    if k == 0 || k >= n {
        return Err(Error::param("graph degree must satisfy 1 <= k <= n - 1"));
    }
    let mut tops: Vec<TopK> = (0..n).map(|_| TopK::new(k)).collect();
    for i in 0..n {
        let a = store.row(i);
        for j in i + 1..n {
            let dist = meter.squared_free(store.row(j), a);
            tops[i].offer(Candidate { dist, id: j as u32 });
            tops[j].offer(Candidate { dist, id: i as u32 });
        }
    }
    Ok(KnnGraph::from_rows(k, tops.into_iter().map(TopK::into_sorted).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec;

    fn line(xs: &[f32]) -> VectorStore {
        VectorStore::from_flat(1, xs.to_vec()).unwrap()
    }

    fn random_store(n: usize, dim: usize, seed: u64) -> VectorStore {
        let mut rng = Rng::new(seed);
        VectorStore::from_flat(dim, (0..n * dim).map(|_| rng.unit() as f32).collect()).unwrap()
    }

    /// Full sort of every row of the pairwise distance matrix.
    fn sorted_rows_oracle(store: &VectorStore, k: usize) -> Vec<Vec<u32>> {
        (0..store.len())
            .map(|i| {
                let mut row: Vec<(f64, u32)> = (0..store.len())
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d: f64 = store
                            .row(i)
                            .iter()
                            .zip(store.row(j))
                            .map(|(a, b)| (f64::from(*a) - f64::from(*b)).powi(2))
                            .sum();
                        (d, j as u32)
                    })
                    .collect();
                row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                row.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect()
    }

    #[test]
    fn collinear_points() {
        let g = build_brute_force(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[1]);
        assert_eq!(g.neighbor_distances(2), &[2.0]);
    }

    #[test]
    fn complete_graph_when_k_is_n_minus_one() {
        let s = random_store(12, 3, 1);
        let g = build_brute_force(&s, 11).unwrap();
        for i in 0..12 {
            let mut ids = g.neighbors(i).to_vec();
            assert!(g.neighbor_distances(i).windows(2).all(|w| w[0] <= w[1]));
            ids.sort_unstable();
            let expected: Vec<u32> = (0..12).filter(|&j| j != i as u32).collect();
            assert_eq!(ids, expected);
        }
    }

    #[test]
    fn matches_pairwise_sort_oracle() {
        let s = random_store(200, 16, 5);
        let g = build_brute_force(&s, 10).unwrap();
        let oracle = sorted_rows_oracle(&s, 10);
        for (i, row) in oracle.iter().enumerate() {
            assert_eq!(g.neighbors(i), row.as_slice());
        }
    }

    #[test]
    fn ties_go_to_lower_id() {
        // node 1 is equidistant from 0 and 2
        let g = build_brute_force(&line(&[0.0, 1.0, 2.0, 10.0]), 1).unwrap();
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn symmetric_builder_agrees_and_counts_half_pairs() {
        let s = random_store(150, 8, 11);
        let mut meter = DistanceMeter::new();
        let g = build_symmetric(&s, 7, &mut meter).unwrap();
        assert_eq!(g, build_brute_force(&s, 7).unwrap());
        assert_eq!(meter.evaluations(), 150 * 149 / 2);
    }

    #[test]
    fn degree_errors() {
        let s = line(&[0.0, 1.0, 3.0]);
        assert!(build_brute_force(&s, 3).is_err());
        assert!(build_brute_force(&s, 0).is_err());
    }

    #[test]
    fn truncation_views() {
        let s = random_store(60, 4, 3);
        let g = build_brute_force(&s, 8).unwrap();
        assert!(g.truncate(0).is_err());
        assert!(g.truncate(9).is_err());
        let full = g.truncate(8).unwrap();
        let one = g.truncate(1).unwrap();
        let five = g.truncate(5).unwrap();
        for i in 0..60 {
            assert_eq!(full.neighbors(i), g.neighbors(i));
            assert_eq!(one.neighbors(i).len(), 1);
            assert_eq!(five.neighbors(i), &g.neighbors(i)[..5]);
        }
    }

    #[test]
    fn from_parts_validates() {
        assert!(KnnGraph::from_parts(1, 2, vec![1, 0], vec![1.0, 1.0]).is_ok());
        assert!(KnnGraph::from_parts(1, 2, vec![0, 0], vec![1.0, 1.0]).is_err());
        assert!(KnnGraph::from_parts(1, 2, vec![1, 5], vec![1.0, 1.0]).is_err());
        assert!(KnnGraph::from_parts(2, 3, vec![1, 2, 0, 2, 0, 1], vec![1.0, 0.5, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(KnnGraph::from_parts(1, 2, vec![1], vec![1.0]).is_err());
    }
}
