//! Instrumented competitors for graph search: exact linear scan, a
//! randomized KD-tree forest with best-bin-first search, and a hierarchical
//! k-means tree with priority search.

mod hkm;
mod kdtree;
mod linear;

use core::cmp::Ordering;

pub use hkm::{HkmParams, HkmSearcher, HkmTree};
pub use kdtree::{KdForest, KdSearcher};
pub use linear::{linear_nn, LinearScan};

/// Pending branch in a best-bin-first queue: min-ordered by key, then by
/// push order so the search is deterministic.
#[derive(Debug, Clone, Copy)]
struct Branch {
    key: f64,
    seq: u32,
    tree: u32,
    node: u32,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Branch {}

impl Ord for Branch {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
