use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;

use super::Branch;
use crate::gnns::SearchOutcome;
use crate::meter::{DistanceMeter, SearchContext};
use crate::quantizer::{QuantizationResult, Quantizer};
use crate::rng::Rng;
use crate::store::VectorStore;
use crate::{Error, Result};

/// Split dimensions are drawn among this many highest-variance dimensions.
const TOP_VARIANCE_DIMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
enum KdNode {
    Split { dim: u32, threshold: f64, left: u32, right: u32 },
    Leaf { id: u32 },
}

/// Randomized KD-trees over a store. Every tree has one point per leaf.
#[derive(Debug, Clone)]
pub struct KdForest<'a> {
    store: &'a VectorStore,
    trees: Vec<Vec<KdNode>>,
}

impl<'a> KdForest<'a> {
    /// Builds `trees` trees. Each node splits at the mean of a dimension
    /// picked uniformly among the five with the largest variance over the
    /// node's points; points below the mean go left.
    pub fn build(store: &'a VectorStore, trees: usize, seed: u64) -> Result<Self> {
        if trees == 0 {
            return Err(Error::param("trees must be positive"));
        }
        if store.is_empty() {
            return Err(Error::EmptyStore);
        }
        let root_rng = Rng::new(seed);
        let trees = (0..trees)
            .map(|t| {
                let mut rng = root_rng.split(t as u64);
                let mut ids: Vec<u32> = (0..store.len() as u32).collect();
                let mut nodes = Vec::with_capacity(2 * store.len());
                build_node(store, &mut ids, &mut rng, &mut nodes);
                nodes
            })
            .collect();
        Ok(Self { store, trees })
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Leaf point ids of tree `t`, in tree order.
    pub fn leaf_ids(&self, t: usize) -> Vec<u32> {
        self.trees[t]
            .iter()
            .filter_map(|n| match n {
                KdNode::Leaf { id } => Some(*id),
                KdNode::Split { .. } => None,
            })
            .collect()
    }

    /// Best-bin-first search: one descent per tree, then repeatedly descend
    /// from the pending branch with the smallest key until `checks` distinct
    /// points were evaluated or nothing is pending. Split comparisons are
    /// scalar and not charged; each evaluated point is.
    pub fn search(&self, q: &[f32], checks: usize, meter: &mut DistanceMeter) -> Result<SearchOutcome> {
        if checks == 0 {
            return Err(Error::param("checks must be positive"));
        }
        self.store.check_dim(q)?;
        meter.prepare(self.store.len());
        meter.begin_query();
        let before = meter.evaluations();
        let mut state = BbfState {
            heap: BinaryHeap::new(),
            seq: 0,
            checked: vec![0u64; self.store.len().div_ceil(64)],
            checks: 0,
            best: (u32::MAX, f64::INFINITY),
            first: None,
        };
        for t in 0..self.trees.len() {
            if state.checks >= checks {
                break;
            }
            self.descend(t, 0, 0.0, q, &mut state, meter);
        }
        while state.checks < checks {
            let Some(b) = state.heap.pop() else { break };
            self.descend(b.tree as usize, b.node as usize, b.key, q, &mut state, meter);
        }
        Ok(SearchOutcome {
            results: vec![(state.best.0, libm::sqrt(state.best.1))],
            dist_evals: meter.evaluations() - before,
            hops: 0,
            start_id: state.first.unwrap_or(state.best.0),
        })
    }

    fn descend(&self, t: usize, mut node: usize, mindist: f64, q: &[f32], st: &mut BbfState, meter: &mut DistanceMeter) {
        let nodes = &self.trees[t];
        loop {
            match nodes[node] {
                KdNode::Leaf { id } => {
                    let (word, bit) = (id as usize / 64, 1u64 << (id % 64));
                    if st.checked[word] & bit == 0 {
                        st.checked[word] |= bit;
                        st.checks += 1;
                        st.first.get_or_insert(id);
                        let (d, _) = meter.squared(self.store, id as usize, q);
                        if d < st.best.1 || (d == st.best.1 && id < st.best.0) {
                            st.best = (id, d);
                        }
                    }
                    return;
                }
                KdNode::Split { dim, threshold, left, right } => {
                    let diff = f64::from(q[dim as usize]) - threshold;
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    st.heap.push(Branch { key: mindist + diff * diff, seq: st.seq, tree: t as u32, node: far });
                    st.seq += 1;
                    node = near as usize;
                }
            }
        }
    }
}

struct BbfState {
    heap: BinaryHeap<Branch>,
    seq: u32,
    checked: Vec<u64>,
    checks: usize,
    best: (u32, f64),
    first: Option<u32>,
}

fn build_node(store: &VectorStore, ids: &mut [u32], rng: &mut Rng, nodes: &mut Vec<KdNode>) -> u32 {
    let me = nodes.len() as u32;
    if ids.len() == 1 {
        nodes.push(KdNode::Leaf { id: ids[0] });
        return me;
    }
    nodes.push(KdNode::Leaf { id: u32::MAX });
    let dim = store.dim();
    let count = ids.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for &i in ids.iter() {
        for (m, v) in mean.iter_mut().zip(store.row(i as usize)) {
            *m += f64::from(*v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0f64; dim];
    for &i in ids.iter() {
        for ((s, v), m) in var.iter_mut().zip(store.row(i as usize)).zip(&mean) {
            let d = f64::from(*v) - m;
            *s += d * d;
        }
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    let split_dim = order[rng.below(TOP_VARIANCE_DIMS.min(dim))];
    let threshold = mean[split_dim];

    let mut lo = 0;
    for j in 0..ids.len() {
        if f64::from(store.row(ids[j] as usize)[split_dim]) < threshold {
            ids.swap(lo, j);
            lo += 1;
        }
    }
    if lo == 0 || lo == ids.len() {
        // all points equal along the split: halve by position
        lo = ids.len() / 2;
    }
    let (left_ids, right_ids) = ids.split_at_mut(lo);
    let left = build_node(store, left_ids, rng, nodes);
    let right = build_node(store, right_ids, rng, nodes);
    nodes[me as usize] = KdNode::Split { dim: split_dim as u32, threshold, left, right };
    me
}

/// A forest searched with a fixed `checks` budget.
#[derive(Debug, Clone, Copy)]
pub struct KdSearcher<'f, 'a> {
    pub forest: &'f KdForest<'a>,
    pub checks: usize,
}

impl Quantizer for KdSearcher<'_, '_> {
    fn vocabulary_size(&self) -> usize {
        self.forest.store.len()
    }

    fn dim(&self) -> usize {
        self.forest.store.dim()
    }

    fn quantize(&self, q: &[f32], _hint: Option<u32>, ctx: &mut SearchContext) -> Result<QuantizationResult> {
        let out = self.forest.search(q, self.checks, &mut ctx.meter)?;
        let (word, distance) = out.results[0];
        Ok(QuantizationResult { word, distance, dist_evals: out.dist_evals, hops: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::linear_nn;

    fn random_store(n: usize, dim: usize, seed: u64) -> VectorStore {
        let mut rng = Rng::new(seed);
        VectorStore::from_flat(dim, (0..n * dim).map(|_| rng.unit() as f32).collect()).unwrap()
    }

    #[test]
    fn leaves_partition_ids() {
        let s = random_store(500, 8, 1);
        let f = KdForest::build(&s, 3, 9).unwrap();
        for t in 0..3 {
            let mut ids = f.leaf_ids(t);
            ids.sort_unstable();
            assert_eq!(ids, (0..500).collect::<Vec<u32>>());
        }
    }

    #[test]
    fn full_budget_is_exact() {
        let s = random_store(400, 6, 2);
        let f = KdForest::build(&s, 2, 3).unwrap();
        let mut rng = Rng::new(4);
        let mut m = DistanceMeter::with_memo(400);
        for _ in 0..100 {
            let q: Vec<f32> = (0..6).map(|_| rng.unit() as f32).collect();
            let kd = f.search(&q, 400, &mut m).unwrap();
            assert_eq!(kd.results, linear_nn(&s, &q, &mut m).unwrap().results);
            assert_eq!(kd.dist_evals, 400);
        }
    }

    #[test]
    fn one_dimensional_first_descent_brackets_query() {
        let xs: Vec<f32> = (0..64).map(|i| i as f32).collect();
        let s = VectorStore::from_flat(1, xs).unwrap();
        let f = KdForest::build(&s, 1, 0).unwrap();
        let mut m = DistanceMeter::new();
        for q in [0.2f32, 13.4, 40.6, 63.0] {
            let out = f.search(&[q], 1, &mut m).unwrap();
            assert_eq!(out.dist_evals, 1);
            let hit = out.results[0].0 as f32;
            assert!((hit - q).abs() <= 1.0, "{q} -> {hit}");
        }
    }

    #[test]
    fn duplicate_points_still_build() {
        let s = VectorStore::from_flat(2, vec![1.0; 2 * 33]).unwrap();
        let f = KdForest::build(&s, 1, 0).unwrap();
        let mut ids = f.leaf_ids(0);
        ids.sort_unstable();
        assert_eq!(ids.len(), 33);
        let out = f.search(&[1.0, 1.0], 5, &mut DistanceMeter::new()).unwrap();
        assert_eq!(out.results[0].1, 0.0);
    }

    #[test]
    fn parameter_errors() {
        let s = random_store(10, 2, 0);
        assert!(KdForest::build(&s, 0, 0).is_err());
        let f = KdForest::build(&s, 1, 0).unwrap();
        assert!(f.search(&[0.0, 0.0], 0, &mut DistanceMeter::new()).is_err());
        assert!(f.search(&[0.0], 3, &mut DistanceMeter::new()).is_err());
    }
}
