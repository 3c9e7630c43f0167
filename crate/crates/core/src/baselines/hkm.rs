use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;

use super::Branch;
use crate::gnns::SearchOutcome;
use crate::meter::{DistanceMeter, SearchContext};
use crate::quantizer::{QuantizationResult, Quantizer};
use crate::rng::Rng;
use crate::store::VectorStore;
use crate::vocabulary::{nearest_centroid, plus_plus_seeds, update_means};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HkmParams {
    pub branching: usize,
    /// Lloyd iterations for every local k-means.
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
enum HkmNode {
    Internal { children: Vec<u32>, centroids: VectorStore },
    Leaf { ids: Vec<u32> },
}

/// Hierarchical k-means tree: nodes are split by a local k-means into at
/// most `branching` children until they hold no more than `branching` points.
#[derive(Debug, Clone)]
pub struct HkmTree<'a> {
    store: &'a VectorStore,
    nodes: Vec<HkmNode>,
    params: HkmParams,
}

impl<'a> HkmTree<'a> {
    pub fn build(store: &'a VectorStore, params: HkmParams) -> Result<Self> {
        if params.branching < 2 {
            return Err(Error::param("branching must be at least 2"));
        }
        if params.iterations == 0 {
            return Err(Error::param("iterations must be positive"));
        }
        if store.is_empty() {
            return Err(Error::EmptyStore);
        }
        let mut tree = Self { store, nodes: Vec::new(), params };
        let mut rng = Rng::new(params.seed);
        let ids: Vec<u32> = (0..store.len() as u32).collect();
        tree.build_node(ids, &mut rng);
        Ok(tree)
    }

    pub fn params(&self) -> &HkmParams {
        &self.params
    }

    /// All leaf point ids, depth-first.
    pub fn leaf_ids(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.store.len());
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                HkmNode::Leaf { ids } => out.extend_from_slice(ids),
                HkmNode::Internal { children, .. } => stack.extend(children.iter().rev().map(|&c| c as usize)),
            }
        }
        out
    }

    /// Checks every internal node's child centroids against the means of the
    /// points below each child; returns the largest absolute deviation.
    pub fn centroid_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for node in &self.nodes {
            if let HkmNode::Internal { children, centroids } = node {
                for (c, &child) in children.iter().enumerate() {
                    let ids = self.subtree_ids(child as usize);
                    for d in 0..self.store.dim() {
                        let mean = ids.iter().map(|&i| f64::from(self.store.row(i as usize)[d])).sum::<f64>()
                            / ids.len() as f64;
                        worst = worst.max((mean - f64::from(centroids.row(c)[d])).abs());
                    }
                }
            }
        }
        worst
    }

    fn subtree_ids(&self, node: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                HkmNode::Leaf { ids } => out.extend_from_slice(ids),
                HkmNode::Internal { children, .. } => stack.extend(children.iter().map(|&c| c as usize)),
            }
        }
        out
    }

    fn build_node(&mut self, ids: Vec<u32>, rng: &mut Rng) -> u32 {
        let me = self.nodes.len() as u32;
        if ids.len() <= self.params.branching {
            self.nodes.push(HkmNode::Leaf { ids });
            return me;
        }
        self.nodes.push(HkmNode::Leaf { ids: Vec::new() });
        let (groups, centroids) = self.split(&ids, rng);
        let children = groups.into_iter().map(|g| self.build_node(g, rng)).collect();
        self.nodes[me as usize] = HkmNode::Internal { children, centroids };
        me
    }

    /// Local k-means over `ids`; returns the non-empty groups and their means.
    fn split(&self, ids: &[u32], rng: &mut Rng) -> (Vec<Vec<u32>>, VectorStore) {
        let b = self.params.branching;
        let seeds = plus_plus_seeds(self.store, ids, b, rng, &mut DistanceMeter::new());
        let seeds: Vec<usize> = seeds.into_iter().map(|s| s as usize).collect();
        let mut centroids = self.store.select(&seeds);
        let mut assignments = vec![0u32; ids.len()];
        let mut counts = vec![0usize; b];
        for _ in 0..self.params.iterations {
            for (a, &i) in assignments.iter_mut().zip(ids) {
                *a = nearest_centroid(&centroids, self.store.row(i as usize)).0;
            }
            counts = update_means(self.store, ids, &assignments, &mut centroids);
        }
        let live: Vec<usize> = (0..b).filter(|&j| counts[j] > 0).collect();
        if live.len() < 2 {
            // coincident points: split by position so the recursion shrinks
            let chunk = ids.len().div_ceil(b);
            let groups: Vec<Vec<u32>> = ids.chunks(chunk).map(<[u32]>::to_vec).collect();
            let assignments: Vec<u32> =
                (0..ids.len()).map(|p| (p / chunk) as u32).collect();
            let mut means = self.store.select(&vec![ids[0] as usize; groups.len()]);
            update_means(self.store, ids, &assignments, &mut means);
            return (groups, means);
        }
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); b];
        for (&a, &i) in assignments.iter().zip(ids) {
            groups[a as usize].push(i);
        }
        let groups = live.iter().map(|&j| core::mem::take(&mut groups[j])).collect();
        (groups, centroids.select(&live))
    }

    /// Priority search: descend to the closest child at every level, queueing
    /// the siblings by centroid distance; then pop and descend until `checks`
    /// leaf points were evaluated. Leaves are scanned whole. Both centroid and
    /// leaf-point distances are charged.
    pub fn search(&self, q: &[f32], checks: usize, meter: &mut DistanceMeter) -> Result<SearchOutcome> {
        if checks == 0 {
            return Err(Error::param("checks must be positive"));
        }
        self.store.check_dim(q)?;
        meter.prepare(self.store.len());
        meter.begin_query();
        let before = meter.evaluations();
        let mut heap = BinaryHeap::new();
        let mut seq = 0u32;
        let mut checked = 0usize;
        let mut best = (u32::MAX, f64::INFINITY);
        let mut node = Some(0usize);
        while let Some(mut n) = node {
            loop {
                match &self.nodes[n] {
                    HkmNode::Leaf { ids } => {
                        for &id in ids {
                            let (d, _) = meter.squared(self.store, id as usize, q);
                            if d < best.1 || (d == best.1 && id < best.0) {
                                best = (id, d);
                            }
                        }
                        checked += ids.len();
                        break;
                    }
                    HkmNode::Internal { children, centroids } => {
                        let dists: Vec<f64> = centroids.rows().map(|c| meter.squared_free(c, q)).collect();
                        let mut closest = 0;
                        for (c, d) in dists.iter().enumerate() {
                            if *d < dists[closest] {
                                closest = c;
                            }
                        }
                        for (c, &d) in dists.iter().enumerate().filter(|&(c, _)| c != closest) {
                            heap.push(Branch { key: d, seq, tree: 0, node: children[c] });
                            seq += 1;
                        }
                        n = children[closest] as usize;
                    }
                }
            }
            node = if checked < checks { heap.pop().map(|b| b.node as usize) } else { None };
        }
        Ok(SearchOutcome {
            results: vec![(best.0, libm::sqrt(best.1))],
            dist_evals: meter.evaluations() - before,
            hops: 0,
            start_id: best.0,
        })
    }
}

/// A tree searched with a fixed `checks` budget.
#[derive(Debug, Clone, Copy)]
pub struct HkmSearcher<'t, 'a> {
    pub tree: &'t HkmTree<'a>,
    pub checks: usize,
}

impl Quantizer for HkmSearcher<'_, '_> {
    fn vocabulary_size(&self) -> usize {
        self.tree.store.len()
    }

    fn dim(&self) -> usize {
        self.tree.store.dim()
    }

    fn quantize(&self, q: &[f32], _hint: Option<u32>, ctx: &mut SearchContext) -> Result<QuantizationResult> {
        let out = self.tree.search(q, self.checks, &mut ctx.meter)?;
        let (word, distance) = out.results[0];
        Ok(QuantizationResult { word, distance, dist_evals: out.dist_evals, hops: 0 })
    }
}
