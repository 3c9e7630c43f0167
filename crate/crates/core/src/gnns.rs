//! Graph nearest neighbor search (GNNS).
//!
//! Each restart picks a start node (the caller's hint on the first restart,
//! otherwise a uniformly random node) and walks greedily: evaluate the first
//! `E` neighbors of the current node and move to the closest. A walk ends
//! after `T` moves when `steps` is set, otherwise at the first node that no
//! examined neighbor strictly improves on. Every node whose distance was
//! evaluated joins one candidate pool, and the best `K` of the pool are
//! returned.
//!
//! Distances are memoized per query, so a node is charged once no matter how
//! many walks touch it, and a query never costs more than a linear scan.

use alloc::vec::Vec;

use crate::graph::{Candidate, GraphView, KnnGraph};
use crate::meter::SearchContext;
use crate::quantizer::{QuantizationResult, Quantizer};
use crate::store::VectorStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GnnsParams {
    /// Neighbors to return (K).
    pub results: usize,
    /// Walks per query (R).
    pub restarts: usize,
    /// Greedy moves per walk (T); `None` walks to a local minimum.
    pub steps: Option<usize>,
    /// Neighbors examined per move (E), at most the graph degree.
    pub expansions: usize,
    pub seed: u64,
}

impl GnnsParams {
    /// Single-result, single-walk, local-minimum search examining `expansions` neighbors.
    pub fn quantization(expansions: usize, seed: u64) -> Self {
        Self { results: 1, restarts: 1, steps: None, expansions, seed }
    }

    pub fn validate(&self, graph: &KnnGraph) -> Result<()> {
        if self.results == 0 {
            return Err(Error::param("K must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::param("R must be positive"));
        }
        if self.steps == Some(0) {
            return Err(Error::param("T must be positive when set"));
        }
        if self.expansions == 0 || self.expansions > graph.k() {
            return Err(Error::param("E must be in 1..=k"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// `(word id, distance)` ascending by distance, ties by lower id.
    pub results: Vec<(u32, f64)>,
    pub dist_evals: u64,
    pub hops: u32,
    pub start_id: u32,
}

/// Runs one GNNS query. The meter memo is reset first; `dist_evals` is the
/// meter delta for this query.
pub fn search(
    view: GraphView<'_>,
    store: &VectorStore,
    q: &[f32],
    params: &GnnsParams,
    start: Option<usize>,
    ctx: &mut SearchContext,
) -> Result<SearchOutcome> {
    let n = view.len();
    if n == 0 || store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if store.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: store.len() });
    }
    store.check_dim(q)?;
    if let Some(s) = start {
        store.check_id(s)?;
    }
    if params.results == 0 || params.restarts == 0 || params.steps == Some(0) {
        return Err(Error::param("K, R and T must be positive"));
    }

    ctx.meter.prepare(n);
    ctx.meter.begin_query();
    let before = ctx.meter.evaluations();
    let mut pool: Vec<Candidate> = Vec::new();
    let mut hops = 0u32;
    let mut first_start = 0u32;

    for restart in 0..params.restarts {
        let mut current = match (restart, start) {
            (0, Some(s)) => s,
            _ => ctx.rng.uniform_node(n)?,
        };
        if restart == 0 {
            first_start = current as u32;
        }
        let (mut current_dist, fresh) = ctx.meter.squared(store, current, q);
        if fresh {
            pool.push(Candidate { dist: current_dist, id: current as u32 });
        }
        let mut moves = 0usize;
        loop {
            if params.steps.is_some_and(|t| moves >= t) {
                break;
            }
            let mut best: Option<Candidate> = None;
            for &nb in view.neighbors(current) {
                let (dist, fresh) = ctx.meter.squared(store, nb as usize, q);
                let c = Candidate { dist, id: nb };
                if fresh {
                    pool.push(c);
                }
                if best.is_none_or(|b| c < b) {
                    best = Some(c);
                }
            }
            let Some(best) = best else { break };
            if params.steps.is_none() && best.dist >= current_dist {
                break;
            }
            current = best.id as usize;
            current_dist = best.dist;
            moves += 1;
            hops += 1;
        }
    }

    let keep = params.results.min(pool.len());
    if keep < pool.len() {
        pool.select_nth_unstable(keep);
        pool.truncate(keep);
    }
    pool.sort_unstable();
    Ok(SearchOutcome {
        results: pool.iter().map(|c| (c.id, libm::sqrt(c.dist))).collect(),
        dist_evals: ctx.meter.evaluations() - before,
        hops,
        start_id: first_start,
    })
}

/// A vocabulary plus its graph, searched with fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct GnnsIndex<'a> {
    words: &'a VectorStore,
    graph: &'a KnnGraph,
    params: GnnsParams,
}

impl<'a> GnnsIndex<'a> {
    pub fn new(words: &'a VectorStore, graph: &'a KnnGraph, params: GnnsParams) -> Result<Self> {
        if words.len() != graph.len() {
            return Err(Error::LengthMismatch { expected: graph.len(), found: words.len() });
        }
        params.validate(graph)?;
        Ok(Self { words, graph, params })
    }

    pub fn params(&self) -> &GnnsParams {
        &self.params
    }

    pub fn view(&self) -> GraphView<'a> {
        // validated in `new`
        self.graph.truncate(self.params.expansions).expect("expansions within degree")
    }

    /// Search with a context seeded from `params.seed`.
    pub fn search(&self, q: &[f32], start: Option<usize>) -> Result<SearchOutcome> {
        let mut ctx = SearchContext::new(self.words.len(), self.params.seed);
        self.search_with(q, start, &mut ctx)
    }

    pub fn search_with(&self, q: &[f32], start: Option<usize>, ctx: &mut SearchContext) -> Result<SearchOutcome> {
        search(self.view(), self.words, q, &self.params, start, ctx)
    }
}

impl Quantizer for GnnsIndex<'_> {
    fn vocabulary_size(&self) -> usize {
        self.words.len()
    }

    fn dim(&self) -> usize {
        self.words.dim()
    }

    /// K = 1 search; a hint turns it into a single warm-started walk.
    fn quantize(&self, q: &[f32], hint: Option<u32>, ctx: &mut SearchContext) -> Result<QuantizationResult> {
        let mut params = GnnsParams { results: 1, ..self.params };
        if hint.is_some() {
            params.restarts = 1;
        }
        let out = search(self.view(), self.words, q, &params, hint.map(|h| h as usize), ctx)?;
        let (word, distance) = out.results[0];
        Ok(QuantizationResult { word, distance, dist_evals: out.dist_evals, hops: out.hops })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_brute_force;
    use crate::rng::Rng;

    fn random_store(n: usize, dim: usize, seed: u64) -> VectorStore {
        let mut rng = Rng::new(seed);
        VectorStore::from_flat(dim, (0..n * dim).map(|_| rng.unit() as f32).collect()).unwrap()
    }

    fn linear_oracle(store: &VectorStore, q: &[f32]) -> (u32, f64) {
        let mut best = (0u32, f64::INFINITY);
        for (i, row) in store.rows().enumerate() {
            let d: f64 = row.iter().zip(q).map(|(a, b)| (f64::from(*a) - f64::from(*b)).powi(2)).sum();
            if d < best.1 {
                best = (i as u32, d);
            }
        }
        best
    }

    #[test]
    fn complete_graph_finds_exact_nn() {
        let s = random_store(80, 6, 1);
        let g = build_brute_force(&s, 79).unwrap();
        let mut rng = Rng::new(2);
        for trial in 0..50 {
            let q: Vec<f32> = (0..6).map(|_| rng.unit() as f32).collect();
            let params = GnnsParams { seed: trial, ..GnnsParams::quantization(79, 0) };
            let idx = GnnsIndex::new(&s, &g, params).unwrap();
            let out = idx.search(&q, None).unwrap();
            assert_eq!(out.results[0].0, linear_oracle(&s, &q).0);
        }
    }

    #[test]
    fn start_at_exact_match_stays_put() {
        let s = random_store(100, 4, 3);
        let g = build_brute_force(&s, 10).unwrap();
        let idx = GnnsIndex::new(&s, &g, GnnsParams::quantization(10, 0)).unwrap();
        let out = idx.search(s.row(17), Some(17)).unwrap();
        assert_eq!(out.results[0], (17, 0.0));
        assert_eq!(out.hops, 0);
        assert_eq!(out.dist_evals, 11);
        assert_eq!(out.start_id, 17);
    }

    #[test]
    fn results_sorted_distinct_and_bounded() {
        let s = random_store(300, 8, 4);
        let g = build_brute_force(&s, 12).unwrap();
        let params = GnnsParams { results: 10, restarts: 4, steps: Some(3), expansions: 8, seed: 5 };
        let idx = GnnsIndex::new(&s, &g, params).unwrap();
        let out = idx.search(&[0.5; 8], None).unwrap();
        assert_eq!(out.results.len(), 10);
        assert!(out.results.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 != w[1].0));
        assert!(out.dist_evals <= 300);
        assert_eq!(out.hops, 12);
    }

    #[test]
    fn parameter_errors() {
        let s = random_store(20, 2, 6);
        let g = build_brute_force(&s, 5).unwrap();
        assert!(GnnsIndex::new(&s, &g, GnnsParams::quantization(6, 0)).is_err());
        assert!(GnnsIndex::new(&s, &g, GnnsParams { results: 0, ..GnnsParams::quantization(5, 0) }).is_err());
        assert!(GnnsIndex::new(&s, &g, GnnsParams { steps: Some(0), ..GnnsParams::quantization(5, 0) }).is_err());
        let idx = GnnsIndex::new(&s, &g, GnnsParams::quantization(5, 0)).unwrap();
        assert!(matches!(idx.search(&[0.0, 0.0], Some(20)), Err(Error::IdOutOfRange { .. })));
        assert!(matches!(idx.search(&[0.0], None), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quantize_is_deterministic_and_hint_terminates_fast() {
        let s = random_store(400, 6, 8);
        let g = build_brute_force(&s, 20).unwrap();
        let idx = GnnsIndex::new(&s, &g, GnnsParams::quantization(20, 99)).unwrap();
        let q = [0.3f32; 6];
        let a = idx.quantize(&q, None, &mut SearchContext::new(400, 1)).unwrap();
        let b = idx.quantize(&q, None, &mut SearchContext::new(400, 1)).unwrap();
        assert_eq!(a, b);
        let (nn, _) = linear_oracle(&s, &q);
        let hinted = idx.quantize(&q, Some(nn), &mut SearchContext::new(400, 1)).unwrap();
        assert_eq!(hinted.word, nn);
        assert_eq!(hinted.hops, 0);
        assert!(hinted.dist_evals <= 21);
    }
}
