use alloc::vec;

use crate::gnns::SearchOutcome;
use crate::meter::{DistanceMeter, SearchContext};
use crate::quantizer::{QuantizationResult, Quantizer};
use crate::store::VectorStore;
use crate::{Error, Result};

/// Exact nearest neighbor by scanning every vector; costs exactly `n`
/// evaluations (ties to the lower id).
pub fn linear_nn(store: &VectorStore, q: &[f32], meter: &mut DistanceMeter) -> Result<SearchOutcome> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    store.check_dim(q)?;
    meter.prepare(store.len());
    meter.begin_query();
    let before = meter.evaluations();
    let mut best = (0u32, f64::INFINITY);
    for id in 0..store.len() {
        let (d, _) = meter.squared(store, id, q);
        if d < best.1 {
            best = (id as u32, d);
        }
    }
    Ok(SearchOutcome {
        results: vec![(best.0, libm::sqrt(best.1))],
        dist_evals: meter.evaluations() - before,
        hops: 0,
        start_id: 0,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LinearScan<'a> {
    store: &'a VectorStore,
}

impl<'a> LinearScan<'a> {
    pub fn new(store: &'a VectorStore) -> Self {
        Self { store }
    }
}

impl Quantizer for LinearScan<'_> {
    fn vocabulary_size(&self) -> usize {
        self.store.len()
    }

    fn dim(&self) -> usize {
        self.store.dim()
    }

    fn quantize(&self, q: &[f32], _hint: Option<u32>, ctx: &mut SearchContext) -> Result<QuantizationResult> {
        let out = linear_nn(self.store, q, &mut ctx.meter)?;
        let (word, distance) = out.results[0];
        Ok(QuantizationResult { word, distance, dist_evals: out.dist_evals, hops: 0 })
    }
}
