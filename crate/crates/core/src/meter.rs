//! Distance evaluation accounting.
//!
//! Speedups are reported as "vocabulary size over distance evaluations per
//! query", so every vector distance a search computes goes through a
//! [`DistanceMeter`]. A memoizing meter charges each stored vector at most once
//! per query; the memo is cleared by [`DistanceMeter::begin_query`].

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Rng;
use crate::store::{squared_l2, VectorStore};
use crate::Result;

/// Per-query memo keyed by vector id. Clearing bumps an epoch instead of
/// touching the arrays.
#[derive(Debug, Clone)]
struct Memo {
    epoch: u32,
    stamp: Vec<u32>,
    value: Vec<f64>,
}

impl Memo {
    fn new(n: usize) -> Self {
        Self { epoch: 1, stamp: vec![0; n], value: vec![0.0; n] }
    }

    fn clear(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    fn ensure(&mut self, n: usize) {
        if self.stamp.len() < n {
            self.stamp.resize(n, 0);
            self.value.resize(n, 0.0);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DistanceMeter {
    evaluations: u64,
    memo: Option<Memo>,
}

impl DistanceMeter {
    /// Meter that charges every call.
    pub fn new() -> Self {
        Self::default()
    }

    /// Meter with a per-query memo sized for a store of `n` vectors.
    pub fn with_memo(n: usize) -> Self {
        Self { evaluations: 0, memo: Some(Memo::new(n)) }
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn is_memoized(&self) -> bool {
        self.memo.is_some()
    }

    /// Forget cached distances; the evaluation counter keeps running.
    pub fn begin_query(&mut self) {
        if let Some(memo) = &mut self.memo {
            memo.clear();
        }
    }

    /// Euclidean distance from stored vector `id` to `q`.
    pub fn distance(&mut self, store: &VectorStore, id: usize, q: &[f32]) -> Result<f64> {
        store.check_dim(q)?;
        store.check_id(id)?;
        if let Some(memo) = &mut self.memo {
            memo.ensure(store.len());
        }
        Ok(libm::sqrt(self.squared(store, id, q).0))
    }

    /// Squared distance plus whether it was freshly evaluated (not a memo hit).
    ///
    /// Callers validate `id` and the query dimension up front.
    #[inline]
    pub(crate) fn squared(&mut self, store: &VectorStore, id: usize, q: &[f32]) -> (f64, bool) {
        match &mut self.memo {
            Some(memo) => {
                if memo.stamp[id] == memo.epoch {
                    return (memo.value[id], false);
                }
                let d = squared_l2(store.row(id), q);
                memo.stamp[id] = memo.epoch;
                memo.value[id] = d;
                self.evaluations += 1;
                (d, true)
            }
            None => {
                self.evaluations += 1;
                (squared_l2(store.row(id), q), true)
            }
        }
    }

    /// Charges one evaluation against a vector that is not in a store
    /// (tree centroids). Never memoized.
    #[inline]
    pub(crate) fn squared_free(&mut self, v: &[f32], q: &[f32]) -> f64 {
        self.evaluations += 1;
        squared_l2(v, q)
    }

    pub(crate) fn prepare(&mut self, n: usize) {
        if let Some(memo) = &mut self.memo {
            memo.ensure(n);
        }
    }
}

/// The private state one in-flight query owns: its random stream and meter.
#[derive(Debug, Clone)]
pub struct SearchContext {
    pub rng: Rng,
    pub meter: DistanceMeter,
}

impl SearchContext {
    /// Memoizing context for a vocabulary of `n` words.
    pub fn new(n: usize, seed: u64) -> Self {
        Self { rng: Rng::new(seed), meter: DistanceMeter::with_memo(n) }
    }
}
