//! Common interface for mapping a feature to its visual word.

use crate::meter::SearchContext;
use crate::Result;

/// Outcome of quantizing one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationResult {
    pub word: u32,
    pub distance: f64,
    pub dist_evals: u64,
    pub hops: u32,
}

/// A nearest-word search over a fixed vocabulary.
///
/// `hint` is a word believed to be close to `q` (the word of a matched
/// feature in the previous frame). Only graph search can use it; the tree and
/// linear quantizers ignore it.
pub trait Quantizer: Sync {
    fn vocabulary_size(&self) -> usize;

    fn dim(&self) -> usize;

    fn quantize(&self, q: &[f32], hint: Option<u32>, ctx: &mut SearchContext) -> Result<QuantizationResult>;
}
