//! Bag-of-words image vectors, tf-idf weighting and inverted-index retrieval.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::meter::SearchContext;
use crate::quantizer::{QuantizationResult, Quantizer};
use crate::store::VectorStore;
use crate::{Error, Result};

/// Sparse word histogram: `(word, weight)` with strictly increasing words and
/// positive weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BowVector {
    entries: Vec<(u32, f64)>,
    norm: f64,
}

impl BowVector {
    /// Builds a vector from arbitrary `(word, weight)` pairs: duplicates are
    /// summed, non-positive weights dropped.
    pub fn from_weights(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (w, x) in pairs {
            *map.entry(w).or_insert(0.0) += x;
        }
        Self::from_sorted(map.into_iter().filter(|&(_, x)| x > 0.0).collect())
    }

    fn from_sorted(entries: Vec<(u32, f64)>) -> Self {
        let norm = libm::sqrt(entries.iter().map(|(_, x)| x * x).sum());
        Self { entries, norm }
    }

    /// Term frequencies: each word's share of the words listed.
    pub fn term_frequencies(words: &[u32]) -> Self {
        if words.is_empty() {
            return Self::default();
        }
        let total = words.len() as f64;
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &w in words {
            *counts.entry(w).or_insert(0) += 1;
        }
        Self::from_sorted(counts.into_iter().map(|(w, c)| (w, c as f64 / total)).collect())
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, word: u32) -> Option<f64> {
        self.entries.binary_search_by_key(&word, |e| e.0).ok().map(|i| self.entries[i].1)
    }
}

/// Quantizes every feature of an image and returns its tf vector along with
/// the per-feature diagnostics. `hints` (one per feature) seed graph searches.
pub fn quantize_image<Q: Quantizer + ?Sized>(
    quantizer: &Q,
    features: &VectorStore,
    hints: Option<&[Option<u32>]>,
    ctx: &mut SearchContext,
) -> Result<(BowVector, Vec<QuantizationResult>)> {
    if let Some(h) = hints {
        if h.len() != features.len() {
            return Err(Error::LengthMismatch { expected: features.len(), found: h.len() });
        }
    }
    let results = (0..features.len())
        .map(|i| quantizer.quantize(features.row(i), hints.and_then(|h| h[i]), ctx))
        .collect::<Result<Vec<_>>>()?;
    let words: Vec<u32> = results.iter().map(|r| r.word).collect();
    Ok((BowVector::term_frequencies(&words), results))
}

/// `idf(w) = ln(N / df(w))`, zero for unseen words or an empty collection.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfModel {
    idf: Vec<f64>,
}

impl IdfModel {
    pub fn from_counts(doc_count: usize, doc_freq: &[usize]) -> Self {
        let idf = doc_freq
            .iter()
            .map(|&df| {
                if df == 0 || doc_count == 0 {
                    0.0
                } else {
                    libm::log(doc_count as f64 / df as f64)
                }
            })
            .collect();
        Self { idf }
    }

    pub fn get(&self, word: u32) -> f64 {
        self.idf.get(word as usize).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }
}

/// Reweights a tf vector by idf, dropping words whose weight becomes zero.
pub fn apply_idf(v: &BowVector, idf: &IdfModel) -> BowVector {
    BowVector::from_sorted(
        v.entries.iter().map(|&(w, tf)| (w, tf * idf.get(w))).filter(|&(_, x)| x > 0.0).collect(),
    )
}

/// Word-to-image postings with cosine scoring.
///
/// Mutation (`add`) needs exclusive access; queries only read. The cached
/// idf is not refreshed by `add`: call [`InvertedIndex::refresh_idf`] when
/// the collection changed, or keep scoring against the stale model.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: Vec<Vec<(u32, f64)>>,
    norms: BTreeMap<u32, f64>,
    idf: IdfModel,
    idf_stale: bool,
}

impl InvertedIndex {
    pub fn new(vocabulary_size: usize) -> Self {
        Self {
            postings: (0..vocabulary_size).map(|_| Vec::new()).collect(),
            norms: BTreeMap::new(),
            idf: IdfModel::from_counts(0, &alloc::vec![0; vocabulary_size]),
            idf_stale: false,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.norms.len()
    }

    pub fn doc_freq(&self, word: u32) -> usize {
        self.postings.get(word as usize).map_or(0, Vec::len)
    }

    pub fn postings(&self, word: u32) -> &[(u32, f64)] {
        self.postings.get(word as usize).map_or(&[], Vec::as_slice)
    }

    pub fn add(&mut self, image: u32, v: &BowVector) -> Result<()> {
        if self.norms.contains_key(&image) {
            return Err(Error::DuplicateImage(image));
        }
        if let Some(&(w, _)) = v.entries.iter().find(|(w, _)| *w as usize >= self.postings.len()) {
            return Err(Error::IdOutOfRange { id: w as usize, count: self.postings.len() });
        }
        for &(w, x) in &v.entries {
            let list = &mut self.postings[w as usize];
            let at = list.partition_point(|&(img, _)| img < image);
            list.insert(at, (image, x));
        }
        self.norms.insert(image, v.norm);
        self.idf_stale = true;
        Ok(())
    }

    pub fn refresh_idf(&mut self) {
        let df: Vec<usize> = self.postings.iter().map(Vec::len).collect();
        self.idf = IdfModel::from_counts(self.doc_count(), &df);
        self.idf_stale = false;
    }

    pub fn idf(&self) -> &IdfModel {
        &self.idf
    }

    pub fn is_idf_stale(&self) -> bool {
        self.idf_stale
    }

    /// Top `top_n` images by cosine similarity with `v`, best first, ties to
    /// the lower image id. Only images sharing a word with `v` can appear.
    pub fn query(&self, v: &BowVector, top_n: usize) -> Vec<(u32, f64)> {
        if top_n == 0 || v.norm <= 0.0 {
            return Vec::new();
        }
        let mut dots: BTreeMap<u32, f64> = BTreeMap::new();
        for &(w, x) in &v.entries {
            for &(img, y) in self.postings(w) {
                *dots.entry(img).or_insert(0.0) += x * y;
            }
        }
        let mut scored: Vec<(u32, f64)> = dots
            .into_iter()
            .filter_map(|(img, dot)| {
                let norm = self.norms[&img];
                (dot > 0.0 && norm > 0.0).then(|| (img, dot / (v.norm * norm)))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_n);
        scored
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::LinearScan;
    use crate::rng::Rng;

    #[test]
    fn tf_of_exact_hits() {
        let words = VectorStore::from_flat(1, (0..6).map(|i| i as f32).collect()).unwrap();
        let feats = VectorStore::from_flat(1, vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        let (tf, diag) = quantize_image(&LinearScan::new(&words), &feats, None, &mut SearchContext::new(6, 0)).unwrap();
        assert_eq!(tf.entries(), &[(1, 0.25), (2, 0.5), (3, 0.25)]);
        assert_eq!(diag.len(), 4);
        assert!(diag.iter().all(|d| d.dist_evals == 6));
    }

    #[test]
    fn all_features_on_one_word() {
        let words = VectorStore::from_flat(1, (0..8).map(|i| i as f32 * 10.0).collect()).unwrap();
        let feats = VectorStore::from_flat(1, vec![49.0, 51.0, 50.5]).unwrap();
        let (tf, _) = quantize_image(&LinearScan::new(&words), &feats, None, &mut SearchContext::new(8, 0)).unwrap();
        assert_eq!(tf.entries(), &[(5, 1.0)]);
    }

    #[test]
    fn empty_image_and_hint_length() {
        let words = VectorStore::from_flat(1, vec![0.0, 1.0]).unwrap();
        let none = VectorStore::new(1).unwrap();
        let (tf, _) = quantize_image(&LinearScan::new(&words), &none, None, &mut SearchContext::new(2, 0)).unwrap();
        assert!(tf.is_empty());
        assert_eq!(tf.norm(), 0.0);
        let one = VectorStore::from_flat(1, vec![0.2]).unwrap();
        assert!(quantize_image(&LinearScan::new(&words), &one, Some(&[]), &mut SearchContext::new(2, 0)).is_err());
    }

    #[test]
    fn tf_sums_to_one() {
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let len = 1 + rng.below(300);
            let words: Vec<u32> = (0..len).map(|_| rng.below(40) as u32).collect();
            let tf = BowVector::term_frequencies(&words);
            let total: f64 = tf.entries().iter().map(|e| e.1).sum();
            assert!((total - 1.0).abs() < 1e-9);
            let norm = libm::sqrt(tf.entries().iter().map(|e| e.1 * e.1).sum::<f64>());
            assert!((tf.norm() - norm).abs() < 1e-9);
        }
    }

    #[test]
    fn idf_weighting() {
        let idf = IdfModel::from_counts(4, &[4, 0, 1, 2]);
        assert_eq!(idf.get(0), 0.0);
        assert_eq!(idf.get(1), 0.0);
        assert!((idf.get(2) - 4f64.ln()).abs() < 1e-12);
        assert!(idf.get(2) > idf.get(3));
        assert_eq!(idf.get(99), 0.0);

        let everywhere = BowVector::from_weights([(0, 0.5), (0, 0.5)]);
        assert!(apply_idf(&everywhere, &idf).is_empty());

        let doubled = apply_idf(&BowVector::from_weights([(5, 0.3)]), &IdfModel::from_counts(1, &[0, 0, 0, 0, 0, 0]));
        assert!(doubled.is_empty());
        let flat = IdfModel { idf: vec![2.0; 6] };
        let v = BowVector::from_weights([(5, 0.3)]);
        let w = apply_idf(&v, &flat);
        assert!((w.weight(5).unwrap() - 0.6).abs() < 1e-12);
        assert!((w.norm() - 2.0 * v.norm()).abs() < 1e-12);
    }

    #[test]
    fn index_basics() {
        let mut idx = InvertedIndex::new(10);
        let a = BowVector::from_weights([(1, 1.0), (2, 2.0)]);
        let b = BowVector::from_weights([(3, 1.0)]);
        idx.add(7, &a).unwrap();
        idx.add(2, &b).unwrap();
        assert_eq!(idx.add(7, &a), Err(Error::DuplicateImage(7)));
        assert!(idx.add(9, &BowVector::from_weights([(10, 1.0)])).is_err());
        let hits = idx.query(&a, 5);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, 7);
        assert!((hits[0].1 - 1.0).abs() < 1e-9);
        assert!(idx.query(&a, 0).is_empty());
        assert_eq!(idx.doc_freq(1), 1);
        assert!(idx.is_idf_stale());
        idx.refresh_idf();
        assert!((idx.idf().get(3) - 2f64.ln()).abs() < 1e-12);
    }
}
