//! Synthetic image sequences with controlled feature overlap, ratio-test
//! matching between consecutive frames, and warm-start hint propagation.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Rng;
use crate::store::{squared_l2, VectorStore};
use crate::{Error, Result};

/// How fresh (non-carried) features are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldModel {
    /// Fraction of fresh features drawn as a noisy copy of a random word;
    /// the rest are uniform in the words' bounding box.
    pub anchor_fraction: f64,
    /// Per-component Gaussian noise on anchored features.
    pub anchor_sigma: f64,
}

impl Default for WorldModel {
    fn default() -> Self {
        Self { anchor_fraction: 0.7, anchor_sigma: 0.1 }
    }
}

/// Carry noise at which linked features share a word about 64% of the time
/// on the reference 5000-word synthetic vocabulary.
pub const CALIBRATED_CARRY_SIGMA: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceConfig {
    pub num_frames: usize,
    pub features_per_frame: usize,
    /// Probability that a feature of frame `t - 1` is seen again in frame `t`.
    pub overlap: f64,
    /// Per-component Gaussian noise applied to carried features.
    pub carry_sigma: f64,
    pub world: WorldModel,
    /// Dimension of fresh features when no vocabulary is given (they are then
    /// uniform in the unit cube).
    pub dim: usize,
    pub seed: u64,
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::param("overlap must be in [0, 1]"));
        }
        if !(self.carry_sigma >= 0.0 && self.carry_sigma.is_finite()) {
            return Err(Error::param("carry sigma must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.world.anchor_fraction) {
            return Err(Error::param("anchor fraction must be in [0, 1]"));
        }
        if !(self.world.anchor_sigma >= 0.0 && self.world.anchor_sigma.is_finite()) {
            return Err(Error::param("anchor sigma must be non-negative"));
        }
        if self.dim == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        Ok(())
    }
}

/// Frames of features plus, for every frame after the first, the
/// `(index in frame, index in previous frame)` pairs of carried features.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub frames: Vec<VectorStore>,
    pub truth_links: Vec<Vec<(u32, u32)>>,
}

impl SequenceDataset {
    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, VectorStore::dim)
    }

    pub fn feature_count(&self) -> usize {
        self.frames.iter().map(VectorStore::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.len() != self.truth_links.len() {
            return Err(Error::LengthMismatch { expected: self.frames.len(), found: self.truth_links.len() });
        }
        let dim = self.dim();
        for (t, links) in self.truth_links.iter().enumerate() {
            if self.frames[t].dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: self.frames[t].dim() });
            }
            if t == 0 && !links.is_empty() {
                return Err(Error::param("first frame cannot have links"));
            }
            for &(cur, prev) in links {
                self.frames[t].check_id(cur as usize)?;
                self.frames[t - 1].check_id(prev as usize)?;
            }
        }
        Ok(())
    }
}

struct FreshSource<'a> {
    words: Option<&'a VectorStore>,
    lo: Vec<f32>,
    hi: Vec<f32>,
    world: WorldModel,
    dim: usize,
}

impl<'a> FreshSource<'a> {
    fn new(words: Option<&'a VectorStore>, world: WorldModel, dim: usize) -> Self {
        match words {
            Some(w) => {
                let mut lo = vec![f32::INFINITY; w.dim()];
                let mut hi = vec![f32::NEG_INFINITY; w.dim()];
                for row in w.rows() {
                    for (d, &x) in row.iter().enumerate() {
                        lo[d] = lo[d].min(x);
                        hi[d] = hi[d].max(x);
                    }
                }
                Self { words, lo, hi, world, dim: w.dim() }
            }
            None => Self { words: None, lo: vec![0.0; dim], hi: vec![1.0; dim], world, dim },
        }
    }

    fn draw(&self, rng: &mut Rng, out: &mut Vec<f32>) {
        if let Some(words) = self.words {
            if rng.bernoulli(self.world.anchor_fraction) {
                let w = words.row(rng.below(words.len()));
                out.extend(w.iter().map(|&x| (f64::from(x) + rng.normal() * self.world.anchor_sigma) as f32));
                return;
            }
        }
        for d in 0..self.dim {
            let span = f64::from(self.hi[d]) - f64::from(self.lo[d]);
            out.push((f64::from(self.lo[d]) + rng.unit() * span) as f32);
        }
    }
}

/// Generates a sequence. Frame 0 is all fresh. Each feature of frame `t - 1`
/// is carried into frame `t` with probability `overlap` (so the carried count
/// is Binomial(size, overlap)), perturbed by `carry_sigma` noise; carried
/// features come first in frame order, fresh ones fill the frame up.
pub fn generate(cfg: &SequenceConfig, words: Option<&VectorStore>) -> Result<SequenceDataset> {
    cfg.validate()?;
    if words.is_some_and(VectorStore::is_empty) {
        return Err(Error::EmptyStore);
    }
    let source = FreshSource::new(words, cfg.world, cfg.dim);
    let dim = source.dim;
    let root = Rng::new(cfg.seed);
    let mut frames: Vec<VectorStore> = Vec::with_capacity(cfg.num_frames);
    let mut truth_links = Vec::with_capacity(cfg.num_frames);
    for t in 0..cfg.num_frames {
        let mut rng = root.split(t as u64);
        let mut data = Vec::with_capacity(cfg.features_per_frame * dim);
        let mut links = Vec::new();
        if let Some(prev) = frames.last() {
            for j in 0..prev.len() {
                if rng.bernoulli(cfg.overlap) {
                    links.push(((data.len() / dim) as u32, j as u32));
                    let src = prev.row(j);
                    if cfg.carry_sigma > 0.0 {
                        data.extend(src.iter().map(|&x| (f64::from(x) + rng.normal() * cfg.carry_sigma) as f32));
                    } else {
                        data.extend_from_slice(src);
                    }
                }
            }
        }
        while data.len() < cfg.features_per_frame * dim {
            source.draw(&mut rng, &mut data);
        }
        frames.push(VectorStore::from_flat(dim, data)?);
        truth_links.push(links);
    }
    Ok(SequenceDataset { frames, truth_links })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    /// `(index in current frame, index in previous frame)`, by current index.
    pub links: Vec<(u32, u32)>,
    /// Distances evaluated by the matcher (not quantization work).
    pub evaluations: u64,
}

/// Mutual nearest neighbors between `curr` and `prev` that also pass the
/// distance-ratio test `d1 / d2 < ratio` on the current feature's two nearest
/// previous features. Ties go to the lower index.
pub fn match_frames(prev: &VectorStore, curr: &VectorStore, ratio: f64) -> Result<MatchOutcome> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::param("ratio must be in (0, 1)"));
    }
    if prev.is_empty() || curr.is_empty() {
        return Ok(MatchOutcome::default());
    }
    if prev.dim() != curr.dim() {
        return Err(Error::DimensionMismatch { expected: prev.dim(), found: curr.dim() });
    }
    let (nearest_prev, second, nearest_curr) = nearest_pairs(prev, curr);
    let links = nearest_prev
        .iter()
        .enumerate()
        .filter(|&(i, &(j, d1))| {
            let d2 = second[i];
            let passes = if d2.is_infinite() { true } else { libm::sqrt(d1) / libm::sqrt(d2) < ratio };
            passes && nearest_curr[j as usize].0 == i as u32
        })
        .map(|(i, &(j, _))| (i as u32, j))
        .collect();
    Ok(MatchOutcome { links, evaluations: (prev.len() * curr.len()) as u64 })
}

/// Mutual nearest pairs `(curr index, prev index)`, without the ratio test.
pub fn mutual_nearest(prev: &VectorStore, curr: &VectorStore) -> Vec<(u32, u32)> {
    if prev.is_empty() || curr.is_empty() {
        return Vec::new();
    }
    let (nearest_prev, _, nearest_curr) = nearest_pairs(prev, curr);
    nearest_prev
        .iter()
        .enumerate()
        .filter(|&(i, &(j, _))| nearest_curr[j as usize].0 == i as u32)
        .map(|(i, &(j, _))| (i as u32, j))
        .collect()
}

/// For each current feature: nearest previous `(index, sq dist)` and the
/// second-nearest squared distance; for each previous feature: nearest current.
fn nearest_pairs(prev: &VectorStore, curr: &VectorStore) -> (Vec<(u32, f64)>, Vec<f64>, Vec<(u32, f64)>) {
    let mut nearest_prev = vec![(u32::MAX, f64::INFINITY); curr.len()];
    let mut second = vec![f64::INFINITY; curr.len()];
    let mut nearest_curr = vec![(u32::MAX, f64::INFINITY); prev.len()];
    for (i, c) in curr.rows().enumerate() {
        for (j, p) in prev.rows().enumerate() {
            let d = squared_l2(c, p);
            if d < nearest_prev[i].1 {
                second[i] = nearest_prev[i].1;
                nearest_prev[i] = (j as u32, d);
            } else if d < second[i] {
                second[i] = d;
            }
            if d < nearest_curr[j].1 {
                nearest_curr[j] = (i as u32, d);
            }
        }
    }
    (nearest_prev, second, nearest_curr)
}

/// Hint for each current feature: the word its linked previous feature got.
pub fn propagate_hints(links: &[(u32, u32)], prev_words: &[u32], curr_len: usize) -> Result<Vec<Option<u32>>> {
    let mut hints = vec![None; curr_len];
    for &(cur, prev) in links {
        let word = *prev_words
            .get(prev as usize)
            .ok_or(Error::IdOutOfRange { id: prev as usize, count: prev_words.len() })?;
        *hints
            .get_mut(cur as usize)
            .ok_or(Error::IdOutOfRange { id: cur as usize, count: curr_len })? = Some(word);
    }
    Ok(hints)
}
