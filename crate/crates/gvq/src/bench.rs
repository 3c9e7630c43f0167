//! Quantization benchmark: every method quantizes the same feature stream,
//! results are scored against a linear-scan oracle and summarized per method
//! for all features and for the matched (linked) subset.

use std::path::PathBuf;
use std::time::Instant;

use gvq_core::baselines::{HkmParams, HkmSearcher, HkmTree, KdForest, KdSearcher, LinearScan};
use gvq_core::eval::{measure_accuracy, measure_speedup, shared_word_fraction};
use gvq_core::quantizer::QuantizationResult;
use gvq_core::sequence::{match_frames, propagate_hints, SequenceDataset};
use gvq_core::store::squared_l2_below;
use gvq_core::{GnnsIndex, GnnsParams, Quantizer, Rng, SearchContext, VectorStore, Vocabulary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;
pub const DEFAULT_RATIO: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gvq_core::Error),
    #[error(transparent)]
    Format(#[from] crate::format::FormatError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// One quantizer configuration. GNNS and SGNNS share their fields; SGNNS also
/// starts linked features at the word of their previous-frame match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodSpec {
    Linear,
    Gnns {
        expansions: usize,
        #[serde(default = "one")]
        restarts: usize,
        #[serde(default)]
        steps: Option<usize>,
    },
    Sgnns {
        expansions: usize,
        #[serde(default = "one")]
        restarts: usize,
        #[serde(default)]
        steps: Option<usize>,
    },
    Kd {
        trees: usize,
        checks: usize,
    },
    Hkm {
        branching: usize,
        iterations: usize,
        checks: usize,
    },
}

fn one() -> usize {
    1
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Gnns { .. } => "gnns",
            Self::Sgnns { .. } => "sgnns",
            Self::Kd { .. } => "kd",
            Self::Hkm { .. } => "hkm",
        }
    }

    pub fn uses_hints(&self) -> bool {
        matches!(self, Self::Sgnns { .. })
    }

    /// Short human-readable parameter list.
    pub fn describe(&self) -> String {
        match *self {
            Self::Linear => String::new(),
            Self::Gnns { expansions, restarts, steps } | Self::Sgnns { expansions, restarts, steps } => match steps {
                Some(t) => format!("E={expansions} R={restarts} T={t}"),
                None => format!("E={expansions} R={restarts}"),
            },
            Self::Kd { trees, checks } => format!("trees={trees} checks={checks}"),
            Self::Hkm { branching, iterations, checks } => {
                format!("branching={branching} iterations={iterations} checks={checks}")
            }
        }
    }

    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(format!("{}: {msg}", self.label())));
        match *self {
            Self::Linear => Ok(()),
            Self::Gnns { expansions, restarts, steps } | Self::Sgnns { expansions, restarts, steps } => {
                if expansions == 0 || expansions > vocab.graph.k() {
                    return bad(format!(
                        "expansions must be in 1..={} (the vocabulary graph degree), got {expansions}",
                        vocab.graph.k()
                    ));
                }
                if restarts == 0 {
                    return bad("restarts must be at least 1".into());
                }
                if steps == Some(0) {
                    return bad("steps must be at least 1 when set".into());
                }
                Ok(())
            }
            Self::Kd { trees, checks } => {
                if trees == 0 || checks == 0 {
                    return bad("trees and checks must be at least 1".into());
                }
                Ok(())
            }
            Self::Hkm { branching, iterations, checks } => {
                if branching < 2 || iterations == 0 || checks == 0 {
                    return bad("branching must be at least 2, iterations and checks at least 1".into());
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HintSource {
    /// No hints; the matched subset is defined by the ground-truth links.
    #[default]
    None,
    Truth,
    /// Links recovered by mutual-nearest ratio-test matching.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    #[default]
    All,
    Matched,
}

/// File-level experiment description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub vocab: PathBuf,
    pub dataset: PathBuf,
    pub methods: Vec<MethodSpec>,
    /// Subset used when selecting sweep points.
    #[serde(default)]
    pub feature_subset: FeatureSubset,
    #[serde(default)]
    pub hint_source: HintSource,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Accuracy to select sweep points at, with the allowed deviation.
    #[serde(default)]
    pub target_accuracy: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_ratio() -> f64 {
    DEFAULT_RATIO
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_tolerance() -> f64 {
    0.03
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::Config("`methods` is empty; list at least one method".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Config("`seeds` is empty; list at least one seed".into()));
        }
        if self.hint_source == HintSource::Ratio && !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(BenchError::Config(format!("`ratio` must be in (0, 1), got {}", self.ratio)));
        }
        if let Some(a) = self.target_accuracy {
            if !(0.0..=1.0).contains(&a) {
                return Err(BenchError::Config(format!("`target_accuracy` must be in [0, 1], got {a}")));
            }
        }
        if !(self.tolerance >= 0.0) {
            return Err(BenchError::Config("`tolerance` must be non-negative".into()));
        }
        Ok(())
    }
}

/// Nearest word by exhaustive scan, ties to the lower id. Candidates are
/// abandoned once they cannot beat the running best, which does not change
/// the answer.
pub fn exact_nearest(words: &VectorStore, q: &[f32]) -> u32 {
    let mut best = (0u32, f64::INFINITY);
    for (id, w) in words.rows().enumerate() {
        if let Some(d) = squared_l2_below(w, q, best.1) {
            best = (id as u32, d);
        }
    }
    best.0
}

/// Builds the index `spec` describes over `vocab` and hands it to `f`.
pub fn with_quantizer<T>(
    spec: &MethodSpec,
    vocab: &Vocabulary,
    seed: u64,
    f: impl FnOnce(&dyn Quantizer) -> Result<T>,
) -> Result<T> {
    spec.validate(vocab)?;
    let words = &vocab.words;
    match *spec {
        MethodSpec::Linear => f(&LinearScan::new(words)),
        MethodSpec::Gnns { expansions, restarts, steps } | MethodSpec::Sgnns { expansions, restarts, steps } => {
            let params = GnnsParams { results: 1, restarts, steps, expansions, seed };
            f(&GnnsIndex::new(words, &vocab.graph, params)?)
        }
        MethodSpec::Kd { trees, checks } => {
            let forest = KdForest::build(words, trees, seed)?;
            f(&KdSearcher { forest: &forest, checks })
        }
        MethodSpec::Hkm { branching, iterations, checks } => {
            let tree = HkmTree::build(words, HkmParams { branching, iterations, seed })?;
            f(&HkmSearcher { tree: &tree, checks })
        }
    }
}

/// Quantizes a frame sequence. Frames run in order so that, when `links` is
/// given, each linked feature is hinted with the word its previous-frame
/// match received. Features within a frame run in parallel; each draws from
/// its own random stream, derived from `seed` and its position in the
/// stream, so the output does not depend on scheduling.
pub fn quantize_stream(
    quantizer: &dyn Quantizer,
    frames: &[VectorStore],
    links: Option<&[Vec<(u32, u32)>]>,
    seed: u64,
) -> Result<Vec<QuantizationResult>> {
    if let Some(l) = links {
        if l.len() != frames.len() {
            return Err(gvq_core::Error::LengthMismatch { expected: frames.len(), found: l.len() }.into());
        }
    }
    let n = quantizer.vocabulary_size();
    let root = Rng::new(seed);
    let mut out: Vec<QuantizationResult> = Vec::with_capacity(frames.iter().map(VectorStore::len).sum());
    let mut prev_start = 0;
    for (t, frame) in frames.iter().enumerate() {
        let base = out.len();
        let hints = match links {
            Some(l) if t > 0 => {
                let prev: Vec<u32> = out[prev_start..base].iter().map(|r| r.word).collect();
                Some(propagate_hints(&l[t], &prev, frame.len())?)
            }
            _ => None,
        };
        let frame_results: Vec<_> = (0..frame.len())
            .into_par_iter()
            .map_init(
                || SearchContext::new(n, 0),
                |ctx, i| {
                    ctx.rng = root.split((base + i) as u64);
                    let hint = hints.as_ref().and_then(|h| h[i]);
                    quantizer.quantize(frame.row(i), hint, ctx)
                },
            )
            .collect::<std::result::Result<_, _>>()?;
        out.extend(frame_results);
        prev_start = base;
    }
    Ok(out)
}

/// Per-feature outcome of one method over the whole sequence, in stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub spec: MethodSpec,
    pub seed: u64,
    pub results: Vec<QuantizationResult>,
}

impl MethodRun {
    pub fn words(&self) -> Vec<u32> {
        self.results.iter().map(|r| r.word).collect()
    }
}

/// A vocabulary and a sequence with everything the methods share: the
/// oracle assignment and the links that define hints and the matched subset.
pub struct Experiment<'a> {
    vocab: &'a Vocabulary,
    dataset: &'a SequenceDataset,
    hint_source: HintSource,
    ratio: Option<f64>,
    links: Vec<Vec<(u32, u32)>>,
    matcher_evaluations: u64,
    offsets: Vec<usize>,
    oracle: Vec<u32>,
    matched: Vec<bool>,
    oracle_ms: f64,
}

impl<'a> Experiment<'a> {
    pub fn new(vocab: &'a Vocabulary, dataset: &'a SequenceDataset, hint_source: HintSource, ratio: f64) -> Result<Self> {
        dataset.validate()?;
        if !dataset.frames.is_empty() && dataset.dim() != vocab.words.dim() {
            return Err(BenchError::Config(format!(
                "dataset dimension {} does not match vocabulary dimension {}",
                dataset.dim(),
                vocab.words.dim()
            )));
        }
        let (links, matcher_evaluations, ratio) = match hint_source {
            HintSource::None | HintSource::Truth => (dataset.truth_links.clone(), 0, None),
            HintSource::Ratio => {
                let matched: Vec<_> = (0..dataset.frames.len())
                    .into_par_iter()
                    .map(|t| match t {
                        0 => Ok(Default::default()),
                        _ => match_frames(&dataset.frames[t - 1], &dataset.frames[t], ratio),
                    })
                    .collect::<std::result::Result<_, _>>()?;
                let evals = matched.iter().map(|m: &gvq_core::sequence::MatchOutcome| m.evaluations).sum();
                (matched.into_iter().map(|m| m.links).collect(), evals, Some(ratio))
            }
        };
        let mut offsets = Vec::with_capacity(dataset.frames.len() + 1);
        offsets.push(0);
        for f in &dataset.frames {
            offsets.push(offsets.last().unwrap() + f.len());
        }
        let total = *offsets.last().unwrap();
        let mut matched = vec![false; total];
        for (t, frame_links) in links.iter().enumerate() {
            for &(cur, _) in frame_links {
                matched[offsets[t] + cur as usize] = true;
            }
        }
        let started = Instant::now();
        let queries: Vec<(usize, usize)> =
            dataset.frames.iter().enumerate().flat_map(|(t, f)| (0..f.len()).map(move |i| (t, i))).collect();
        let oracle = queries
            .par_iter()
            .map(|&(t, i)| exact_nearest(&vocab.words, dataset.frames[t].row(i)))
            .collect();
        let oracle_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(Self { vocab, dataset, hint_source, ratio, links, matcher_evaluations, offsets, oracle, matched, oracle_ms })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        self.vocab
    }

    pub fn dataset(&self) -> &SequenceDataset {
        self.dataset
    }

    pub fn links(&self) -> &[Vec<(u32, u32)>] {
        &self.links
    }

    pub fn oracle(&self) -> &[u32] {
        &self.oracle
    }

    pub fn matched_mask(&self) -> &[bool] {
        &self.matched
    }

    pub fn feature_count(&self) -> usize {
        self.oracle.len()
    }

    /// Quantizes the whole sequence with one method; see [`quantize_stream`].
    pub fn run(&self, spec: &MethodSpec, seed: u64) -> Result<MethodRun> {
        let hinted = spec.uses_hints() && self.hint_source != HintSource::None;
        let links = hinted.then_some(self.links.as_slice());
        let results = with_quantizer(spec, self.vocab, seed, |q| quantize_stream(q, &self.dataset.frames, links, seed))?;
        Ok(MethodRun { spec: *spec, seed, results })
    }

    /// Runs `spec` once per seed and summarizes the pooled queries.
    pub fn evaluate(&self, spec: &MethodSpec, seeds: &[u64]) -> Result<MethodReport> {
        if seeds.is_empty() {
            return Err(BenchError::Config("at least one seed is required".into()));
        }
        let started = Instant::now();
        let runs = seeds.iter().map(|&s| self.run(spec, s)).collect::<Result<Vec<_>>>()?;
        let wall_clock_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(self.summarize(spec, &runs, wall_clock_ms))
    }

    pub fn summarize(&self, spec: &MethodSpec, runs: &[MethodRun], wall_clock_ms: f64) -> MethodReport {
        let n = self.vocab.words.len();
        let all = SubsetStats::collect(n, runs, &self.oracle, |_| true);
        let matched = SubsetStats::collect(n, runs, &self.oracle, |i| self.matched[i]);
        let fractions: Vec<f64> = runs.iter().filter_map(|r| self.shared_fraction(&r.words())).collect();
        let shared = (!fractions.is_empty()).then(|| fractions.iter().sum::<f64>() / fractions.len() as f64);
        MethodReport {
            method: spec.label().to_string(),
            params: *spec,
            shared_word_fraction: shared,
            all,
            matched,
            wall_clock_ms,
        }
    }

    /// Shared-word fraction over this experiment's links for a full-stream
    /// word assignment.
    pub fn shared_fraction(&self, words: &[u32]) -> Option<f64> {
        let per_frame: Vec<&[u32]> = self.offsets.windows(2).map(|w| &words[w[0]..w[1]]).collect();
        shared_word_fraction(&self.links, &per_frame).expect("links reference valid features")
    }

    /// Runs every method and assembles a report.
    pub fn report(&self, methods: &[MethodSpec], seeds: &[u64]) -> Result<BenchReport> {
        let started = Instant::now();
        let mut rows = Vec::with_capacity(methods.len());
        for spec in methods {
            rows.push(self.evaluate(spec, seeds)?);
        }
        let wall = WallClock {
            oracle_ms: self.oracle_ms,
            methods_ms: rows.iter().map(|r| r.wall_clock_ms).collect(),
            total_ms: self.oracle_ms + started.elapsed().as_secs_f64() * 1e3,
        };
        Ok(BenchReport {
            report_version: REPORT_VERSION,
            accuracy_averaging: "per-feature".into(),
            speedup_definition: "vocabulary_size / mean_dist_evals".into(),
            vocabulary_size: self.vocab.words.len(),
            dim: self.vocab.words.dim(),
            graph_k: self.vocab.graph.k(),
            frames: self.dataset.frames.len(),
            features: self.feature_count(),
            matched_features: self.matched.iter().filter(|&&m| m).count(),
            hint_source: self.hint_source,
            ratio: self.ratio,
            matcher_evaluations: self.matcher_evaluations,
            seeds: seeds.to_vec(),
            oracle_shared_word_fraction: self.shared_fraction(&self.oracle),
            methods: rows,
            wall_clock_ms: Some(wall),
        })
    }

    /// Evaluates every grid point and returns the points sorted by accuracy.
    pub fn sweep(&self, grid: &[MethodSpec], seeds: &[u64], subset: FeatureSubset) -> Result<Sweep> {
        let reports = grid.iter().map(|spec| self.evaluate(spec, seeds)).collect::<Result<Vec<_>>>()?;
        Ok(Sweep::from_reports(&reports, subset))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub queries: usize,
    pub accuracy: Option<f64>,
    pub speedup: Option<f64>,
    pub mean_evals: Option<f64>,
    /// Bucket `b` counts queries with `2^b <= evals < 2^(b+1)`.
    pub evals_histogram: Vec<u64>,
    /// Bucket `h` counts queries that made `h` greedy moves.
    pub hop_histogram: Vec<u64>,
}

impl SubsetStats {
    fn collect(n: usize, runs: &[MethodRun], oracle: &[u32], keep: impl Fn(usize) -> bool) -> Self {
        let mut words = Vec::new();
        let mut truth = Vec::new();
        let mut evals = Vec::new();
        let mut evals_histogram = Vec::new();
        let mut hop_histogram = Vec::new();
        for run in runs {
            for (i, r) in run.results.iter().enumerate().filter(|(i, _)| keep(*i)) {
                words.push(r.word);
                truth.push(oracle[i]);
                evals.push(r.dist_evals);
                bump(&mut evals_histogram, r.dist_evals.max(1).ilog2() as usize);
                bump(&mut hop_histogram, r.hops as usize);
            }
        }
        let queries = words.len();
        let accuracy = measure_accuracy(&words, &truth).ok();
        let speedup = measure_speedup(&evals, n).ok();
        let mean_evals = (queries > 0).then(|| evals.iter().sum::<u64>() as f64 / queries as f64);
        Self { queries, accuracy, speedup, mean_evals, evals_histogram, hop_histogram }
    }
}

fn bump(hist: &mut Vec<u64>, bucket: usize) {
    if hist.len() <= bucket {
        hist.resize(bucket + 1, 0);
    }
    hist[bucket] += 1;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub params: MethodSpec,
    pub shared_word_fraction: Option<f64>,
    pub all: SubsetStats,
    pub matched: SubsetStats,
    /// Informational; excluded from the serialized report.
    #[serde(skip)]
    pub wall_clock_ms: f64,
}

impl MethodReport {
    pub fn subset(&self, subset: FeatureSubset) -> &SubsetStats {
        match subset {
            FeatureSubset::All => &self.all,
            FeatureSubset::Matched => &self.matched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub oracle_ms: f64,
    pub methods_ms: Vec<f64>,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub report_version: u32,
    pub accuracy_averaging: String,
    pub speedup_definition: String,
    pub vocabulary_size: usize,
    pub dim: usize,
    pub graph_k: usize,
    pub frames: usize,
    pub features: usize,
    pub matched_features: usize,
    pub hint_source: HintSource,
    pub ratio: Option<f64>,
    pub matcher_evaluations: u64,
    pub seeds: Vec<u64>,
    pub oracle_shared_word_fraction: Option<f64>,
    pub methods: Vec<MethodReport>,
    /// Hardware-dependent timings; the only non-deterministic field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<WallClock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub method: String,
    pub params: MethodSpec,
    pub accuracy: f64,
    pub speedup: f64,
    pub mean_evals: f64,
    /// No other point of the same method is at least as accurate and at
    /// least as fast while strictly better in one of the two.
    pub pareto: bool,
}

impl FrontierPoint {
    pub fn from_report(report: &MethodReport, subset: FeatureSubset) -> Self {
        let s = report.subset(subset);
        Self {
            method: report.method.clone(),
            params: report.params,
            accuracy: s.accuracy.unwrap_or(0.0),
            speedup: s.speedup.unwrap_or(0.0),
            mean_evals: s.mean_evals.unwrap_or(0.0),
            pareto: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub report_version: u32,
    pub subset: FeatureSubset,
    /// Ascending accuracy, ties by descending speedup.
    pub points: Vec<FrontierPoint>,
}

impl Sweep {
    pub fn new(subset: FeatureSubset, mut points: Vec<FrontierPoint>) -> Self {
        for i in 0..points.len() {
            let p = &points[i];
            let dominated = points.iter().any(|o| {
                o.method == p.method
                    && o.accuracy >= p.accuracy
                    && o.speedup >= p.speedup
                    && (o.accuracy > p.accuracy || o.speedup > p.speedup)
            });
            points[i].pareto = !dominated;
        }
        points.sort_by(|a, b| a.accuracy.total_cmp(&b.accuracy).then(b.speedup.total_cmp(&a.speedup)));
        Self { report_version: REPORT_VERSION, subset, points }
    }

    pub fn from_reports(reports: &[MethodReport], subset: FeatureSubset) -> Self {
        Self::new(subset, reports.iter().map(|r| FrontierPoint::from_report(r, subset)).collect())
    }

    pub fn methods(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for p in &self.points {
            if !seen.contains(&p.method.as_str()) {
                seen.push(&p.method);
            }
        }
        seen
    }

    /// The Pareto point of `method` whose accuracy is nearest `target`, ties
    /// to the faster point. `None` if that point is further than `tolerance`.
    pub fn select(&self, method: &str, target: f64, tolerance: f64) -> Option<&FrontierPoint> {
        self.points
            .iter()
            .filter(|p| p.method == method && p.pareto)
            .min_by(|a, b| {
                (a.accuracy - target)
                    .abs()
                    .total_cmp(&(b.accuracy - target).abs())
                    .then(b.speedup.total_cmp(&a.speedup))
            })
            .filter(|p| (p.accuracy - target).abs() <= tolerance)
    }

    /// The fastest point of `method` with accuracy at least `min_accuracy`.
    pub fn fastest_at_least(&self, method: &str, min_accuracy: f64) -> Option<&FrontierPoint> {
        self.points
            .iter()
            .filter(|p| p.method == method && p.accuracy >= min_accuracy)
            .max_by(|a, b| a.speedup.total_cmp(&b.speedup).then(b.accuracy.total_cmp(&a.accuracy)))
    }
}
