//! Flat k-means vocabularies that emit their k-NN search graph.
//!
//! Lloyd's algorithm with k-means++ seeding. The final assignment pass also
//! evaluates every centroid pair once (`C * (C - 1) / 2` extra distances) and
//! keeps the nearest `graph_k` of each, which yields exactly the graph a
//! brute-force build over the returned words would produce.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{build_symmetric, KnnGraph};
use crate::meter::DistanceMeter;
use crate::rng::Rng;
use crate::store::{squared_l2, squared_l2_below, VectorStore};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub clusters: usize,
    pub max_iters: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(clusters: usize, seed: u64) -> Self {
        Self { clusters, max_iters: 100, tol: 1e-4, seed }
    }
}

/// Distance evaluations spent in each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KMeansEvaluations {
    pub seeding: u64,
    pub assignment: u64,
    /// Centroid-centroid evaluations of the final pass (graph extraction).
    pub graph: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutput {
    pub centroids: VectorStore,
    pub assignments: Vec<u32>,
    /// Sum of squared distances to the assigned centroids.
    pub objective: f64,
    /// Objective after every assignment pass.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: KMeansEvaluations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabMeta {
    pub clusters: usize,
    pub dim: usize,
    pub graph_k: usize,
    pub seed: u64,
    pub objective: f64,
}

/// Visual words plus their exact k-NN graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub words: VectorStore,
    pub graph: KnnGraph,
    pub meta: VocabMeta,
}

impl Vocabulary {
    /// Assembles a vocabulary, checking that the graph covers the words.
    pub fn from_parts(words: VectorStore, graph: KnnGraph, meta: VocabMeta) -> Result<Self> {
        if graph.len() != words.len() {
            return Err(Error::LengthMismatch { expected: words.len(), found: graph.len() });
        }
        if meta.clusters != words.len() || meta.dim != words.dim() || meta.graph_k != graph.k() {
            return Err(Error::param("vocabulary metadata disagrees with its contents"));
        }
        Ok(Self { words, graph, meta })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// k-means++ seeding over `ids`: returns `c` ids of the chosen seed points.
pub(crate) fn plus_plus_seeds(
    store: &VectorStore,
    ids: &[u32],
    c: usize,
    rng: &mut Rng,
    meter: &mut DistanceMeter,
) -> Vec<u32> {
    debug_assert!(c >= 1 && c <= ids.len());
    let mut chosen = Vec::with_capacity(c);
    let mut taken = vec![false; ids.len()];
    let first = rng.below(ids.len());
    chosen.push(ids[first]);
    taken[first] = true;
    let mut min_d: Vec<f64> = ids
        .iter()
        .map(|&i| meter.squared_free(store.row(i as usize), store.row(ids[first] as usize)))
        .collect();
    while chosen.len() < c {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.unit() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (pos, &d) in min_d.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(pos);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // every remaining point coincides with a seed
            taken.iter().position(|t| !t).expect("fewer seeds than points")
        };
        taken[pick] = true;
        let center = store.row(ids[pick] as usize);
        chosen.push(ids[pick]);
        for (pos, &i) in ids.iter().enumerate() {
            let d = meter.squared_free(store.row(i as usize), center);
            if d < min_d[pos] {
                min_d[pos] = d;
            }
        }
    }
    chosen
}

/// Nearest centroid (ties to the lower index) and its squared distance.
#[inline]
pub(crate) fn nearest_centroid(centroids: &VectorStore, x: &[f32]) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (j, c) in centroids.rows().enumerate() {
        if let Some(d) = squared_l2_below(c, x, best.1) {
            best = (j as u32, d);
        }
    }
    best
}

/// Means of the assigned points; clusters without members keep their centroid.
pub(crate) fn update_means(
    store: &VectorStore,
    ids: &[u32],
    assignments: &[u32],
    centroids: &mut VectorStore,
) -> Vec<usize> {
    let dim = store.dim();
    let c = centroids.len();
    let mut sums = vec![0.0f64; c * dim];
    let mut counts = vec![0usize; c];
    for (&i, &a) in ids.iter().zip(assignments) {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(store.row(i as usize)) {
            *s += f64::from(*v);
        }
    }
    let mut flat = centroids.as_flat().to_vec();
    for j in (0..c).filter(|&j| counts[j] > 0) {
        let inv = counts[j] as f64;
        for (dst, s) in flat[j * dim..(j + 1) * dim].iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
            *dst = (s / inv) as f32;
        }
    }
    *centroids = VectorStore::from_flat(dim, flat).expect("means of finite vectors are finite");
    counts
}

/// Lloyd's k-means with k-means++ seeding.
///
/// Each iteration is an assignment pass (ties to the lower centroid id)
/// followed, unless the run stops, by a mean update. The run stops after
/// `max_iters` passes, when no assignment changes, or when the relative
/// objective decrease drops below `tol`. A cluster left empty by a pass is
/// reseeded at the point farthest from its own (updated) centroid; the run
/// keeps going past its stopping point (for at most another `max_iters`
/// passes) while any cluster is empty.
///
/// The returned centroids are the ones the final assignment pass used, so the
/// assignments are a fixed point of reassignment.
pub fn kmeans(train: &VectorStore, cfg: &KMeansConfig) -> Result<KMeansOutput> {
    lloyd(train, cfg, None).map(|(out, _)| out)
}

/// k-means plus the exact `graph_k`-NN graph over the resulting words,
/// extracted during the final pass.
pub fn build_vocabulary(train: &VectorStore, cfg: &KMeansConfig, graph_k: usize) -> Result<(Vocabulary, KMeansOutput)> {
    if graph_k == 0 || graph_k >= cfg.clusters {
        return Err(Error::param("graph degree must satisfy 1 <= k <= C - 1"));
    }
    let (out, graph) = lloyd(train, cfg, Some(graph_k))?;
    let graph = graph.expect("graph requested");
    let meta = VocabMeta {
        clusters: out.centroids.len(),
        dim: train.dim(),
        graph_k,
        seed: cfg.seed,
        objective: out.objective,
    };
    let vocab = Vocabulary { words: out.centroids.clone(), graph, meta };
    Ok((vocab, out))
}

fn validate(train: &VectorStore, cfg: &KMeansConfig) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyStore);
    }
    if cfg.clusters == 0 || cfg.clusters > train.len() {
        return Err(Error::param("cluster count must satisfy 1 <= C <= n"));
    }
    if cfg.max_iters == 0 {
        return Err(Error::param("max_iters must be positive"));
    }
    if !(cfg.tol >= 0.0 && cfg.tol.is_finite()) {
        return Err(Error::param("tol must be a non-negative finite number"));
    }
    Ok(())
}

fn lloyd(train: &VectorStore, cfg: &KMeansConfig, graph_k: Option<usize>) -> Result<(KMeansOutput, Option<KnnGraph>)> {
    validate(train, cfg)?;
    let n = train.len();
    let c = cfg.clusters;
    let mut rng = Rng::new(cfg.seed);
    let mut evals = KMeansEvaluations::default();
    let ids: Vec<u32> = (0..n as u32).collect();

    let mut centroids = if c == n {
        train.clone()
    } else {
        let mut meter = DistanceMeter::new();
        let seeds = plus_plus_seeds(train, &ids, c, &mut rng, &mut meter);
        evals.seeding = meter.evaluations();
        let seeds: Vec<usize> = seeds.into_iter().map(|s| s as usize).collect();
        train.select(&seeds)
    };

    let mut assignments = vec![u32::MAX; n];
    let mut dists = vec![0.0f64; n];
    let mut history = Vec::new();
    let mut converged = false;
    loop {
        let mut changed = false;
        let mut objective = 0.0;
        let mut counts = vec![0usize; c];
        for i in 0..n {
            let (a, d) = nearest_centroid(&centroids, train.row(i));
            changed |= assignments[i] != a;
            assignments[i] = a;
            dists[i] = d;
            counts[a as usize] += 1;
            objective += d;
        }
        evals.assignment += (n * c) as u64;
        let previous = history.last().copied();
        history.push(objective);
        let passes = history.len();

        let settled = !changed
            || previous.is_some_and(|p: f64| p <= 0.0 || (p - objective) / p < cfg.tol);
        converged |= settled;
        let has_empty = counts.contains(&0);
        let stop = (settled || passes >= cfg.max_iters) && (!has_empty || passes >= 2 * cfg.max_iters);
        if stop {
            let graph = match graph_k {
                Some(k) => {
                    let mut meter = DistanceMeter::new();
                    let g = build_symmetric(&centroids, k, &mut meter)?;
                    evals.graph = meter.evaluations();
                    Some(g)
                }
                None => None,
            };
            let out = KMeansOutput {
                centroids,
                assignments,
                objective,
                history,
                iterations: passes,
                converged: converged && !has_empty,
                evaluations: evals,
            };
            return Ok((out, graph));
        }

        let counts = update_means(train, &ids, &assignments, &mut centroids);
        reseed_empty(train, &assignments, &counts, &mut centroids, &mut evals);
    }
}

/// Moves every empty centroid onto a distinct point farthest from its own
/// centroid (ties to the lower point id). Points already sitting on their
/// centroid are never used.
fn reseed_empty(
    train: &VectorStore,
    assignments: &[u32],
    counts: &[usize],
    centroids: &mut VectorStore,
    evals: &mut KMeansEvaluations,
) {
    let empty: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut spread: Vec<(f64, usize)> = (0..train.len())
        .map(|i| (squared_l2(train.row(i), centroids.row(assignments[i] as usize)), i))
        .filter(|&(d, _)| d > 0.0)
        .collect();
    evals.assignment += train.len() as u64;
    spread.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let dim = train.dim();
    let mut flat = centroids.as_flat().to_vec();
    for (&j, &(_, i)) in empty.iter().zip(&spread) {
        flat[j * dim..(j + 1) * dim].copy_from_slice(train.row(i));
    }
    *centroids = VectorStore::from_flat(dim, flat).expect("training points are finite");
}
