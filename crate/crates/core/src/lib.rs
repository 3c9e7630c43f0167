//! Graph-based vector quantization for bag-of-visual-words pipelines.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the pure
//! algorithms: vector storage and distance accounting, exact k-NN graph
//! construction, greedy graph search (GNNS) with sequential warm starts,
//! k-means vocabularies that emit their search graph, the KD-forest and
//! hierarchical k-means baselines, the bag-of-words layer and a synthetic
//! sequence generator. File formats, the benchmark harness and the CLI live
//! in the `gvq` crate.
//!
//! Every search charges its distance evaluations to a [`DistanceMeter`], which
//! is the unit the benchmarks report speedups in.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod bow;
mod error;
pub mod eval;
pub mod gnns;
pub mod graph;
pub mod meter;
pub mod quantizer;
pub mod rng;
pub mod sequence;
pub mod store;
pub mod synth;
pub mod vocabulary;

pub use error::{Error, Result};
pub use gnns::{GnnsIndex, GnnsParams, SearchOutcome};
pub use graph::{GraphView, KnnGraph};
pub use meter::{DistanceMeter, SearchContext};
pub use quantizer::{QuantizationResult, Quantizer};
pub use rng::Rng;
pub use store::VectorStore;
pub use vocabulary::{KMeansConfig, Vocabulary};
