//! File formats, the benchmark harness and report rendering for graph-based
//! visual-word quantization. The algorithms live in [`gvq_core`].

pub mod bench;
pub mod dataset;
pub mod format;
pub mod report;

pub use gvq_core;
