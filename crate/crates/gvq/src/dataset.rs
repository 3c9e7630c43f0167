//! Sequence datasets on disk: one vector file per frame plus `sequence.json`
//! holding the frame list and ground-truth links.

use std::fs;
use std::path::{Path, PathBuf};

use gvq_core::sequence::SequenceDataset;
use serde::{Deserialize, Serialize};

use crate::format::{self, FormatError};

pub const SIDECAR: &str = "sequence.json";
pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: unsupported sidecar version {found} (expected {SIDECAR_VERSION})")]
    Version { path: PathBuf, found: u32 },
    #[error("{path}: {message}")]
    Integrity { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub file: String,
    pub features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub dim: usize,
    pub frames: Vec<FrameEntry>,
    /// Per frame, `(index in this frame, index in the previous frame)`.
    pub truth_links: Vec<Vec<(u32, u32)>>,
    /// Free-form description of how the sequence was produced.
    #[serde(default)]
    pub generator: serde_json::Value,
}

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:06}.gvq")
}

/// Writes `dataset` into `dir`, creating it if needed.
pub fn save_dataset(dir: impl AsRef<Path>, dataset: &SequenceDataset, generator: serde_json::Value) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io { path: dir.into(), source })?;
    let mut frames = Vec::with_capacity(dataset.frames.len());
    for (t, frame) in dataset.frames.iter().enumerate() {
        let file = frame_file_name(t);
        let path = dir.join(&file);
        format::save_vectors(&path, frame).map_err(|source| DatasetError::Format { path, source })?;
        frames.push(FrameEntry { file, features: frame.len() });
    }
    let dim = dataset.frames.first().map_or(0, |f| f.dim());
    let sidecar = Sidecar { version: SIDECAR_VERSION, dim, frames, truth_links: dataset.truth_links.clone(), generator };
    let path = dir.join(SIDECAR);
    let text = serde_json::to_string_pretty(&sidecar).map_err(|source| DatasetError::Json { path: path.clone(), source })?;
    fs::write(&path, text + "\n").map_err(|source| DatasetError::Io { path, source })
}

pub fn load_sidecar(dir: impl AsRef<Path>) -> Result<Sidecar, DatasetError> {
    let path = dir.as_ref().join(SIDECAR);
    let text = fs::read_to_string(&path).map_err(|source| DatasetError::Io { path: path.clone(), source })?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|source| DatasetError::Json { path: path.clone(), source })?;
    if sidecar.version != SIDECAR_VERSION {
        return Err(DatasetError::Version { path, found: sidecar.version });
    }
    Ok(sidecar)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<SequenceDataset, DatasetError> {
    let dir = dir.as_ref();
    let sidecar = load_sidecar(dir)?;
    let mut frames = Vec::with_capacity(sidecar.frames.len());
    for entry in &sidecar.frames {
        let path = dir.join(&entry.file);
        let frame = format::load_vectors(&path).map_err(|source| DatasetError::Format { path: path.clone(), source })?;
        if frame.len() != entry.features || frame.dim() != sidecar.dim {
            return Err(DatasetError::Integrity {
                path,
                message: format!(
                    "expected {} features of dimension {}, found {} of dimension {}",
                    entry.features,
                    sidecar.dim,
                    frame.len(),
                    frame.dim()
                ),
            });
        }
        frames.push(frame);
    }
    let dataset = SequenceDataset { frames, truth_links: sidecar.truth_links };
    dataset
        .validate()
        .map_err(|e| DatasetError::Integrity { path: dir.join(SIDECAR), message: e.to_string() })?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gvq_core::sequence::{generate, SequenceConfig, WorldModel};

    #[test]
    fn round_trip_and_tamper() {
        let cfg = SequenceConfig {
            num_frames: 4,
            features_per_frame: 12,
            overlap: 0.5,
            carry_sigma: 0.01,
            world: WorldModel::default(),
            dim: 5,
            seed: 3,
        };
        let ds = generate(&cfg, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &ds, serde_json::json!({"seed": 3})).unwrap();
        assert!(dir.path().join("frame_000003.gvq").exists());
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);

        let mut side = load_sidecar(dir.path()).unwrap();
        side.truth_links[1].push((99, 0));
        fs::write(dir.path().join(SIDECAR), serde_json::to_string(&side).unwrap()).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::Integrity { .. })));

        side.version = 2;
        fs::write(dir.path().join(SIDECAR), serde_json::to_string(&side).unwrap()).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::Version { found: 2, .. })));
    }
}
