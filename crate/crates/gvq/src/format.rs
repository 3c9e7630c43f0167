//! Little-endian binary containers.
//!
//! * vectors (`GVQ1`): magic, `u32` dim, `u64` count, `count * dim` `f32`.
//! * graphs (`GKG1`): magic, `u32` k, `u64` n, then `n` rows of `k` pairs
//!   `(u32 id, f32 distance)`.
//! * vocabularies (`GVC1`): magic, a vector block, a graph block, then
//!   `u64` C, `u32` d, `u32` k, `u64` seed, `f64` objective.
//!
//! The fourth magic byte is the format version.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use gvq_core::vocabulary::VocabMeta;
use gvq_core::{KnnGraph, VectorStore, Vocabulary};

pub const VECTORS_MAGIC: [u8; 4] = *b"GVQ1";
pub const GRAPH_MAGIC: [u8; 4] = *b"GKG1";
pub const VOCAB_MAGIC: [u8; 4] = *b"GVC1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported {kind} version {found:?} (expected {expected:?})")]
    UnsupportedVersion { kind: &'static str, expected: char, found: char },
    #[error("file is truncated")]
    Truncated,
    #[error("unexpected trailing bytes after {0} block")]
    TrailingData(&'static str),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Invalid(#[from] gvq_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Truncated,
        _ => FormatError::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_magic(r: &mut impl Read, expected: [u8; 4], kind: &'static str) -> Result<()> {
    let mut found = [0u8; 4];
    read_exact(r, &mut found)?;
    if found == expected {
        return Ok(());
    }
    if found[..3] == expected[..3] {
        return Err(FormatError::UnsupportedVersion {
            kind,
            expected: expected[3] as char,
            found: found[3] as char,
        });
    }
    Err(FormatError::BadMagic {
        expected: String::from_utf8_lossy(&expected).into_owned(),
        found: String::from_utf8_lossy(&found).into_owned(),
    })
}

fn expect_eof(r: &mut impl Read, kind: &'static str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(FormatError::TrailingData(kind)),
    }
}

/// Reads `len` bytes, refusing absurd sizes before allocating.
fn read_payload(r: &mut impl Read, len: u64) -> Result<Vec<u8>> {
    let len = usize::try_from(len).map_err(|_| FormatError::Integrity("payload too large".into()))?;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(FormatError::Truncated);
    }
    Ok(buf)
}

pub fn write_vectors(w: &mut impl Write, store: &VectorStore) -> io::Result<()> {
    w.write_all(&VECTORS_MAGIC)?;
    w.write_all(&(store.dim() as u32).to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for v in store.as_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_vectors(r: &mut impl Read) -> Result<VectorStore> {
    read_magic(r, VECTORS_MAGIC, "vector")?;
    let dim = read_u32(r)? as u64;
    let count = read_u64(r)?;
    let bytes = count
        .checked_mul(dim)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| FormatError::Integrity("vector block size overflows".into()))?;
    let payload = read_payload(r, bytes)?;
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(VectorStore::from_flat(dim as usize, data)?)
}

pub fn write_graph(w: &mut impl Write, graph: &KnnGraph) -> io::Result<()> {
    w.write_all(&GRAPH_MAGIC)?;
    w.write_all(&(graph.k() as u32).to_le_bytes())?;
    w.write_all(&(graph.len() as u64).to_le_bytes())?;
    for (id, d) in graph.raw_neighbors().iter().zip(graph.raw_distances()) {
        w.write_all(&id.to_le_bytes())?;
        w.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_graph(r: &mut impl Read) -> Result<KnnGraph> {
    read_magic(r, GRAPH_MAGIC, "graph")?;
    let k = read_u32(r)? as u64;
    let n = read_u64(r)?;
    let bytes = n
        .checked_mul(k)
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| FormatError::Integrity("graph block size overflows".into()))?;
    let payload = read_payload(r, bytes)?;
    let mut ids = Vec::with_capacity(payload.len() / 8);
    let mut dists = Vec::with_capacity(payload.len() / 8);
    for pair in payload.chunks_exact(8) {
        ids.push(u32::from_le_bytes(pair[..4].try_into().unwrap()));
        dists.push(f32::from_le_bytes(pair[4..].try_into().unwrap()));
    }
    Ok(KnnGraph::from_parts(k as usize, n as usize, ids, dists)?)
}

pub fn write_vocabulary(w: &mut impl Write, vocab: &Vocabulary) -> io::Result<()> {
    w.write_all(&VOCAB_MAGIC)?;
    write_vectors(w, &vocab.words)?;
    write_graph(w, &vocab.graph)?;
    let m = &vocab.meta;
    w.write_all(&(m.clusters as u64).to_le_bytes())?;
    w.write_all(&(m.dim as u32).to_le_bytes())?;
    w.write_all(&(m.graph_k as u32).to_le_bytes())?;
    w.write_all(&m.seed.to_le_bytes())?;
    w.write_all(&m.objective.to_le_bytes())?;
    Ok(())
}

pub fn read_vocabulary(r: &mut impl Read) -> Result<Vocabulary> {
    read_magic(r, VOCAB_MAGIC, "vocabulary")?;
    let words = read_vectors(r)?;
    let graph = read_graph(r)?;
    let clusters = read_u64(r)? as usize;
    let dim = read_u32(r)? as usize;
    let graph_k = read_u32(r)? as usize;
    let seed = read_u64(r)?;
    let objective = f64::from_le_bytes(read_u64(r)?.to_le_bytes());
    if graph.len() != words.len() {
        return Err(FormatError::Integrity(format!(
            "graph has {} nodes but vocabulary has {} words",
            graph.len(),
            words.len()
        )));
    }
    let meta = VocabMeta { clusters, dim, graph_k, seed, objective };
    Vocabulary::from_parts(words, graph, meta).map_err(|e| FormatError::Integrity(e.to_string()))
}

fn save_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn load_with<T>(path: &Path, kind: &'static str, f: impl FnOnce(&mut BufReader<File>) -> Result<T>) -> Result<T> {
    let mut r = BufReader::new(File::open(path)?);
    let value = f(&mut r)?;
    expect_eof(&mut r, kind)?;
    Ok(value)
}

pub fn save_vectors(path: impl AsRef<Path>, store: &VectorStore) -> Result<()> {
    save_with(path.as_ref(), |w| write_vectors(w, store))
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<VectorStore> {
    load_with(path.as_ref(), "vector", read_vectors)
}

pub fn save_graph(path: impl AsRef<Path>, graph: &KnnGraph) -> Result<()> {
    save_with(path.as_ref(), |w| write_graph(w, graph))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<KnnGraph> {
    load_with(path.as_ref(), "graph", read_graph)
}

pub fn save_vocabulary(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<()> {
    save_with(path.as_ref(), |w| write_vocabulary(w, vocab))
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary> {
    load_with(path.as_ref(), "vocabulary", read_vocabulary)
}
