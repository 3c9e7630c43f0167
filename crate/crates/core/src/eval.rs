//! Accuracy and cost metrics for quantization runs.

use crate::{Error, Result};

/// Fraction of queries whose returned word equals the oracle's word.
pub fn measure_accuracy(results: &[u32], oracle: &[u32]) -> Result<f64> {
    if results.len() != oracle.len() {
        return Err(Error::LengthMismatch { expected: oracle.len(), found: results.len() });
    }
    if results.is_empty() {
        return Err(Error::param("no queries"));
    }
    let hits = results.iter().zip(oracle).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / results.len() as f64)
}

/// Speedup over linear search: `n` divided by the mean evaluations per query.
pub fn measure_speedup(dist_evals: &[u64], n: usize) -> Result<f64> {
    if dist_evals.is_empty() {
        return Err(Error::param("no queries"));
    }
    let total: u64 = dist_evals.iter().sum();
    if total == 0 {
        return Err(Error::param("queries recorded no distance evaluations"));
    }
    Ok(n as f64 * dist_evals.len() as f64 / total as f64)
}

/// Over all linked feature pairs of consecutive frames, the fraction whose two
/// features were assigned the same word. `None` when there are no links.
///
/// `links[t]` pairs `(index in frame t, index in frame t - 1)`;
/// `words[t][i]` is the word of feature `i` of frame `t`.
pub fn shared_word_fraction<W: AsRef<[u32]>>(links: &[impl AsRef<[(u32, u32)]>], words: &[W]) -> Result<Option<f64>> {
    if links.len() != words.len() {
        return Err(Error::LengthMismatch { expected: words.len(), found: links.len() });
    }
    let mut pairs = 0usize;
    let mut shared = 0usize;
    for (t, frame_links) in links.iter().enumerate() {
        for &(cur, prev) in frame_links.as_ref() {
            if t == 0 {
                return Err(Error::param("first frame cannot have links"));
            }
            let a = words[t].as_ref().get(cur as usize);
            let b = words[t - 1].as_ref().get(prev as usize);
            match (a, b) {
                (Some(a), Some(b)) => {
                    pairs += 1;
                    shared += usize::from(a == b);
                }
                _ => return Err(Error::IdOutOfRange { id: cur.max(prev) as usize, count: words[t].as_ref().len() }),
            }
        }
    }
    Ok((pairs > 0).then(|| shared as f64 / pairs as f64))
}
