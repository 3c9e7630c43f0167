//! Dense, id-addressed vector storage and the Euclidean kernel.

use alloc::vec::Vec;

use crate::{Error, Result};

/// `count` vectors of `dim` finite `f32` components, stored row-major.
///
/// Ids are dense `0..count`. The store is immutable once built (apart from
/// [`VectorStore::push`] during construction) and can be shared freely between
/// concurrent searches.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    data: Vec<f32>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        Ok(Self { dim, data: Vec::new() })
    }

    pub fn with_capacity(dim: usize, count: usize) -> Result<Self> {
        let mut store = Self::new(dim)?;
        store.data.reserve(dim * count);
        Ok(store)
    }

    /// Wraps a flat row-major buffer, validating shape and finiteness.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                expected: (data.len() / dim + 1) * dim,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { id: pos / dim });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut store = Self::with_capacity(dim, rows.len())?;
        for row in rows {
            store.push(row.as_ref())?;
        }
        Ok(store)
    }

    pub fn push(&mut self, v: &[f32]) -> Result<usize> {
        self.check_dim(v)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { id: self.len() });
        }
        self.data.extend_from_slice(v);
        Ok(self.len() - 1)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Vector `id`. Panics if `id >= len()`.
    #[inline]
    pub fn row(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn get(&self, id: usize) -> Option<&[f32]> {
        (id < self.len()).then(|| self.row(id))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f32> {
        self.data
    }

    /// New store holding the given rows, in order.
    pub fn select(&self, ids: &[usize]) -> Self {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            data.extend_from_slice(self.row(id));
        }
        Self { dim: self.dim, data }
    }

    pub(crate) fn check_dim(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok(())
    }

    pub(crate) fn check_id(&self, id: usize) -> Result<()> {
        if id >= self.len() {
            return Err(Error::IdOutOfRange { id, count: self.len() });
        }
        Ok(())
    }
}

/// Squared Euclidean distance, accumulated in `f64`.
///
/// The summation order is fixed (four interleaved lanes, then the tail), so
/// the result is bitwise reproducible and symmetric in its arguments.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        for lane in 0..4 {
            let d = f64::from(x[lane]) - f64::from(y[lane]);
            acc[lane] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in tail_a.iter().zip(tail_b) {
        let d = f64::from(*x) - f64::from(*y);
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// [`squared_l2`] that gives up once the running sum reaches `bound`.
///
/// Returns `None` when the distance is at least `bound`; otherwise returns the
/// same bits [`squared_l2`] would. Partial sums never exceed the final sum, so
/// an abandoned candidate could not have won a strict `<` comparison.
#[inline]
pub fn squared_l2_below(a: &[f32], b: &[f32], bound: f64) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    const BLOCK: usize = 32;
    let mut acc = [0.0f64; 4];
    let full = a.len() / 4 * 4;
    let mut i = 0;
    while i < full {
        let end = (i + BLOCK).min(full);
        while i < end {
            for lane in 0..4 {
                let d = f64::from(a[i + lane]) - f64::from(b[i + lane]);
                acc[lane] += d * d;
            }
            i += 4;
        }
        if (acc[0] + acc[1]) + (acc[2] + acc[3]) >= bound {
            return None;
        }
    }
    let mut tail = 0.0;
    for j in full..a.len() {
        let d = f64::from(a[j]) - f64::from(b[j]);
        tail += d * d;
    }
    let total = (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
    (total < bound).then_some(total)
}

#[inline]
pub fn l2(a: &[f32], b: &[f32]) -> f64 {
    libm::sqrt(squared_l2(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(VectorStore::new(0).is_err());
        assert!(matches!(
            VectorStore::from_flat(3, alloc::vec![1.0; 4]),
            Err(Error::LengthMismatch { .. })
        ));
        assert_eq!(
            VectorStore::from_flat(2, alloc::vec![0.0, 1.0, f32::NAN, 0.0]),
            Err(Error::NonFinite { id: 1 })
        );
        let mut s = VectorStore::new(2).unwrap();
        assert!(matches!(s.push(&[1.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
        assert_eq!(s.push(&[1.0, 2.0]), Ok(0));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn kernel_matches_naive_sum() {
        let a: Vec<f32> = (0..13).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..13).map(|i| (13 - i) as f32 * 0.25).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2)).sum();
        assert!((squared_l2(&a, &b) - naive).abs() < 1e-9);
        assert_eq!(squared_l2(&a, &b).to_bits(), squared_l2(&b, &a).to_bits());
        assert_eq!(l2(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn bounded_kernel_agrees_bitwise() {
        let a: Vec<f32> = (0..70).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..70).map(|i| (i as f32 * 0.11).cos()).collect();
        let exact = squared_l2(&a, &b);
        assert_eq!(squared_l2_below(&a, &b, f64::INFINITY).map(f64::to_bits), Some(exact.to_bits()));
        assert_eq!(squared_l2_below(&a, &b, exact), None);
        assert_eq!(squared_l2_below(&a, &b, exact * 0.1), None);
    }
}
