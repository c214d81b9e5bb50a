use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform empirical distribution over `n` points of `R^d`.
///
/// Points are stored row-major in one buffer. Duplicate rows are kept, so the
/// distribution has multiset semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Builds the distribution from a flat row-major buffer.
    pub fn from_flat(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
            });
        }
        if points.is_empty() {
            return Err(Error::Empty("empirical distribution"));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len() % dim,
            });
        }
        Ok(Self { dim, points })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("empirical distribution"))?;
        let dim = first.as_ref().len();
        let mut points = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            points.extend_from_slice(r);
        }
        Self::from_flat(dim, points)
    }

    /// One-dimensional samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Weight of every atom, `1/n`.
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for p in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let w = self.weight();
        m.iter_mut().for_each(|a| *a *= w);
        m
    }

    /// Sub-sample by index (used for cross-validation folds).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        Self::from_flat(self.dim, points)
    }
}
