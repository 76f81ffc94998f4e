//! Dense row-major point sets: the input corpus and its low-dimensional embedding.

use crate::error::{param, Error, Result};

/// `n` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Wraps row-major `values`. Every value must be finite.
    ///
    /// Zero rows are allowed here so that empty streaming batches can be
    /// represented; [`DataMatrix::ensure_dataset`] enforces the `n >= 2`
    /// requirement for training corpora.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(param("dimensionality must be at least 1"));
        }
        if values.len() != n * d {
            return Err(Error::Dimension {
                expected: n * d,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(param(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(param(format!(
                    "row {i} has {} columns, expected {d}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), d, values)
    }

    /// Empty matrix with `d` columns.
    pub fn empty(d: usize) -> Result<Self> {
        Self::new(0, d, Vec::new())
    }

    pub fn ensure_dataset(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::DatasetTooSmall { n: self.n });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> DataMatrix {
        DataMatrix {
            n: end - start,
            d: self.d,
            values: self.values[start * self.d..end * self.d].to_vec(),
        }
    }

    /// Selected rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            n: indices.len(),
            d: self.d,
            values,
        }
    }

    /// Appends the rows of `other`.
    pub fn append(&mut self, other: &DataMatrix) -> Result<()> {
        if other.d != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: other.d,
            });
        }
        self.values.extend_from_slice(&other.values);
        self.n += other.n;
        Ok(())
    }
}

/// `n` points in `p` dimensions; the optimizer mutates coordinates in place.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n: usize,
    p: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn new(n: usize, p: usize, coords: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(param("embedding dimensionality must be at least 1"));
        }
        if coords.len() != n * p {
            return Err(Error::Dimension {
                expected: n * p,
                got: coords.len(),
            });
        }
        Ok(Self { n, p, coords })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            coords: vec![0.0; n * p],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(1, Vec::len);
        let mut coords = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    got: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::new(rows.len(), p, coords)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.p..(i + 1) * self.p]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.p..(i + 1) * self.p]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|v| v.is_finite())
    }

    pub fn push(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.p);
        self.coords.extend_from_slice(point);
        self.n += 1;
    }

    /// Rows `start..end` as a new embedding.
    pub fn slice_rows(&self, start: usize, end: usize) -> Embedding {
        Embedding {
            n: end - start,
            p: self.p,
            coords: self.coords[start * self.p..(end) * self.p].to_vec(),
        }
    }

    /// Views the embedding as a data matrix (for metrics that compare spaces).
    pub fn to_data_matrix(&self) -> Result<DataMatrix> {
        DataMatrix::new(self.n, self.p, self.coords.clone())
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}
