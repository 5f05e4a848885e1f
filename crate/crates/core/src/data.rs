use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `n × p` sample, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyData);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("data contains non-finite values".into()));
        }
        Ok(Self { values })
    }

    /// Builds from row vectors; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        let p = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    /// Returns the sample made of the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        Self::new(self.values.select_rows(idx))
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &DataMatrix) -> Result<Self> {
        if other.p() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: other.p(),
            });
        }
        let n = self.n() + other.n();
        let m = DMatrix::from_fn(n, self.p(), |i, j| {
            if i < self.n() {
                self.values[(i, j)]
            } else {
                other.values[(i - self.n(), j)]
            }
        });
        Self::new(m)
    }

    /// Applies `x ↦ A x + b` to every row.
    pub fn affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        if a.nrows() != self.p() || a.ncols() != self.p() || b.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: a.nrows(),
            });
        }
        let mut out = &self.values * a.transpose();
        for mut row in out.row_iter_mut() {
            row += b.transpose();
        }
        Self::new(out)
    }
}
