use std::ops::{Index, IndexMut};

use super::CscMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix with a Gaussian-elimination solver.
///
/// Serves as the reference against which the sparse factorization is checked.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// Solves `A x = b` by elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.nrows;
        if self.ncols != n || b.len() != n {
            return Err(Error::Numerical("dense solve dimension mismatch".into()));
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let (piv, mag) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(mag > T::zero()) {
                return Err(Error::Singular(format!("dense pivot {k} is zero")));
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                x.swap(k, piv);
            }
            let d = a[k * n + k];
            for r in (k + 1)..n {
                let f = a[r * n + k] / d;
                if f == T::zero() {
                    continue;
                }
                for c in k..n {
                    a[r * n + c] = a[r * n + c] - f * a[k * n + c];
                }
                x[r] = x[r] - f * x[k];
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for c in (k + 1)..n {
                acc = acc - a[k * n + c] * x[c];
            }
            x[k] = acc / a[k * n + k];
        }
        Ok(x)
    }
}

impl<T: Scalar> From<&CscMatrix<T>> for DenseMatrix<T> {
    fn from(m: &CscMatrix<T>) -> Self {
        m.to_dense()
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.ncols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.ncols + c]
    }
}
