use crate::scalar::Scalar;

/// Accumulates `(row, col, value)` entries; duplicates are summed on compression.
#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> TripletBuilder<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        assert!(row < self.nrows && col < self.ncols, "triplet out of bounds");
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CscMatrix<T> {
        // Stable sort keeps duplicate summation order fixed.
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowidx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                let tail = values.last_mut().expect("duplicate follows an entry");
                *tail = *tail + v;
                continue;
            }
            rowidx.push(r);
            values.push(v);
            colptr[c + 1] += 1;
            last = Some((r, c));
        }
        for c in 0..self.ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr,
            rowidx,
            values,
        }
    }
}

/// Compressed sparse column matrix with sorted row indices per column.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Entries `(row, value)` of column `col`.
    pub fn column(&self, col: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.colptr[col]..self.colptr[col + 1];
        self.rowidx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let range = self.colptr[col]..self.colptr[col + 1];
        match self.rowidx[range.clone()].binary_search(&row) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for (c, &xc) in x.iter().enumerate() {
            for (r, v) in self.column(c) {
                y[r] = y[r] + v * xc;
            }
        }
        y
    }

    /// `y = Aᵀ x`
    pub fn mul_vec_transposed(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|c| self.column(c).fold(T::zero(), |acc, (r, v)| acc + v * x[r]))
            .collect()
    }

    pub fn transpose(&self) -> CscMatrix<T> {
        let mut t = TripletBuilder::new(self.ncols, self.nrows);
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                t.push(c, r, v);
            }
        }
        t.build()
    }

    pub fn to_dense(&self) -> super::DenseMatrix<T> {
        let mut d = super::DenseMatrix::zeros(self.nrows, self.ncols);
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                d[(r, c)] = v;
            }
        }
        d
    }
}
