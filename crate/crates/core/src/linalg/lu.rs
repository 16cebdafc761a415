use super::CscMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse LU factorization `A(p, q) = L U` computed column by column
/// (Gilbert–Peierls) with threshold partial pivoting.
///
/// `L` is unit lower triangular with the unit diagonal stored first in each
/// column; `U` stores its diagonal last in each column. Both are kept in pivot
/// (permuted) row numbering.
#[derive(Debug, Clone)]
pub struct SparseLu<T> {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<T>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<T>,
    /// `pinv[row] = k`: original row `row` is the k-th pivot.
    pinv: Vec<usize>,
    /// `q[k]`: original column eliminated at step k.
    q: Vec<usize>,
}

impl<T: Scalar> SparseLu<T> {
    /// Factorizes `a` eliminating columns in the order `col_order`.
    ///
    /// The diagonal entry is kept as pivot whenever its magnitude is at least
    /// `diag_tol` times the largest candidate in the column.
    pub fn factorize(a: &CscMatrix<T>, col_order: &[usize], diag_tol: T) -> Result<Self> {
        let n = a.ncols();
        if a.nrows() != n {
            return Err(Error::Numerical(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                n
            )));
        }
        assert_eq!(col_order.len(), n, "column order must be a permutation");

        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut u_ptr = Vec::with_capacity(n + 1);
        let cap = a.nnz() + n;
        let mut l_idx = Vec::with_capacity(cap);
        let mut l_val = Vec::with_capacity(cap);
        let mut u_idx = Vec::with_capacity(cap);
        let mut u_val = Vec::with_capacity(cap);

        let mut x = vec![T::zero(); n];
        let mut reach = ReachWorkspace::new(n);

        l_ptr.push(0);
        u_ptr.push(0);
        for (k, &col) in col_order.iter().enumerate() {
            // x = L \ A(:, col) restricted to the reachable pattern.
            let pattern = reach.reach(a, col, &l_ptr, &l_idx, &pinv);
            for &i in pattern {
                x[i] = T::zero();
            }
            for (r, v) in a.column(col) {
                x[r] = v;
            }
            for &j in pattern {
                let jj = pinv[j];
                if jj == UNSET {
                    continue;
                }
                let xj = x[j];
                // Unit diagonal sits at l_ptr[jj]; skip it.
                for p in (l_ptr[jj] + 1)..l_ptr[jj + 1] {
                    let r = l_idx[p];
                    x[r] = x[r] - l_val[p] * xj;
                }
            }

            let mut ipiv = UNSET;
            let mut best = -T::one();
            for &i in pattern {
                if pinv[i] == UNSET {
                    let mag = x[i].abs();
                    if mag > best {
                        best = mag;
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if ipiv == UNSET || !(best > T::zero()) {
                return Err(Error::Singular(format!(
                    "no pivot available for column {col}"
                )));
            }
            if pinv[col] == UNSET && x[col].abs() >= best * diag_tol {
                ipiv = col;
            }
            let pivot = x[ipiv];
            u_idx.push(k);
            u_val.push(pivot);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(T::one());
            for &i in pattern {
                if pinv[i] == UNSET {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
                x[i] = T::zero();
            }
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
        }
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            pinv,
            q: col_order.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries in `L` and `U`, a measure of fill.
    pub fn factor_nnz(&self) -> usize {
        self.l_val.len() + self.u_val.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T], work: &mut Vec<T>) {
        assert_eq!(b.len(), self.n);
        work.clear();
        work.resize(self.n, T::zero());
        for (row, &k) in self.pinv.iter().enumerate() {
            work[k] = b[row];
        }
        self.lower_solve(work);
        self.upper_solve(work);
        for (k, &col) in self.q.iter().enumerate() {
            b[col] = work[k];
        }
    }

    /// Solves `Aᵀ x = b` in place.
    pub fn solve_transposed_in_place(&self, b: &mut [T], work: &mut Vec<T>) {
        assert_eq!(b.len(), self.n);
        work.clear();
        work.resize(self.n, T::zero());
        for (k, &col) in self.q.iter().enumerate() {
            work[k] = b[col];
        }
        self.upper_transposed_solve(work);
        self.lower_transposed_solve(work);
        for (row, &k) in self.pinv.iter().enumerate() {
            b[row] = work[k];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x, &mut Vec::new());
        x
    }

    pub fn solve_transposed(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_transposed_in_place(&mut x, &mut Vec::new());
        x
    }

    fn lower_solve(&self, x: &mut [T]) {
        for j in 0..self.n {
            let xj = x[j];
            for p in (self.l_ptr[j] + 1)..self.l_ptr[j + 1] {
                let r = self.l_idx[p];
                x[r] = x[r] - self.l_val[p] * xj;
            }
        }
    }

    fn upper_solve(&self, x: &mut [T]) {
        for j in (0..self.n).rev() {
            let diag = self.u_ptr[j + 1] - 1;
            x[j] = x[j] / self.u_val[diag];
            let xj = x[j];
            for p in self.u_ptr[j]..diag {
                let r = self.u_idx[p];
                x[r] = x[r] - self.u_val[p] * xj;
            }
        }
    }

    fn upper_transposed_solve(&self, x: &mut [T]) {
        for j in 0..self.n {
            let diag = self.u_ptr[j + 1] - 1;
            let mut acc = x[j];
            for p in self.u_ptr[j]..diag {
                acc = acc - self.u_val[p] * x[self.u_idx[p]];
            }
            x[j] = acc / self.u_val[diag];
        }
    }

    fn lower_transposed_solve(&self, x: &mut [T]) {
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in (self.l_ptr[j] + 1)..self.l_ptr[j + 1] {
                acc = acc - self.l_val[p] * x[self.l_idx[p]];
            }
            x[j] = acc;
        }
    }
}

/// Depth-first reach of a column pattern through the partially built `L`.
struct ReachWorkspace {
    marked: Vec<bool>,
    stack: Vec<(usize, usize)>,
    order: Vec<usize>,
}

impl ReachWorkspace {
    fn new(n: usize) -> Self {
        Self {
            marked: vec![false; n],
            stack: Vec::new(),
            order: Vec::with_capacity(n),
        }
    }

    /// Returns the nonzero pattern of `L \ A(:, col)` in topological order.
    fn reach<T: Scalar>(
        &mut self,
        a: &CscMatrix<T>,
        col: usize,
        l_ptr: &[usize],
        l_idx: &[usize],
        pinv: &[usize],
    ) -> &[usize] {
        self.order.clear();
        for (start, _) in a.column(col) {
            if self.marked[start] {
                continue;
            }
            self.marked[start] = true;
            self.stack.push((start, 0));
            while let Some(top) = self.stack.len().checked_sub(1) {
                let (node, mut child) = self.stack[top];
                let mut descend = None;
                let jj = pinv[node];
                if jj != usize::MAX {
                    let begin = l_ptr[jj] + 1;
                    let end = l_ptr[jj + 1];
                    while begin + child < end {
                        let next = l_idx[begin + child];
                        child += 1;
                        if !self.marked[next] {
                            descend = Some(next);
                            break;
                        }
                    }
                }
                self.stack[top].1 = child;
                match descend {
                    Some(next) => {
                        self.marked[next] = true;
                        self.stack.push((next, 0));
                    }
                    None => {
                        self.stack.pop();
                        self.order.push(node);
                    }
                }
            }
        }
        for &i in &self.order {
            self.marked[i] = false;
        }
        self.order.reverse();
        &self.order
    }
}
