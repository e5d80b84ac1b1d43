//! Compressed sparse row/column storage used by the model and the QP engine.

/// Compressed sparse column matrix with sorted, duplicate-free row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed, explicit zeros kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c] += 1;
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            col_ptr[c + 1] = col_ptr[c] + counts[c];
        }
        let mut next = col_ptr.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        // sort each column and merge duplicates
        let mut out = Self::zeros(nrows, ncols);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            scratch.extend((col_ptr[c]..col_ptr[c + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|&(r, _)| r);
            let mut last: Option<usize> = None;
            for &(r, v) in &scratch {
                if last == Some(r) {
                    *out.values.last_mut().unwrap() += v;
                } else {
                    out.row_idx.push(r);
                    out.values.push(v);
                    last = Some(r);
                }
            }
            out.col_ptr[c + 1] = out.row_idx.len();
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn col(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], self.values[k]))
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    /// y = Aᵀ x
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_mul_vec_into(x, &mut y);
        y
    }

    pub fn tr_mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                acc += self.values[k] * x[self.row_idx[k]];
            }
            y[c] = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Infinity norm of every column.
    pub fn col_norms_inf(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| self.col(c).fold(0.0f64, |m, (_, v)| m.max(v.abs())))
            .collect()
    }

    /// Infinity norm of every row.
    pub fn row_norms_inf(&self) -> Vec<f64> {
        let mut n = vec![0.0f64; self.nrows];
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                n[r] = n[r].max(v.abs());
            }
        }
        n
    }

    /// In place A ← diag(left) · A · diag(right).
    pub fn scale(&mut self, left: &[f64], right: &[f64]) {
        for c in 0..self.ncols {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                self.values[k] *= left[self.row_idx[k]] * right[c];
            }
        }
    }

    /// Keeps only the listed rows, renumbered in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.nrows];
        for (new, &old) in rows.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::new();
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                if map[r] != usize::MAX {
                    t.push((map[r], c, v));
                }
            }
        }
        Self::from_triplets(rows.len(), self.ncols, &t)
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&CscMatrix]) -> Self {
        let ncols = blocks.first().map_or(0, |b| b.ncols);
        let mut t = Vec::new();
        let mut offset = 0;
        for b in blocks {
            assert_eq!(b.ncols, ncols, "vstack column mismatch");
            for c in 0..b.ncols {
                for (r, v) in b.col(c) {
                    t.push((r + offset, c, v));
                }
            }
            offset += b.nrows;
        }
        Self::from_triplets(offset, ncols, &t)
    }
}

/// Row-major sparse matrix, the natural layout while emitting constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsrMatrix {
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Appends a row; repeated columns are merged.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let mut e: Vec<(usize, f64)> = entries.to_vec();
        e.sort_by_key(|&(c, _)| c);
        let start = self.col_idx.len();
        for (c, v) in e {
            assert!(c < self.ncols, "column {c} out of range");
            if self.col_idx.len() > start && *self.col_idx.last().unwrap() == c {
                *self.values.last_mut().unwrap() += v;
            } else {
                self.col_idx.push(c);
                self.values.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows()).map(|r| self.row_dot(r, x)).collect()
    }

    /// Widens the matrix to `ncols` columns (new columns are empty).
    pub fn grow_cols(&mut self, ncols: usize) {
        assert!(ncols >= self.ncols);
        self.ncols = ncols;
    }

    pub fn to_csc(&self) -> CscMatrix {
        let mut t = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                t.push((r, c, v));
            }
        }
        CscMatrix::from_triplets(self.nrows(), self.ncols, &t)
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
