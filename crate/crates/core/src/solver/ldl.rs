//! Sparse LDLᵀ for quasi-definite matrices (up-looking, elimination-tree based)
//! with an approximate-minimum-degree fill-reducing ordering.

use thiserror::Error;

use crate::sparse::CscMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum LdlError {
    #[error("matrix is not square or not upper triangular")]
    NotUpper,
    #[error("fill-reducing ordering failed: {0}")]
    Ordering(String),
    #[error("zero pivot at column {0}")]
    ZeroPivot(usize),
}

const UNKNOWN: usize = usize::MAX;

/// Factorization `P K Pᵀ = L D Lᵀ` of a symmetric matrix given by its upper triangle.
#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    perm: Vec<usize>,
    /// Permuted upper triangle; `map[k]` is where input entry `k` lands.
    ap: Vec<usize>,
    ai: Vec<usize>,
    ax: Vec<f64>,
    map: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    work: Vec<f64>,
}

impl Ldl {
    /// Symbolic analysis plus numeric factorization of `upper`.
    pub fn new(upper: &CscMatrix) -> Result<Self, LdlError> {
        let n = upper.ncols;
        if upper.nrows != n {
            return Err(LdlError::NotUpper);
        }
        for c in 0..n {
            if upper.col(c).any(|(r, _)| r > c) {
                return Err(LdlError::NotUpper);
            }
        }
        let perm = if n == 0 {
            Vec::new()
        } else {
            let (p, _, _) = amd::order(n, &upper.col_ptr, &upper.row_idx, &amd::Control::default())
                .map_err(|s| LdlError::Ordering(format!("{s:?}")))?;
            p
        };
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }

        // permute: entry (r, c) goes to column max(ir, ic), row min(ir, ic)
        let nnz = upper.nnz();
        let mut counts = vec![0usize; n];
        for c in 0..n {
            for (r, _) in upper.col(c) {
                counts[iperm[r].max(iperm[c])] += 1;
            }
        }
        let mut ap = vec![0usize; n + 1];
        for j in 0..n {
            ap[j + 1] = ap[j] + counts[j];
        }
        let mut next = ap.clone();
        let mut ai = vec![0usize; nnz];
        let mut map = vec![0usize; nnz];
        for c in 0..n {
            for k in upper.col_ptr[c]..upper.col_ptr[c + 1] {
                let (pr, pc) = (iperm[upper.row_idx[k]], iperm[c]);
                let col = pr.max(pc);
                ai[next[col]] = pr.min(pc);
                map[k] = next[col];
                next[col] += 1;
            }
        }

        let (etree, lnz) = elimination_tree(n, &ap, &ai);
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let mut f = Self {
            n,
            perm,
            ap,
            ai,
            ax: vec![0.0; nnz],
            map,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            work: vec![0.0; n],
        };
        f.refactor(&upper.values)?;
        Ok(f)
    }

    /// Numeric refactorization with new values on the original sparsity pattern.
    pub fn refactor(&mut self, values: &[f64]) -> Result<(), LdlError> {
        assert_eq!(values.len(), self.map.len());
        for (k, &v) in values.iter().enumerate() {
            self.ax[self.map[k]] = v;
        }
        let n = self.n;
        let mut y_vals = vec![0.0; n];
        let mut y_used = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();

        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    self.d[k] += self.ax[p];
                    continue;
                }
                y_vals[b] += self.ax[p];
                if y_used[b] {
                    continue;
                }
                y_used[b] = true;
                elim[0] = b;
                let mut ne = 1;
                let mut nxt = self.etree[b];
                while nxt != UNKNOWN && nxt < k {
                    if y_used[nxt] {
                        break;
                    }
                    y_used[nxt] = true;
                    elim[ne] = nxt;
                    ne += 1;
                    nxt = self.etree[nxt];
                }
                while ne > 0 {
                    ne -= 1;
                    y_idx[nnz_y] = elim[ne];
                    nnz_y += 1;
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..tmp {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                let l = yc * self.dinv[c];
                self.lx[tmp] = l;
                self.d[k] -= yc * l;
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_used[c] = false;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(LdlError::ZeroPivot(k));
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `K x = b` in place.
    pub fn solve(&mut self, b: &mut [f64]) {
        let n = self.n;
        let x = &mut self.work;
        for k in 0..n {
            x[k] = b[self.perm[k]];
        }
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for j in self.lp[i]..self.lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Number of positive entries of D; equals the positive inertia of K.
    pub fn positive_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v > 0.0).count()
    }
}

fn elimination_tree(n: usize, ap: &[usize], ai: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut work = vec![UNKNOWN; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![UNKNOWN; n];
    for j in 0..n {
        work[j] = j;
        for p in ap[j]..ap[j + 1] {
            let mut i = ai[p];
            while work[i] != j {
                if etree[i] == UNKNOWN {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    (etree, lnz)
}

/// Upper triangle of a full symmetric CSC matrix.
pub fn upper_triangle(m: &CscMatrix) -> CscMatrix {
    let mut t = Vec::with_capacity(m.nnz());
    for c in 0..m.ncols {
        for (r, v) in m.col(c) {
            if r <= c {
                t.push((r, c, v));
            }
        }
    }
    CscMatrix::from_triplets(m.nrows, m.ncols, &t)
}
