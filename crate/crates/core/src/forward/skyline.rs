//! Profile (skyline) LU without pivoting for structurally symmetric complex
//! matrices. Used for the gauged FEM systems, whose Hermitian part is
//! positive definite, so no pivoting is needed.

use crate::{Error, Result, C64};

/// Compressed sparse rows.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<C64>,
}

impl CsrMatrix {
    /// Pattern from `(row, col)` pairs; values zero.
    pub fn from_pattern(n: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _) in &pairs {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col = pairs.iter().map(|&(_, c)| c).collect::<Vec<_>>();
        let val = vec![C64::new(0.0, 0.0); col.len()];
        Self { n, row_ptr, col, val }
    }

    pub fn index(&self, r: usize, c: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    pub fn add(&mut self, r: usize, c: usize, v: C64) {
        let k = self.index(r, c).expect("entry outside sparsity pattern");
        self.val[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.index(r, c).map_or(C64::new(0.0, 0.0), |k| self.val[k])
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }
}

/// `A = L U` with unit lower `L` stored by rows and `U` by columns inside
/// the envelope `first[i]..i`.
#[derive(Clone, Debug)]
pub struct SkylineLu {
    first: Vec<usize>,
    off: Vec<usize>,
    lower: Vec<C64>,
    upper: Vec<C64>,
    diag: Vec<C64>,
}

impl SkylineLu {
    /// Factors `a`; its sparsity pattern must be symmetric.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut first = vec![0usize; n];
        for (i, f) in first.iter_mut().enumerate() {
            *f = a.row(i).map(|(c, _)| c).min().unwrap_or(i).min(i);
        }
        let mut off = vec![0usize; n + 1];
        for i in 0..n {
            off[i + 1] = off[i] + (i - first[i]);
        }
        let zero = C64::new(0.0, 0.0);
        let mut lower = vec![zero; off[n]];
        let mut upper = vec![zero; off[n]];
        let mut diag = vec![zero; n];
        let mut scale = 0.0f64;
        for i in 0..n {
            for (j, v) in a.row(i) {
                scale = scale.max(v.norm());
                if j < i {
                    lower[off[i] + j - first[i]] = v;
                } else if j > i {
                    if i < first[j] {
                        return Err(Error::Forward("sparsity pattern is not symmetric".into()));
                    }
                    upper[off[j] + i - first[j]] = v;
                } else {
                    diag[i] = v;
                }
            }
        }
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            // column i of U
            for j in fi..i {
                let k0 = fi.max(first[j]);
                let lj = &lower[off[j] + k0 - first[j]..off[j] + j - first[j]];
                let col = &mut upper[off[i]..off[i + 1]];
                let (done, rest) = col.split_at_mut(j - fi);
                let s: C64 = lj.iter().zip(&done[k0 - fi..]).map(|(l, u)| l * u).sum();
                rest[0] -= s;
            }
            // row i of L
            for j in fi..i {
                let k0 = fi.max(first[j]);
                let uj = &upper[off[j] + k0 - first[j]..off[j] + j - first[j]];
                let row = &mut lower[off[i]..off[i + 1]];
                let (done, rest) = row.split_at_mut(j - fi);
                let s: C64 = done[k0 - fi..].iter().zip(uj).map(|(l, u)| l * u).sum();
                rest[0] = (rest[0] - s) / diag[j];
            }
            let li = &lower[off[i]..off[i + 1]];
            let ui = &upper[off[i]..off[i + 1]];
            let s: C64 = li.iter().zip(ui).map(|(l, u)| l * u).sum();
            diag[i] -= s;
            if !(diag[i].norm() > tiny) {
                return Err(Error::Singular { pivot: i });
            }
        }
        Ok(Self { first, off, lower, upper, diag })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Entries stored in the envelope (both triangles plus diagonal).
    pub fn envelope_size(&self) -> usize {
        2 * self.lower.len() + self.diag.len()
    }

    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.n();
        for i in 0..n {
            let fi = self.first[i];
            let li = &self.lower[self.off[i]..self.off[i + 1]];
            let s: C64 = li.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            x[i] /= self.diag[i];
            let xi = x[i];
            let fi = self.first[i];
            let ui = &self.upper[self.off[i]..self.off[i + 1]];
            for (y, u) in x[fi..i].iter_mut().zip(ui) {
                *y -= u * xi;
            }
        }
    }
}
