//! Direct banded LU factorization with partial pivoting.
//!
//! Structured-mesh discretizations in this crate are ordered so that their
//! matrices are tightly banded; the factorization stores the band densely
//! (LAPACK `gbtrf` layout, with `kl` extra superdiagonals for pivot fill) and
//! is reused across many right-hand sides.

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    kl: usize,
    /// Upper bandwidth including pivoting fill (original ku + kl).
    ku_eff: usize,
    /// Band storage, column-major: entry (i, j) lives at
    /// `ab[j * ldab + (i - j + ku_eff)]` for `-ku_eff <= i - j <= kl`.
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl Factorization {
    /// Factorizes a square sparse matrix. Fails on structurally singular
    /// matrices (empty rows) and on numerically zero pivots.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "factorization of non-square matrix",
                expected: n,
                got: a.ncols(),
            });
        }
        let mut amax = 0.0f64;
        for r in 0..n {
            let (cols, vals) = a.row(r);
            if cols.is_empty() {
                return Err(Error::StructurallySingular { row: r });
            }
            for &v in vals {
                amax = amax.max(v.abs());
            }
        }
        if amax == 0.0 && n > 0 {
            return Err(Error::NumericallySingular {
                step: 0,
                pivot: 0.0,
            });
        }

        let (kl, ku) = a.bandwidths();
        let ku_eff = ku + kl;
        let ldab = kl + ku_eff + 1;
        let mut ab = vec![0.0f64; ldab * n];
        let idx = |i: usize, j: usize| j * ldab + (i + ku_eff - j);
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                ab[idx(r, c)] += v;
            }
        }

        let tol = amax * 1e-14;
        let mut ipiv = vec![0usize; n];
        for k in 0..n {
            // partial pivoting within the band
            let imax = (k + kl).min(n - 1);
            let mut piv_row = k;
            let mut piv_val = ab[idx(k, k)].abs();
            for i in k + 1..=imax {
                let v = ab[idx(i, k)].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val <= tol {
                return Err(Error::NumericallySingular {
                    step: k,
                    pivot: ab[idx(piv_row, k)],
                });
            }
            ipiv[k] = piv_row;
            let jmax = (k + ku_eff).min(n - 1);
            if piv_row != k {
                for j in k..=jmax {
                    ab.swap(idx(k, j), idx(piv_row, j));
                }
            }
            let pivot = ab[idx(k, k)];
            for i in k + 1..=imax {
                let m = ab[idx(i, k)] / pivot;
                ab[idx(i, k)] = m;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        ab[idx(i, j)] -= m * ab[idx(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku_eff,
            ab,
            ipiv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves A x = b with the swaps interleaved in elimination order, as in
    /// LAPACK `gbtrs`.
    #[allow(clippy::needless_range_loop)] // offset-indexed band access reads clearer unsliced
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let ldab = self.kl + self.ku_eff + 1;
        let idx = |i: usize, j: usize| j * ldab + (i + self.ku_eff - j);
        for k in 0..self.n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let imax = (k + self.kl).min(self.n - 1);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=imax {
                    b[i] -= self.ab[idx(i, k)] * bk;
                }
            }
        }
        for k in (0..self.n).rev() {
            let jmax = (k + self.ku_eff).min(self.n - 1);
            let mut s = b[k];
            for j in k + 1..=jmax {
                s -= self.ab[idx(k, j)] * b[j];
            }
            b[k] = s / self.ab[idx(k, k)];
        }
    }
}
