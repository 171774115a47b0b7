//! Banded direct solvers: LU with partial pivoting (general) and Cholesky
//! (symmetric positive definite).
//!
//! Storage follows the LAPACK band layout, column major with `kl` extra rows
//! on top of the `kl + ku + 1` band to hold pivoting fill.  These kernels are
//! deliberately dependency-free so that factorizations are bit-reproducible
//! run to run.

// Band windows index several arrays through per-column offset arithmetic;
// range loops keep that arithmetic visible.
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// General banded matrix with `kl` subdiagonals and `ku` superdiagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Column-major, `ldab = 2*kl + ku + 1` rows per column.
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(
            i + self.ku >= j && j + self.kl >= i,
            "({i},{j}) outside band"
        );
        j * self.ldab() + (self.kl + self.ku + i - j)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    /// `y = A x` (used by tests and residual checks on small systems).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            if xj != 0.0 {
                for i in lo..=hi {
                    y[i] += self.ab[self.slot(i, j)] * xj;
                }
            }
        }
        y
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let mut acc = 0.0;
            for i in lo..=hi {
                acc += self.ab[self.slot(i, j)] * x[i];
            }
            y[j] = acc;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.ab.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row-sum (infinity) norm.
    pub fn inf_norm(&self) -> f64 {
        let mut sums = vec![0.0f64; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                sums[i] += self.ab[self.slot(i, j)].abs();
            }
        }
        sums.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Factor in place with partial pivoting.  Consumes the matrix: the band
    /// storage is reused for the `L` and `U` factors.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let kv = kl + ku;
        let ldab = self.ldab();
        let scale = self.max_abs();
        let tiny = f64::MIN_POSITIVE.max(scale * f64::EPSILON * 1e-4);
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let ab = &mut self.ab;

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // Pivot search in column j, rows j..=j+km.
            let col = j * ldab + kv;
            let mut jp = 0usize;
            let mut best = ab[col].abs();
            for t in 1..=km {
                let v = ab[col + t].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            if best <= tiny {
                return Err(Error::NavierEigenvalue);
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                // Swap rows j and j+jp across columns j..=ju.
                for c in j..=ju {
                    let a = c * ldab + kv + j - c;
                    let b = a + jp;
                    ab.swap(a, b);
                }
            }
            if km > 0 {
                let piv = ab[col];
                for t in 1..=km {
                    ab[col + t] /= piv;
                }
                // Rank-one update of the trailing band block.
                for c in j + 1..=ju {
                    let urow = c * ldab + kv + j - c;
                    let f = ab[urow];
                    if f != 0.0 {
                        let (lcol, ccol) = {
                            // Multipliers live in column j, target in column c.
                            let (lo, hi) = ab.split_at_mut(c * ldab);
                            (&lo[col + 1..col + 1 + km], &mut hi[kv + j - c + 1..])
                        };
                        for t in 0..km {
                            ccol[t] -= f * lcol[t];
                        }
                    }
                }
            }
        }

        Ok(BandLu {
            n,
            kl,
            ku,
            ab: std::mem::take(&mut self.ab),
            ipiv,
        })
    }
}

/// LU factorization `P A = L U` of a banded matrix.
#[derive(Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.n
    }

    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let ldab = self.ldab();
        // L solve with interleaved row interchanges.
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let bj = b[j];
            if bj != 0.0 {
                for t in 1..=km {
                    b[j + t] -= self.ab[col + t] * bj;
                }
            }
        }
        // U solve; U has bandwidth kv after pivoting fill.
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            b[j] /= self.ab[col];
            let bj = b[j];
            if bj != 0.0 {
                let imin = j.saturating_sub(kv);
                for i in imin..j {
                    b[i] -= self.ab[col + i - j] * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve `A^T x = b` in place using the same factorization.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let ldab = self.ldab();
        // U^T solve (forward substitution).
        for j in 0..n {
            let col = j * ldab + kv;
            let imin = j.saturating_sub(kv);
            let mut s = b[j];
            for i in imin..j {
                s -= self.ab[col + i - j] * b[i];
            }
            b[j] = s / self.ab[col];
        }
        // L^T solve (backward) with reversed interchanges.
        for j in (0..n).rev() {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut s = b[j];
            for t in 1..=km {
                s -= self.ab[col + t] * b[j + t];
            }
            b[j] = s;
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_transpose_in_place(&mut x);
        x
    }
}

/// Symmetric positive definite banded matrix, lower storage.
#[derive(Debug, Clone)]
pub struct BandSymMatrix {
    n: usize,
    bw: usize,
    /// Column-major, `bw + 1` rows per column; `A(j+t, j)` at `col*ldab + t`.
    ab: Vec<f64>,
}

impl BandSymMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandSymMatrix {
            n,
            bw,
            ab: vec![0.0; (bw + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Set the lower-triangle entry `A(i, j)`, `i >= j`.
    pub fn set_lower(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.ab[j * (self.bw + 1) + (i - j)] = v;
    }

    pub fn get_lower(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i >= j);
        if i - j > self.bw {
            0.0
        } else {
            self.ab[j * (self.bw + 1) + (i - j)]
        }
    }

    /// Multiply the full symmetric matrix against a vector.
    pub fn sym_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let diag = self.ab[j * (self.bw + 1)];
            y[j] += diag * x[j];
            let hi = (j + self.bw).min(self.n - 1);
            for i in (j + 1)..=hi {
                let v = self.ab[j * (self.bw + 1) + (i - j)];
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
        }
        y
    }

    /// Cholesky factor in place: `A = L L^T`.
    pub fn factor(mut self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let ldab = bw + 1;
        let ab = &mut self.ab;
        for j in 0..n {
            let ajj = ab[j * ldab];
            if ajj <= 0.0 || !ajj.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "nonpositive pivot {ajj:.3e} at column {j}"
                )));
            }
            let ajj = ajj.sqrt();
            ab[j * ldab] = ajj;
            let kn = bw.min(n - 1 - j);
            if kn == 0 {
                continue;
            }
            for t in 1..=kn {
                ab[j * ldab + t] /= ajj;
            }
            for c in 1..=kn {
                let lc = ab[j * ldab + c];
                if lc != 0.0 {
                    let (lo, hi) = ab.split_at_mut((j + c) * ldab);
                    let lcol = &lo[j * ldab + c..j * ldab + kn + 1];
                    for (t, lt) in lcol.iter().enumerate() {
                        hi[t] -= lt * lc;
                    }
                }
            }
        }
        Ok(BandCholesky {
            n,
            bw,
            ab: std::mem::take(&mut self.ab),
        })
    }
}

#[derive(Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    ab: Vec<f64>,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let bw = self.bw;
        let ldab = bw + 1;
        // L y = b.
        for j in 0..n {
            let col = j * ldab;
            let yj = b[j] / self.ab[col];
            b[j] = yj;
            if yj != 0.0 {
                let kn = bw.min(n - 1 - j);
                for t in 1..=kn {
                    b[j + t] -= self.ab[col + t] * yj;
                }
            }
        }
        // L^T x = y.
        for j in (0..n).rev() {
            let col = j * ldab;
            let kn = bw.min(n - 1 - j);
            let mut s = b[j];
            for t in 1..=kn {
                s -= self.ab[col + t] * b[j + t];
            }
            b[j] = s / self.ab[col];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
