//! Complex banded LU with partial pivoting (LAPACK gbtf2 layout).

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Band storage: entry (i, j) lives at `ab[j * ldab + kv + i - j]`, `kv = kl + ku`.
/// The top `kl` rows of each column are fill-in space for pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    band: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ldab, ab: vec![ZERO; ldab * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "({i},{j}) outside band");
        j * self.ldab + self.kl + self.ku + i - j
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            ZERO
        }
    }

    pub fn add(&mut self, i: usize, j: usize, x: Complex64) {
        let s = self.slot(i, j);
        self.ab[s] += x;
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.slot(i, j)] * x[j];
            }
        }
        y
    }

    pub fn factorize(mut self) -> Result<BandedLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = -1.0;
            for p in 0..=km {
                let a = self.ab[col + kv + p].norm();
                if a > best {
                    best = a;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(Error::Singular { pivot: j });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = c * ldab + kv + j + jp - c;
                    let b = c * ldab + kv + j - c;
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.ab[col + kv];
                for p in 1..=km {
                    self.ab[col + kv + p] *= inv;
                }
                for c in j + 1..=ju {
                    let base = c * ldab + kv + j - c;
                    let t = self.ab[base];
                    if t == ZERO {
                        continue;
                    }
                    for p in 1..=km {
                        let l = self.ab[col + kv + p];
                        self.ab[base + p] -= l * t;
                    }
                }
            }
        }
        Ok(BandedLu { band: self, ipiv })
    }
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.band.n
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_tail_in_place(&mut x, 0, 0);
        x
    }

    /// Solve where `b[..first_nonzero]` vanishes and only `x[keep_from..]` is needed.
    /// Entries of the result below `keep_from` are left undefined.
    pub fn solve_tail(&self, b: &[Complex64], first_nonzero: usize, keep_from: usize) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_tail_in_place(&mut x, first_nonzero, keep_from);
        x
    }

    fn solve_tail_in_place(&self, x: &mut [Complex64], first_nonzero: usize, keep_from: usize) {
        let BandMatrix { n, kl, ku, ldab, ref ab } = self.band;
        let kv = kl + ku;
        let start = first_nonzero.saturating_sub(kl);
        for j in start..n.saturating_sub(1) {
            let l = self.ipiv[j];
            if l != j {
                x.swap(l, j);
            }
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            for p in 1..=km {
                x[j + p] -= ab[col + p] * xj;
            }
        }
        for j in (keep_from..n).rev() {
            let col = j * ldab + kv;
            x[j] /= ab[col];
            let xj = x[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                x[i] -= ab[col + i - j] * xj;
            }
        }
    }

    /// Solves `A^T x = b` (or `A^H x = b` when `conjugate`).
    pub fn solve_transposed(&self, b: &[Complex64], conjugate: bool) -> Vec<Complex64> {
        let BandMatrix { n, kl, ku, ldab, ref ab } = self.band;
        let kv = kl + ku;
        let cj = |z: Complex64| if conjugate { z.conj() } else { z };
        let mut x = b.to_vec();
        for j in 0..n {
            let col = j * ldab + kv;
            let lo = j.saturating_sub(kv);
            let mut s = x[j];
            for (i, xi) in x.iter().enumerate().take(j).skip(lo) {
                s -= cj(ab[col + i - j]) * xi;
            }
            x[j] = s / cj(ab[col]);
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut s = x[j];
            for p in 1..=km {
                s -= cj(ab[col + p]) * x[j + p];
            }
            x[j] = s;
            let l = self.ipiv[j];
            if l != j {
                x.swap(l, j);
            }
        }
        x
    }
}
