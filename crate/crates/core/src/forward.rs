//! Dirichlet problem for `-Laplace + v` on the polar grid and the discrete DtN map.
//!
//! Finite-volume 5-point stencil; the outer face uses a ghost value
//! `u_g = (8 f - 6 u_{n-1} + u_{n-2}) / 3` (quadratic through the wall), which makes
//! both the solution and the one-sided normal derivative second order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::banded::{BandMatrix, BandedLu};
use crate::error::{Error, Result};
use crate::field::{CMat, MatrixField};
use crate::grid::DomainGrid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Square of the first zero of J0: smallest Dirichlet eigenvalue of `-Laplace` on the unit disk.
pub const J01_SQUARED: f64 = 5.783_185_962_946_784;

/// Default near-singularity threshold for the spectrum check.
pub const DEFAULT_SPECTRUM_THRESHOLD: f64 = 1e-6 * J01_SQUARED;

/// n x n matrices at the boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl BoundaryTrace {
    pub fn zeros(m: usize, n: usize) -> Self {
        BoundaryTrace { n, values: vec![ZERO; m * n * n] }
    }

    pub fn from_fn<F: Fn(Complex64) -> CMat>(domain: &DomainGrid, n: usize, f: F) -> Self {
        let mut values = Vec::with_capacity(domain.n_theta * n * n);
        for j in 0..domain.n_theta {
            let m = f(domain.boundary_point(j));
            for a in 0..n {
                for b in 0..n {
                    values.push(m[(a, b)]);
                }
            }
        }
        BoundaryTrace { n, values }
    }

    pub fn len(&self) -> usize {
        self.values.len() / (self.n * self.n)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matrix(&self, node: usize) -> CMat {
        let nn = self.n * self.n;
        CMat::from_row_slice(self.n, self.n, &self.values[node * nn..(node + 1) * nn])
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// Discrete DtN kernel, `(Phi f)(x) = sum_y weight(y) K(x, y) f(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnMap {
    pub n: usize,
    pub m: usize,
    pub weights: Vec<f64>,
    /// Boundary node positions (needed for the kernel norm).
    pub nodes: Vec<Complex64>,
    /// Block (x, y), entry (a, b) at `((x * m + y) * n + a) * n + b`.
    pub blocks: Vec<Complex64>,
}

impl DtnMap {
    pub fn zeros(domain: &DomainGrid, n: usize) -> Self {
        let m = domain.n_theta;
        DtnMap {
            n,
            m,
            weights: vec![domain.boundary_weight(); m],
            nodes: (0..m).map(|j| domain.boundary_point(j)).collect(),
            blocks: vec![ZERO; m * m * n * n],
        }
    }

    pub fn from_fn<F: Fn(usize, usize) -> CMat>(domain: &DomainGrid, n: usize, f: F) -> Self {
        let mut d = Self::zeros(domain, n);
        for x in 0..d.m {
            for y in 0..d.m {
                d.set_block(x, y, &f(x, y));
            }
        }
        d
    }

    #[inline]
    fn at(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.m + y) * self.n + a) * self.n + b
    }

    pub fn block(&self, x: usize, y: usize) -> CMat {
        let nn = self.n * self.n;
        let s = self.at(x, y, 0, 0);
        CMat::from_row_slice(self.n, self.n, &self.blocks[s..s + nn])
    }

    pub fn set_block(&mut self, x: usize, y: usize, k: &CMat) {
        for a in 0..self.n {
            for b in 0..self.n {
                let s = self.at(x, y, a, b);
                self.blocks[s] = k[(a, b)];
            }
        }
    }

    /// Checks array lengths, e.g. after deserializing.
    pub fn check_shape(&self) -> Result<()> {
        let (m, n) = (self.m, self.n);
        if n == 0 || self.weights.len() != m || self.nodes.len() != m || self.blocks.len() != m * m * n * n {
            return Err(Error::BoundaryMismatch);
        }
        Ok(())
    }

    pub fn sub(&self, other: &DtnMap) -> Result<DtnMap> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::BoundaryMismatch);
        }
        let mut out = self.clone();
        out.blocks.iter_mut().zip(&other.blocks).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> DtnMap {
        let mut out = self.clone();
        out.blocks.iter_mut().for_each(|x| *x *= s);
        out
    }

    /// Kernel `K*(x, y) = K(y, x)^T`: the DtN of the transposed potential if reciprocity holds.
    pub fn reciprocal(&self) -> DtnMap {
        let mut out = self.clone();
        for x in 0..self.m {
            for y in 0..self.m {
                for a in 0..self.n {
                    for b in 0..self.n {
                        let s = self.at(y, x, b, a);
                        let t = self.at(x, y, a, b);
                        out.blocks[t] = self.blocks[s];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, f: &BoundaryTrace) -> Result<BoundaryTrace> {
        if f.n != self.n || f.len() != self.m {
            return Err(Error::BoundaryMismatch);
        }
        let (n, m) = (self.n, self.m);
        let mut out = BoundaryTrace::zeros(m, n);
        for x in 0..m {
            for y in 0..m {
                let w = self.weights[y];
                for a in 0..n {
                    for c in 0..n {
                        let mut s = ZERO;
                        for b in 0..n {
                            s += self.blocks[self.at(x, y, a, b)] * f.values[(y * n + b) * n + c];
                        }
                        out.values[(x * n + a) * n + c] += w * s;
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub min_singular_value: f64,
    pub passes: bool,
    pub threshold: f64,
    pub iterations: usize,
}

/// Assembled and factorized interior operator `-Laplace_h + v`.
pub struct ForwardSolver {
    domain: Arc<DomainGrid>,
    n: usize,
    band: BandMatrix,
    lu: std::result::Result<BandedLu, Error>,
    /// Right-hand-side coefficient of the boundary value in the last ring.
    boundary_coef: f64,
    /// Diagonal symmetrizer per ring: `Omega (-Laplace_h)` is symmetric.
    omega: Vec<f64>,
}

struct Stencil {
    diag: f64,
    inner: f64,
    outer: f64,
    angular: f64,
}

fn stencil(d: &DomainGrid, i: usize) -> Stencil {
    let (h, dt) = (d.dr, d.dtheta);
    let r = d.rings()[i];
    let area = d.ring_weight(i);
    let c_in = i as f64 * h * dt / h;
    let c_out = (i + 1) as f64 * h * dt / h;
    let c_ang = h / (r * dt);
    if i + 1 == d.n_r {
        Stencil {
            diag: (c_in + 3.0 * c_out + 2.0 * c_ang) / area,
            inner: -(c_in + c_out / 3.0) / area,
            outer: 0.0,
            angular: -c_ang / area,
        }
    } else {
        Stencil {
            diag: (c_in + c_out + 2.0 * c_ang) / area,
            inner: -c_in / area,
            outer: -c_out / area,
            angular: -c_ang / area,
        }
    }
}

impl ForwardSolver {
    pub fn new(v: &MatrixField) -> Result<Self> {
        let domain = v.domain().clone();
        let d = &*domain;
        if d.n_r < 3 {
            return Err(Error::TooCoarse(d.n_r));
        }
        let n = v.n();
        let (nr, nt) = (d.n_r, d.n_theta);
        let bw = nt * n;
        let dim = d.len() * n;
        let mut band = BandMatrix::zeros(dim, bw, bw);
        for i in 0..nr {
            let s = stencil(d, i);
            for j in 0..nt {
                let cell = i * nt + j;
                let vb = v.block(cell);
                for a in 0..n {
                    let row = cell * n + a;
                    band.add(row, row, Complex64::new(s.diag, 0.0));
                    for b in 0..n {
                        band.add(row, cell * n + b, vb[a * n + b]);
                    }
                    let jp = i * nt + (j + 1) % nt;
                    let jm = i * nt + (j + nt - 1) % nt;
                    band.add(row, jp * n + a, Complex64::new(s.angular, 0.0));
                    band.add(row, jm * n + a, Complex64::new(s.angular, 0.0));
                    if i > 0 {
                        band.add(row, (cell - nt) * n + a, Complex64::new(s.inner, 0.0));
                    }
                    if i + 1 < nr {
                        band.add(row, (cell + nt) * n + a, Complex64::new(s.outer, 0.0));
                    }
                }
            }
        }
        let h = d.dr;
        let last = nr - 1;
        let c_out = nr as f64 * d.dtheta;
        let boundary_coef = 8.0 * c_out / 3.0 / d.ring_weight(last);
        let mut omega: Vec<f64> = (0..nr).map(|i| d.ring_weight(i)).collect();
        let c_in = last as f64 * h * d.dtheta / h;
        omega[last] *= c_in / (c_in + c_out / 3.0);
        let lu = band.clone().factorize();
        Ok(ForwardSolver { domain, n, band, lu, boundary_coef, omega })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn lu(&self) -> Result<&BandedLu> {
        match &self.lu {
            Ok(lu) => Ok(lu),
            Err(Error::Singular { pivot }) => Err(Error::Singular { pivot: *pivot }),
            Err(_) => Err(Error::Singular { pivot: 0 }),
        }
    }

    /// Unweighted operator applied to an interior vector (without boundary data).
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.band.matvec(u)
    }

    /// Dense copy of `Omega^{1/2} A Omega^{-1/2}`; use on small grids only.
    pub fn symmetrized_dense(&self) -> DMatrix<Complex64> {
        let dim = self.band.dim();
        let s = self.scale_vec();
        DMatrix::from_fn(dim, dim, |i, j| self.band.get(i, j) * (s[i] / s[j]))
    }

    fn scale_vec(&self) -> Vec<f64> {
        let nt = self.domain.n_theta;
        (0..self.band.dim()).map(|k| self.omega[k / (nt * self.n)].sqrt()).collect()
    }

    fn rhs_index(&self, node: usize, channel: usize) -> usize {
        let d = &self.domain;
        ((d.n_r - 1) * d.n_theta + node) * self.n + channel
    }

    /// Solves with matrix boundary data; each column of psi is an independent vector problem.
    pub fn solve(&self, f: &BoundaryTrace) -> Result<MatrixField> {
        let n = self.n;
        if f.n != n {
            return Err(Error::ChannelMismatch { expected: n, got: f.n });
        }
        if f.len() != self.domain.n_theta {
            return Err(Error::BoundaryMismatch);
        }
        let lu = self.lu()?;
        let dim = self.band.dim();
        let mut out = MatrixField::zeros(&self.domain, n);
        let cols: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut b = vec![ZERO; dim];
                for node in 0..self.domain.n_theta {
                    for a in 0..n {
                        b[self.rhs_index(node, a)] = self.boundary_coef * f.values[(node * n + a) * n + k];
                    }
                }
                lu.solve(&b)
            })
            .collect();
        let vals = out.values_mut();
        for (k, col) in cols.iter().enumerate() {
            for (idx, x) in col.iter().enumerate() {
                let (cell, a) = (idx / n, idx % n);
                vals[(cell * n + a) * n + k] = *x;
            }
        }
        Ok(out)
    }

    /// Radial derivative at the wall from the trace and the last two rings.
    pub fn normal_derivative(&self, f: &BoundaryTrace, psi: &MatrixField) -> BoundaryTrace {
        let d = &self.domain;
        let (nr, nt, n) = (d.n_r, d.n_theta, self.n);
        let nn = n * n;
        let h = d.dr;
        let mut out = BoundaryTrace::zeros(nt, n);
        for j in 0..nt {
            let u1 = psi.block((nr - 1) * nt + j);
            let u2 = psi.block((nr - 2) * nt + j);
            for e in 0..nn {
                out.values[j * nn + e] = (8.0 * f.values[j * nn + e] - 9.0 * u1[e] + u2[e]) / (3.0 * h);
            }
        }
        out
    }

    pub fn assemble_dtn(&self) -> Result<DtnMap> {
        let d = &*self.domain;
        let lu = self.lu()?;
        let (nr, nt, n) = (d.n_r, d.n_theta, self.n);
        let h = d.dr;
        let w = d.boundary_weight();
        let dim = self.band.dim();
        let keep = (nr - 2) * nt * n;
        let first = (nr - 1) * nt * n;
        let cols: Vec<(usize, usize, Vec<Complex64>)> = (0..nt * n)
            .into_par_iter()
            .map(|col| {
                let (y, b) = (col / n, col % n);
                let mut rhs = vec![ZERO; dim];
                rhs[self.rhs_index(y, b)] = Complex64::new(self.boundary_coef / w, 0.0);
                let u = lu.solve_tail(&rhs, first, keep);
                let mut k = vec![ZERO; nt * n];
                for x in 0..nt {
                    for a in 0..n {
                        let u1 = u[((nr - 1) * nt + x) * n + a];
                        let u2 = u[((nr - 2) * nt + x) * n + a];
                        let fx = if x == y && a == b { 1.0 / w } else { 0.0 };
                        k[x * n + a] = (8.0 * fx - 9.0 * u1 + u2) / (3.0 * h);
                    }
                }
                (y, b, k)
            })
            .collect();
        let mut map = DtnMap::zeros(d, n);
        for (y, b, k) in cols {
            for x in 0..nt {
                for a in 0..n {
                    let s = map.at(x, y, a, b);
                    map.blocks[s] = k[x * n + a];
                }
            }
        }
        Ok(map)
    }

    /// Smallest singular value of the symmetrized operator by inverse iteration.
    pub fn spectrum(&self, threshold: f64) -> Result<SpectrumReport> {
        let lu = match &self.lu {
            Ok(lu) => lu,
            Err(_) => {
                return Ok(SpectrumReport { min_singular_value: 0.0, passes: false, threshold, iterations: 0 })
            }
        };
        let s = self.scale_vec();
        let dim = s.len();
        let mut x: Vec<Complex64> =
            (0..dim).map(|k| Complex64::new(1.0 + 0.1 * ((k * 7919) % 13) as f64, 0.05 * (k % 5) as f64)).collect();
        normalize(&mut x);
        let mut sigma_prev = f64::INFINITY;
        const MAX_IT: usize = 300;
        for it in 1..=MAX_IT {
            // S^{-1} = Omega^{1/2} A^{-1} Omega^{-1/2}, S^{-H} = Omega^{-1/2} A^{-H} Omega^{1/2}
            let t: Vec<_> = x.iter().zip(&s).map(|(a, w)| a / w).collect();
            let y: Vec<_> = lu.solve(&t).iter().zip(&s).map(|(a, w)| a * w).collect();
            let t: Vec<_> = y.iter().zip(&s).map(|(a, w)| a * w).collect();
            let mut z: Vec<_> = lu.solve_transposed(&t, true).iter().zip(&s).map(|(a, w)| a / w).collect();
            let mu = normalize(&mut z);
            let sigma = 1.0 / mu.sqrt();
            if !sigma.is_finite() || sigma == 0.0 {
                return Ok(SpectrumReport { min_singular_value: 0.0, passes: false, threshold, iterations: it });
            }
            x = z;
            if (sigma - sigma_prev).abs() <= 1e-9 * sigma {
                return Ok(SpectrumReport { min_singular_value: sigma, passes: sigma > threshold, threshold, iterations: it });
            }
            sigma_prev = sigma;
        }
        Err(Error::NoConvergence(MAX_IT))
    }
}

fn normalize(x: &mut [Complex64]) -> f64 {
    let nrm = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|a| *a /= nrm);
    }
    nrm
}

pub fn solve_dirichlet(v: &MatrixField, f: &BoundaryTrace) -> Result<MatrixField> {
    ForwardSolver::new(v)?.solve(f)
}

pub fn assemble_dtn(v: &MatrixField) -> Result<DtnMap> {
    ForwardSolver::new(v)?.assemble_dtn()
}

pub fn check_dirichlet_spectrum(v: &MatrixField, threshold: f64) -> Result<SpectrumReport> {
    ForwardSolver::new(v)?.spectrum(threshold)
}

/// Induced norm for the sup-max matrix norm on traces.
pub fn dtn_op_norm(a: &DtnMap) -> f64 {
    let (m, n) = (a.m, a.n);
    let mut best: f64 = 0.0;
    for x in 0..m {
        for i in 0..n {
            let mut s = 0.0;
            for y in 0..m {
                for j in 0..n {
                    s += a.weights[y] * a.blocks[a.at(x, y, i, j)].norm();
                }
            }
            best = best.max(s);
        }
    }
    best
}

/// `max_{x != y} |K(x,y)| / log(3 + 1/|x - y|)` with the max-entry modulus.
pub fn dtn_norm1(a: &DtnMap) -> f64 {
    let (m, n) = (a.m, a.n);
    let nn = n * n;
    let mut best: f64 = 0.0;
    for x in 0..m {
        for y in 0..m {
            if x == y {
                continue;
            }
            let s = a.at(x, y, 0, 0);
            let k = a.blocks[s..s + nn].iter().map(|z| z.norm()).fold(0.0, f64::max);
            let dist = (a.nodes[x] - a.nodes[y]).norm();
            best = best.max(k / (3.0 + 1.0 / dist).ln());
        }
    }
    best
}
