//! Phase-weighted Cauchy transforms `T`, `Tbar` and the kernel `g = T Tbar / 4`.
//!
//! Both transforms reduce to the raw operator
//! `C[f](z) = (1/pi) sum_zeta w f(zeta) / (conj z - conj zeta)`:
//! `Tbar u = C[p+ u]` and `T u = conj(C[p+ conj u])`, with `p+` the unit phase.
//!
//! `Direct` evaluates C by the O(M^2) midpoint sum with the self cell dropped.
//! `Spectral` expands each ring in angular Fourier modes; mode q of the input feeds
//! mode q+1 of the output through a radial Volterra integral, which is evaluated
//! exactly for piecewise-linear radial profiles.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{phase_value, MatrixField};
use crate::grid::DomainGrid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauchyMethod {
    Direct,
    Spectral,
}

#[derive(Clone)]
struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

#[derive(Clone)]
pub struct CauchyPlan {
    domain: Arc<DomainGrid>,
    pub z0: Complex64,
    pub lambda: Complex64,
    pub method: CauchyMethod,
    p_plus: Vec<Complex64>,
    fft: Option<FftPair>,
}

impl std::fmt::Debug for CauchyPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchyPlan")
            .field("z0", &self.z0)
            .field("lambda", &self.lambda)
            .field("method", &self.method)
            .field("n_r", &self.domain.n_r)
            .field("n_theta", &self.domain.n_theta)
            .finish()
    }
}

impl CauchyPlan {
    pub fn new(domain: &Arc<DomainGrid>, z0: Complex64, lambda: Complex64, method: CauchyMethod) -> Result<Self> {
        let fft = match method {
            CauchyMethod::Direct => None,
            CauchyMethod::Spectral => {
                if domain.n_r < 2 {
                    return Err(Error::TooCoarse(domain.n_r));
                }
                let mut planner = FftPlanner::new();
                Some(FftPair {
                    forward: planner.plan_fft_forward(domain.n_theta),
                    inverse: planner.plan_fft_inverse(domain.n_theta),
                })
            }
        };
        let p_plus = (0..domain.len()).map(|c| phase_value(domain.center(c), z0, lambda)).collect();
        Ok(CauchyPlan { domain: domain.clone(), z0, lambda, method, p_plus, fft })
    }

    /// Same grid and method at another (z0, lambda); reuses the FFT plans.
    pub fn retarget(&self, z0: Complex64, lambda: Complex64) -> Self {
        let d = &self.domain;
        let p_plus = (0..d.len()).map(|c| phase_value(d.center(c), z0, lambda)).collect();
        CauchyPlan { domain: d.clone(), z0, lambda, method: self.method, p_plus, fft: self.fft.clone() }
    }

    pub fn domain(&self) -> &Arc<DomainGrid> {
        &self.domain
    }

    pub fn p_plus(&self) -> &[Complex64] {
        &self.p_plus
    }

    /// Raw transform `(1/pi) int f(zeta) / (conj z - conj zeta) dA`.
    pub fn cbar_raw(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.cbar_owned(f.to_vec())
    }

    fn cbar_owned(&self, f: Vec<Complex64>) -> Vec<Complex64> {
        match &self.fft {
            None => cbar_direct(&self.domain, &f),
            Some(p) => cbar_spectral(&self.domain, p, f),
        }
    }

    pub fn tbar_plane(&self, u: &[Complex64]) -> Vec<Complex64> {
        let f: Vec<_> = u.iter().zip(&self.p_plus).map(|(a, p)| a * p).collect();
        self.cbar_owned(f)
    }

    pub fn t_plane(&self, u: &[Complex64]) -> Vec<Complex64> {
        let f: Vec<_> = u.iter().zip(&self.p_plus).map(|(a, p)| a.conj() * p).collect();
        let mut out = self.cbar_owned(f);
        out.iter_mut().for_each(|x| *x = x.conj());
        out
    }

    pub fn g_plane(&self, u: &[Complex64]) -> Vec<Complex64> {
        let tb = self.tbar_plane(u);
        let mut out = self.t_plane(&tb);
        drop(tb);
        out.iter_mut().for_each(|x| *x *= 0.25);
        out
    }

    fn check(&self, u: &MatrixField) -> Result<()> {
        if **u.domain() != *self.domain {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

pub fn cauchy_tbar(plan: &CauchyPlan, u: &MatrixField) -> Result<MatrixField> {
    plan.check(u)?;
    Ok(u.map_planes(|p| plan.tbar_plane(p)))
}

pub fn cauchy_t(plan: &CauchyPlan, u: &MatrixField) -> Result<MatrixField> {
    plan.check(u)?;
    Ok(u.map_planes(|p| plan.t_plane(p)))
}

pub fn green_g_apply(plan: &CauchyPlan, u: &MatrixField) -> Result<MatrixField> {
    plan.check(u)?;
    Ok(u.map_planes(|p| plan.g_plane(p)))
}

/// `d/dzbar (g u) = p- Tbar u / 4`, without finite differences.
pub fn dbar_of_g(plan: &CauchyPlan, u: &MatrixField) -> Result<MatrixField> {
    plan.check(u)?;
    Ok(u.map_planes(|p| {
        plan.tbar_plane(p).into_iter().zip(&plan.p_plus).map(|(t, ph)| 0.25 * t * ph.conj()).collect()
    }))
}

/// Relative L2 residual of `4 (d/dz + 2 lambda (z - z0)) d/dzbar (g u) = u` over `|z| <= r_max`.
pub fn g_pde_residual(plan: &CauchyPlan, u: &MatrixField, r_max: f64) -> Result<f64> {
    let gu = green_g_apply(plan, u)?;
    let lhs = gu.twisted_laplacian(plan.z0, plan.lambda)?;
    Ok(lhs.sub(u).l2_within(r_max) / u.l2_within(r_max).max(f64::MIN_POSITIVE))
}

fn cbar_direct(d: &DomainGrid, f: &[Complex64]) -> Vec<Complex64> {
    let zs = d.centers();
    let wf: Vec<Complex64> = f.iter().enumerate().map(|(c, x)| x * d.weight(c)).collect();
    zs.par_iter()
        .enumerate()
        .map(|(k, z)| {
            let zc = z.conj();
            let mut s = ZERO;
            for (l, (zeta, w)) in zs.iter().zip(&wf).enumerate() {
                if l != k {
                    s += w / (zc - zeta.conj());
                }
            }
            s / PI
        })
        .collect()
}

/// `int_a^1 t^{q-1} dt` with `la = ln a`, q > 0.
#[inline]
fn j_int(q: f64, la: f64) -> f64 {
    -(q * la).exp_m1() / q
}

/// `int_1^b t^{-q} dt` with `lb = ln b`.
#[inline]
fn k_int(q: f64, lb: f64) -> f64 {
    if q == 1.0 {
        lb
    } else {
        ((1.0 - q) * lb).exp_m1() / (1.0 - q)
    }
}

fn cbar_spectral(d: &DomainGrid, plans: &FftPair, mut spec: Vec<Complex64>) -> Vec<Complex64> {
    let (nr, nt) = (d.n_r, d.n_theta);
    let h = d.dr;
    let r = d.rings();
    let scale = 1.0 / nt as f64;
    spec.par_chunks_mut(nt).for_each(|row| {
        plans.forward.process(row);
        row.iter_mut().for_each(|x| *x *= scale);
    });
    let modes: Vec<Vec<Complex64>> = (0..nt)
        .into_par_iter()
        .map(|qb| {
            let q: i64 = if qb < nt.div_ceil(2) { qb as i64 } else { qb as i64 - nt as i64 };
            let col: Vec<Complex64> = (0..nr).map(|i| spec[i * nt + qb]).collect();
            let m = q + 1;
            let mut out = vec![ZERO; nr];
            if m >= 1 {
                let p = m as f64;
                // first segment: constant profile for q = 0, linear through the origin otherwise
                let mut b = r[0] * col[0] / if q == 0 { p + 1.0 } else { p + 2.0 };
                out[0] = 2.0 * b;
                for i in 1..nr {
                    let a = r[i - 1] / r[i];
                    let la = a.ln();
                    let beta = (col[i] - col[i - 1]) * (r[i] / h);
                    let alpha = col[i - 1] - beta * a;
                    let seg = r[i] * (alpha * j_int(p + 1.0, la) + beta * j_int(p + 2.0, la));
                    b = b * (p * la).exp() + seg;
                    out[i] = 2.0 * b;
                }
            } else {
                let p = -m as f64;
                // last segment [r_{n-1}, R]: linear extrapolation
                let i = nr - 1;
                let lb = (d.radius / r[i]).ln();
                let beta = (col[i] - col[i - 1]) * (r[i] / h);
                let alpha = col[i] - beta;
                let mut cacc = r[i] * (alpha * k_int(p, lb) + beta * k_int(p - 1.0, lb));
                out[i] = -2.0 * cacc;
                for i in (0..nr - 1).rev() {
                    let lb = (r[i + 1] / r[i]).ln();
                    let beta = (col[i + 1] - col[i]) * (r[i] / h);
                    let alpha = col[i] - beta;
                    cacc = cacc * (-p * lb).exp() + r[i] * (alpha * k_int(p, lb) + beta * k_int(p - 1.0, lb));
                    out[i] = -2.0 * cacc;
                }
            }
            out
        })
        .collect();
    // spec is dead; reuse it for the output
    let mut g = spec;
    for (qb, col) in modes.iter().enumerate() {
        let ob = (qb + 1) % nt;
        for (i, x) in col.iter().enumerate() {
            g[i * nt + ob] = *x;
        }
    }
    drop(modes);
    g.par_chunks_mut(nt).for_each(|row| plans.inverse.process(row));
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_field, CMat};
    use crate::grid::build_disk_domain;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dom(nr: usize, nt: usize) -> Arc<DomainGrid> {
        Arc::new(build_disk_domain(1.0, nr, nt).unwrap())
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spectral_exact_on_polynomials() {
        let d = dom(16, 32);
        let plan = CauchyPlan::new(&d, ZERO, ZERO, CauchyMethod::Spectral).unwrap();
        let zs = d.centers();
        let one = vec![c(1.0, 0.0); d.len()];
        assert!(max_err(&plan.cbar_raw(&one), &zs) < 1e-13);
        // C[zbar] = |z|^2 - 1 on the unit disk
        let zb: Vec<_> = zs.iter().map(|z| z.conj()).collect();
        let want: Vec<_> = zs.iter().map(|z| c(z.norm_sqr() - 1.0, 0.0)).collect();
        assert!(max_err(&plan.cbar_raw(&zb), &want) < 1e-13);
        // T 1 = conj z
        let t1 = plan.t_plane(&one);
        assert!(max_err(&t1, &zb) < 1e-13);
    }

    #[test]
    fn direct_converges_to_closed_form() {
        let err = |nr: usize| {
            let d = dom(nr, 2 * nr);
            let plan = CauchyPlan::new(&d, ZERO, ZERO, CauchyMethod::Direct).unwrap();
            max_err(&plan.cbar_raw(&vec![c(1.0, 0.0); d.len()]), &d.centers())
        };
        let (a, b) = (err(16), err(32));
        assert!(a < 0.04 && a / b > 1.7, "{a} {b}");
    }

    #[test]
    fn spectral_and_direct_agree_under_refinement() {
        let u = |z: Complex64| c((-4.0 * (z - c(0.2, 0.0)).norm_sqr()).exp(), 0.0) * (z.re * c(0.0, 1.0)).exp();
        let diff = |nr: usize| {
            let d = dom(nr, 2 * nr);
            let f: Vec<_> = d.centers().iter().map(|&z| u(z)).collect();
            let a = CauchyPlan::new(&d, ZERO, ZERO, CauchyMethod::Spectral).unwrap().cbar_raw(&f);
            let b = CauchyPlan::new(&d, ZERO, ZERO, CauchyMethod::Direct).unwrap().cbar_raw(&f);
            max_err(&a, &b) / a.iter().map(|x| x.norm()).fold(0.0, f64::max)
        };
        let (x, y) = (diff(16), diff(32));
        assert!(x < 0.1 && y < 0.6 * x, "{x} {y}");
    }

    #[test]
    fn conjugacy_and_linearity() {
        let d = dom(8, 16);
        for method in [CauchyMethod::Direct, CauchyMethod::Spectral] {
            let plan = CauchyPlan::new(&d, c(0.1, -0.2), c(3.0, 0.0), method).unwrap();
            let u: Vec<_> = d.centers().iter().map(|z| (z * c(0.7, 0.3)).exp() + z.conj()).collect();
            let w: Vec<_> = d.centers().iter().map(|z| z * z).collect();
            let uc: Vec<_> = u.iter().map(|x| x.conj()).collect();
            let lhs = plan.t_plane(&u);
            let rhs: Vec<_> = plan.tbar_plane(&uc).iter().map(|x| x.conj()).collect();
            assert!(max_err(&lhs, &rhs) < 1e-12);
            let comb: Vec<_> = u.iter().zip(&w).map(|(a, b)| 2.0 * a + b).collect();
            let l = plan.tbar_plane(&comb);
            let r: Vec<_> =
                plan.tbar_plane(&u).iter().zip(plan.tbar_plane(&w)).map(|(a, b)| 2.0 * a + b).collect();
            assert!(max_err(&l, &r) < 1e-12);
            assert!(plan.g_plane(&vec![ZERO; d.len()]).iter().all(|x| *x == ZERO));
        }
    }

    #[test]
    fn dbar_modulus() {
        let d = dom(16, 32);
        let plan = CauchyPlan::new(&d, c(0.1, 0.1), c(2.0, 1.0), CauchyMethod::Spectral).unwrap();
        let u = sample_field(&d, 1, |z| CMat::from_element(1, 1, (-3.0 * z.norm_sqr()).exp().into())).unwrap();
        let db = dbar_of_g(&plan, &u).unwrap();
        let tb = cauchy_tbar(&plan, &u).unwrap();
        for k in 0..d.len() {
            assert!((db.values()[k].norm() - 0.25 * tb.values()[k].norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let plan = CauchyPlan::new(&dom(8, 16), ZERO, ZERO, CauchyMethod::Direct).unwrap();
        assert!(cauchy_tbar(&plan, &MatrixField::zeros(&dom(8, 8), 1)).is_err());
    }

    #[test]
    fn g_residual_shrinks() {
        let run = |nr: usize| {
            let d = dom(nr, 4 * nr);
            let u = sample_field(&d, 1, |z| CMat::from_element(1, 1, c((-6.0 * (z - 0.1).norm_sqr()).exp(), 0.0))).unwrap();
            let plan = CauchyPlan::new(&d, c(0.0, 0.1), c(2.0, 0.0), CauchyMethod::Spectral).unwrap();
            g_pde_residual(&plan, &u, 0.8).unwrap()
        };
        let (a, b) = (run(16), run(32));
        assert!(b < a && b < 0.1, "{a} {b}");
    }
}
