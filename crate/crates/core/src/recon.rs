//! Alessandrini identity, stationary-phase reconstruction and the I1..I4 split.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::cauchy::CauchyPlan;
use crate::error::{Error, Result};
use crate::field::{ser_cmat, CMat, MatrixField, NormKind};
use crate::forward::{assemble_dtn, BoundaryTrace, DtnMap, ForwardSolver};
use crate::grid::DomainGrid;
use crate::mu::{solve_mu_with, Kernel, MuMethod};

/// Denominator floor of the relative mismatch.
pub const MISMATCH_FLOOR: f64 = 1e-14;

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheckReport {
    #[serde(serialize_with = "ser_cmat")]
    pub lhs: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub rhs: CMat,
    pub relative_mismatch: f64,
}

impl IdentityCheckReport {
    pub fn new(lhs: CMat, rhs: CMat) -> Self {
        let denom = max_entry(&lhs).max(max_entry(&rhs)).max(MISMATCH_FLOOR);
        let relative_mismatch = max_entry(&(&lhs - &rhs)) / denom;
        IdentityCheckReport { lhs, rhs, relative_mismatch }
    }
}

/// `int u2^T (v2 - v1) u1 dA`.
pub fn alessandrini_rhs(v1: &MatrixField, v2: &MatrixField, u1: &MatrixField, u2: &MatrixField) -> Result<CMat> {
    v1.check_compatible(v2)?;
    v1.check_compatible(u1)?;
    v1.check_compatible(u2)?;
    Ok(u2.transpose().mul(&v2.sub(v1)).mul(u1).integrate())
}

/// `sum_x sum_y w_x w_y u2(x)^T (K2 - K1)(x, y) u1(y)`.
pub fn alessandrini_lhs(phi1: &DtnMap, phi2: &DtnMap, u1: &BoundaryTrace, u2: &BoundaryTrace) -> Result<CMat> {
    let diff = phi2.sub(phi1)?;
    if u1.n != diff.n || u2.n != diff.n || u1.len() != diff.m || u2.len() != diff.m {
        return Err(Error::BoundaryMismatch);
    }
    let applied = diff.apply(u1)?;
    let n = diff.n;
    let mut acc = CMat::zeros(n, n);
    for x in 0..diff.m {
        acc += u2.matrix(x).transpose() * applied.matrix(x) * Complex64::new(diff.weights[x], 0.0);
    }
    Ok(acc)
}

/// Both sides of the identity for `v1`, `v2`, with boundary data
/// `exp(lambda (z - z0)^2) I` for `v1` and `exp(-conj(lambda) conj(z - z0)^2) I` for `v2^T`.
pub fn identity_check(v1: &MatrixField, v2: &MatrixField, z0: Complex64, lambda: Complex64) -> Result<IdentityCheckReport> {
    v1.check_compatible(v2)?;
    let d = v1.domain();
    let n = v1.n();
    let f1 = BoundaryTrace::from_fn(d, n, |z| CMat::identity(n, n) * (lambda * (z - z0) * (z - z0)).exp());
    let f2 = BoundaryTrace::from_fn(d, n, |z| {
        let w = (z - z0).conj();
        CMat::identity(n, n) * (-lambda.conj() * w * w).exp()
    });
    let s1 = ForwardSolver::new(v1)?;
    let s2t = ForwardSolver::new(&v2.transpose())?;
    let u1 = s1.solve(&f1)?;
    let u2 = s2t.solve(&f2)?;
    let rhs = alessandrini_rhs(v1, v2, &u1, &u2)?;
    let lhs = alessandrini_lhs(&s1.assemble_dtn()?, &assemble_dtn(v2)?, &f1, &f2)?;
    Ok(IdentityCheckReport::new(lhs, rhs))
}

/// `(2/pi) |lambda| h0(z0, lambda)`.
pub fn reconstruct_pointwise(v: &MatrixField, plan: &CauchyPlan) -> Result<CMat> {
    let h0 = crate::mu::w_functional(v, plan)?;
    Ok(h0.value * Complex64::new(2.0 / PI * plan.lambda.norm(), 0.0))
}

/// Zeroth-order reconstruction from DtN data: both mu factors replaced by I.
pub fn reconstruct_from_dtn(phi_v: &DtnMap, phi_ref: &DtnMap, z0: Complex64, lambda: Complex64) -> Result<CMat> {
    let diff = phi_v.sub(phi_ref)?;
    let (m, n) = (diff.m, diff.n);
    let left: Vec<Complex64> = diff
        .nodes
        .iter()
        .map(|x| {
            let w = (x - z0).conj();
            -lambda.conj() * w * w
        })
        .collect();
    let right: Vec<Complex64> = diff
        .nodes
        .iter()
        .map(|y| {
            let w = y - z0;
            lambda * w * w
        })
        .collect();
    // max Re over pairs is max Re(left) + max Re(right); shifting each side keeps exp in range
    let sl = left.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let sr = right.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if sl + sr > crate::OVERFLOW_GUARD {
        return Err(Error::Overflow(sl + sr));
    }
    let ea: Vec<Complex64> = left.iter().zip(&diff.weights).map(|(e, w)| (e - sl).exp() * w).collect();
    let eb: Vec<Complex64> = right.iter().zip(&diff.weights).map(|(e, w)| (e - sr).exp() * w).collect();
    let nn = n * n;
    let mut acc = CMat::zeros(n, n);
    for x in 0..m {
        let mut row = vec![Complex64::new(0.0, 0.0); nn];
        for y in 0..m {
            let blk = &diff.blocks[(x * m + y) * nn..(x * m + y + 1) * nn];
            for (r, k) in row.iter_mut().zip(blk) {
                *r += k * eb[y];
            }
        }
        for i in 0..n {
            for j in 0..n {
                acc[(i, j)] += row[i * n + j] * ea[x];
            }
        }
    }
    acc *= Complex64::new(sl + sr, 0.0).exp();
    Ok(acc * Complex64::new(2.0 / PI * lambda.norm(), 0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub z0: Vec<Complex64>,
    pub lambda_rule: String,
    pub lambda: f64,
    #[serde(serialize_with = "ser_cmats")]
    pub reconstructed: Vec<CMat>,
    #[serde(serialize_with = "ser_opt_cmats")]
    pub reference: Option<Vec<CMat>>,
    pub per_point_error: Option<Vec<f64>>,
    pub sup_error: Option<f64>,
}

fn ser_cmats<S: serde::Serializer>(v: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for m in v {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
        seq.serialize_element(&rows)?;
    }
    seq.end()
}

fn ser_opt_cmats<S: serde::Serializer>(v: &Option<Vec<CMat>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => ser_cmats(v, s),
        None => s.serialize_none(),
    }
}

/// Reconstruct at the given cells of `domain`; errors are taken against `reference` samples if given.
pub fn reconstruction_report(
    phi_v: &DtnMap,
    phi_ref: &DtnMap,
    domain: &DomainGrid,
    cells: &[usize],
    lambda: f64,
    lambda_rule: &str,
    reference: Option<&MatrixField>,
) -> Result<ReconstructionReport> {
    if let Some(v) = reference {
        if **v.domain() != *domain {
            return Err(Error::GridMismatch);
        }
    }
    if let Some(&c) = cells.iter().find(|&&c| c >= domain.len()) {
        return Err(Error::InvalidParameter(format!("cell {c} outside the grid")));
    }
    let z0: Vec<Complex64> = cells.iter().map(|&c| domain.center(c)).collect();
    let rec = z0
        .iter()
        .map(|&z| reconstruct_from_dtn(phi_v, phi_ref, z, Complex64::new(lambda, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let (reference, per_point_error, sup_error) = match reference {
        Some(v) => {
            let refs: Vec<CMat> = cells.iter().map(|&c| v.matrix(c)).collect();
            let errs: Vec<f64> = rec.iter().zip(&refs).map(|(a, b)| max_entry(&(a - b))).collect();
            let sup = errs.iter().copied().fold(0.0, f64::max);
            (Some(refs), Some(errs), Some(sup))
        }
        None => (None, None, None),
    };
    Ok(ReconstructionReport {
        z0,
        lambda_rule: lambda_rule.to_string(),
        lambda,
        reconstructed: rec,
        reference,
        per_point_error,
        sup_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IDecomposition {
    #[serde(serialize_with = "ser_cmat")]
    pub i1: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub i2: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub i3: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub i4: CMat,
    /// `int e mu2bar^T (v2 - v1) mu1 dA` computed in one pass.
    #[serde(serialize_with = "ser_cmat")]
    pub total: CMat,
    pub sum_mismatch: f64,
}

impl IDecomposition {
    pub fn magnitudes(&self) -> [f64; 4] {
        [max_entry(&self.i1), max_entry(&self.i2), max_entry(&self.i3), max_entry(&self.i4)]
    }
}

/// Splits the right side of the phase-weighted identity at `(plan.z0, plan.lambda)`.
///
/// `mu1` solves the equation for `v1`; `mu2bar` solves the conjugated-kernel
/// equation for `v2^T` at `-lambda`.
pub fn i_decomposition(v1: &MatrixField, v2: &MatrixField, plan: &CauchyPlan) -> Result<IDecomposition> {
    v1.check_compatible(v2)?;
    let d = v1.domain();
    let n = v1.n();
    let mu1 = solve_mu_with(v1, plan, MuMethod::Direct, Kernel::Standard, false)?.mu;
    let minus = plan.retarget(plan.z0, -plan.lambda);
    let mu2 = solve_mu_with(&v2.transpose(), &minus, MuMethod::Direct, Kernel::Conjugated, false)?.mu;
    drop(minus);
    let e = plan.p_plus();
    let id = CMat::identity(n, n);
    let [mut i1, mut i2, mut i3, mut i4, mut total] = std::array::from_fn(|_| CMat::zeros(n, n));
    // one pass over the cells; no full-size temporaries
    for c in 0..d.len() {
        let w = e[c] * d.weight(c);
        let dv = v2.matrix(c) - v1.matrix(c);
        let m1 = mu1.matrix(c);
        let m2t = mu2.matrix(c).transpose();
        let a = &m2t - &id;
        let b = &m1 - &id;
        i1 += &dv * w;
        i2 += &a * &dv * &b * w;
        i3 += &a * &dv * w;
        i4 += &dv * &b * w;
        total += m2t * dv * m1 * w;
    }
    let sum = &i1 + &i2 + &i3 + &i4;
    let sum_mismatch = max_entry(&(&sum - &total)) / max_entry(&total).max(MISMATCH_FLOOR);
    Ok(IDecomposition { i1, i2, i3, i4, total, sum_mismatch })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryLayerReport {
    #[serde(serialize_with = "ser_cmat")]
    pub value: CMat,
    pub layer_delta: f64,
    /// `layer_delta^-4 log(3|lambda|) / |lambda| * ||v||_C2`.
    pub interior_term: f64,
    /// `log(3 + 1/layer_delta) * ||v||_C(boundary)`.
    pub boundary_term: f64,
    pub boundary_sup: f64,
}

/// Extrapolated sup of v on the wall, from the last two rings.
pub fn boundary_sup(v: &MatrixField) -> f64 {
    let d = v.domain();
    let (nr, nt) = (d.n_r, d.n_theta);
    let nn = v.n() * v.n();
    let mut best: f64 = 0.0;
    for j in 0..nt {
        let a = v.block((nr - 1) * nt + j);
        let b = if nr > 1 { v.block((nr - 2) * nt + j) } else { a };
        for e in 0..nn {
            best = best.max((1.5 * a[e] - 0.5 * b[e]).norm());
        }
    }
    best
}

pub fn reconstruct_boundary_layer(v: &MatrixField, plan: &CauchyPlan, layer_delta: f64) -> Result<BoundaryLayerReport> {
    if !(layer_delta > 0.0 && layer_delta < 1.0) {
        return Err(Error::InvalidParameter(format!("layer_delta must lie in (0, 1), got {layer_delta}")));
    }
    let radius = v.domain().radius;
    if plan.z0.norm() > radius - layer_delta {
        return Err(Error::InsideLayer(format!("{}", plan.z0)));
    }
    let value = reconstruct_pointwise(v, plan)?;
    let lam = plan.lambda.norm();
    let c2 = v.norm(NormKind::C2)?;
    let bsup = boundary_sup(v);
    Ok(BoundaryLayerReport {
        value,
        layer_delta,
        interior_term: layer_delta.powi(-4) * (3.0 * lam).ln() / lam * c2,
        boundary_term: (3.0 + 1.0 / layer_delta).ln() * bsup,
        boundary_sup: bsup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::CauchyMethod;
    use crate::field::{sample_field, Direction};
    use crate::grid::build_disk_domain;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dom(nr: usize, nt: usize) -> Arc<DomainGrid> {
        Arc::new(build_disk_domain(1.0, nr, nt).unwrap())
    }

    fn gauss(d: &Arc<DomainGrid>, a: Complex64, s: f64, m: CMat) -> MatrixField {
        sample_field(d, m.nrows(), |z| &m * Complex64::new((-(z - a).norm_sqr() / (s * s)).exp(), 0.0)).unwrap()
    }

    fn mat2(a: f64, b: f64, cc: f64, dd: f64) -> CMat {
        CMat::from_row_slice(2, 2, &[c(a, 0.0), c(0.0, b), c(cc, 0.0), c(dd, 0.5)])
    }

    #[test]
    fn rhs_trivial_cases() {
        let d = dom(6, 12);
        let v = gauss(&d, c(0.1, 0.0), 0.3, mat2(1.0, 2.0, 0.5, 1.0));
        let id = MatrixField::identity(&d, 2);
        assert_eq!(alessandrini_rhs(&v, &v, &id, &id).unwrap().norm(), 0.0);
        let z = MatrixField::zeros(&d, 2);
        let r = alessandrini_rhs(&z, &v, &id, &id).unwrap();
        assert!((r - v.integrate()).norm() < 1e-14);
    }

    #[test]
    fn rhs_nested_sum_oracle() {
        let d = dom(4, 8);
        let f = |k: f64| {
            sample_field(&d, 2, move |z| {
                CMat::from_row_slice(2, 2, &[z * k + 1.0, z.conj() + k, c(k, 1.0), z * z + 0.5])
            })
            .unwrap()
        };
        let (v1, v2, u1, u2) = (f(0.3), f(1.1), f(-0.7), f(2.0));
        let got = alessandrini_rhs(&v1, &v2, &u1, &u2).unwrap();
        let mut want = CMat::zeros(2, 2);
        for cell in 0..d.len() {
            let (a, b, p, q) = (u2.matrix(cell), v2.matrix(cell), v1.matrix(cell), u1.matrix(cell));
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = c(0.0, 0.0);
                    for k in 0..2 {
                        for l in 0..2 {
                            s += a[(k, i)] * (b[(k, l)] - p[(k, l)]) * q[(l, j)];
                        }
                    }
                    want[(i, j)] += s * d.weight(cell);
                }
            }
        }
        assert!((&got - &want).norm() <= 1e-12 * want.norm(), "{got} {want}");
    }

    #[test]
    fn identity_holds_on_a_small_grid() {
        let d = dom(24, 48);
        let v1 = gauss(&d, c(0.2, 0.1), 0.25, mat2(2.0, 1.0, 0.5, 1.5));
        let v2 = gauss(&d, c(-0.2, 0.0), 0.3, mat2(1.0, -1.0, 0.3, 2.0));
        let (lam, z0) = (c(3.0, 1.0), c(0.1, -0.1));
        let f1 = BoundaryTrace::from_fn(&d, 2, |z| CMat::identity(2, 2) * (lam * (z - z0) * (z - z0)).exp());
        let f2 = BoundaryTrace::from_fn(&d, 2, |z| {
            let w = (z - z0).conj();
            CMat::identity(2, 2) * (-lam.conj() * w * w).exp()
        });
        let s1 = ForwardSolver::new(&v1).unwrap();
        let s2t = ForwardSolver::new(&v2.transpose()).unwrap();
        let u1 = s1.solve(&f1).unwrap();
        let u2 = s2t.solve(&f2).unwrap();
        let rhs = alessandrini_rhs(&v1, &v2, &u1, &u2).unwrap();
        let lhs = alessandrini_lhs(&s1.assemble_dtn().unwrap(), &assemble_dtn(&v2).unwrap(), &f1, &f2).unwrap();
        let rep = IdentityCheckReport::new(lhs.clone(), rhs);
        assert!(rep.relative_mismatch < 0.01, "{}", rep.relative_mismatch);
        let lhs2 = alessandrini_lhs(
            &s1.assemble_dtn().unwrap(),
            &assemble_dtn(&v2).unwrap(),
            &BoundaryTrace { n: 2, values: f1.values.iter().map(|x| x * 3.0).collect() },
            &f2,
        )
        .unwrap();
        assert!((lhs2 - lhs * c(3.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn equal_maps_give_zero() {
        let d = dom(6, 12);
        let phi = assemble_dtn(&MatrixField::zeros(&d, 1)).unwrap();
        let t = BoundaryTrace::from_fn(&d, 1, |z| CMat::from_element(1, 1, z));
        assert_eq!(alessandrini_lhs(&phi, &phi, &t, &t).unwrap().norm(), 0.0);
        assert_eq!(reconstruct_from_dtn(&phi, &phi, c(0.0, 0.0), c(3.0, 0.0)).unwrap().norm(), 0.0);
        let rep = IdentityCheckReport::new(CMat::zeros(1, 1), CMat::zeros(1, 1));
        assert_eq!(rep.relative_mismatch, 0.0);
    }

    #[test]
    fn overflow_guard() {
        let d = dom(6, 12);
        let phi = assemble_dtn(&MatrixField::zeros(&d, 1)).unwrap();
        let other = phi.scale(2.0);
        assert!(matches!(reconstruct_from_dtn(&phi, &other, c(0.0, 0.0), c(800.0, 0.0)), Err(Error::Overflow(_))));
    }

    #[test]
    fn pointwise_diagonal_decouples() {
        let d = dom(32, 128);
        let v = sample_field(&d, 2, |z| {
            let b = (-8.0 * z.norm_sqr()).exp();
            CMat::from_row_slice(2, 2, &[c(b, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0 * b, 0.0)])
        })
        .unwrap();
        let plan = CauchyPlan::new(&d, c(0.0, 0.0), c(16.0, 0.0), CauchyMethod::Spectral).unwrap();
        let r = reconstruct_pointwise(&v, &plan).unwrap();
        assert_eq!(r[(0, 1)].norm(), 0.0);
        assert!((r[(0, 0)] - 1.0).norm() < 0.2 && (r[(1, 1)] - 2.0).norm() < 0.4, "{r}");
    }

    #[test]
    fn decomposition_sums() {
        let d = dom(10, 20);
        let v1 = gauss(&d, c(0.1, 0.0), 0.3, mat2(1.0, 0.5, 0.2, 0.7));
        let v2 = gauss(&d, c(-0.1, 0.1), 0.3, mat2(0.6, -0.2, 0.4, 1.0));
        let plan = CauchyPlan::new(&d, c(0.05, 0.0), c(6.0, 0.0), CauchyMethod::Spectral).unwrap();
        let dec = i_decomposition(&v1, &v2, &plan).unwrap();
        assert!(dec.sum_mismatch < 1e-10, "{}", dec.sum_mismatch);
        let same = i_decomposition(&v1, &v1, &plan).unwrap();
        assert!(same.magnitudes().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn boundary_layer_preconditions() {
        let d = dom(16, 32);
        let v = MatrixField::identity(&d, 1);
        let inside = CauchyPlan::new(&d, c(0.95, 0.0), c(4.0, 0.0), CauchyMethod::Spectral).unwrap();
        assert!(matches!(reconstruct_boundary_layer(&v, &inside, 0.1), Err(Error::InsideLayer(_))));
        let ok = inside.retarget(c(0.2, 0.0), c(4.0, 0.0));
        assert!(reconstruct_boundary_layer(&v, &ok, 1.5).is_err());
        let rep = reconstruct_boundary_layer(&v, &ok, 0.1).unwrap();
        assert!((rep.boundary_sup - 1.0).abs() < 1e-12);
        let zero = reconstruct_boundary_layer(&MatrixField::zeros(&d, 1), &ok, 0.1).unwrap();
        assert_eq!(zero.boundary_term, 0.0);
    }

    #[test]
    fn green_formula_discrete() {
        // f = exp(a z) zbar, g = |z|^2 + Re z: compare the two sides of the scalar Green formula
        let defect = |nr: usize| {
            let d = dom(nr, 2 * nr);
            let a = c(0.8, 0.3);
            let f = |z: Complex64| (a * z).exp() * z.conj();
            let g = |z: Complex64| c(z.norm_sqr() + z.re, 0.0);
            // radial derivatives on the wall in closed form
            let fr = |z: Complex64| (a * z).exp() * (a * z * z.conj() + z.conj()) / z.norm();
            let gr = |z: Complex64| c(2.0 * z.norm() + z.re / z.norm(), 0.0);
            let mut bnd = c(0.0, 0.0);
            for j in 0..d.n_theta {
                let z = d.boundary_point(j);
                bnd += (fr(z) * g(z) - f(z) * gr(z)) * d.boundary_weight();
            }
            let lap = |h: &dyn Fn(Complex64) -> Complex64| {
                let fld = sample_field(&d, 1, |z| CMat::from_element(1, 1, h(z))).unwrap();
                fld.wirtinger(Direction::ZBar).unwrap().wirtinger(Direction::Z).unwrap().scale(c(4.0, 0.0))
            };
            let ff = sample_field(&d, 1, |z| CMat::from_element(1, 1, f(z))).unwrap();
            let gg = sample_field(&d, 1, |z| CMat::from_element(1, 1, g(z))).unwrap();
            let area = lap(&f).mul(&gg).sub(&ff.mul(&lap(&g))).integrate()[(0, 0)];
            (bnd - area).norm() / bnd.norm()
        };
        let (e1, e2) = (defect(16), defect(32));
        assert!(e1 < 0.1 && e2 < 0.75 * e1, "{e1} {e2}");
    }

    #[test]
    fn dtn_reconstruction_matches_pairwise_sum() {
        let d = dom(4, 12);
        let phi = DtnMap::from_fn(&d, 2, |x, y| {
            CMat::from_fn(2, 2, |i, j| c((x * 3 + y + i) as f64 * 0.1, (j as f64 - y as f64) * 0.05))
        });
        let zero = DtnMap::zeros(&d, 2);
        let (z0, lam) = (c(0.2, -0.3), c(4.0, 1.5));
        let got = reconstruct_from_dtn(&phi, &zero, z0, lam).unwrap();
        let mut want = CMat::zeros(2, 2);
        for x in 0..phi.m {
            for y in 0..phi.m {
                let a = (x_conj_phase(phi.nodes[x], z0, lam) + lam * (phi.nodes[y] - z0) * (phi.nodes[y] - z0)).exp();
                want += phi.block(x, y) * (a * phi.weights[x] * phi.weights[y]);
            }
        }
        want *= c(2.0 / PI * lam.norm(), 0.0);
        assert!((&got - &want).norm() <= 1e-12 * want.norm(), "{got} {want}");
    }

    fn x_conj_phase(x: Complex64, z0: Complex64, lam: Complex64) -> Complex64 {
        let w = (x - z0).conj();
        -lam.conj() * w * w
    }
}
