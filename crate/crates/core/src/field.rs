//! Matrix-valued grid functions, Wirtinger derivatives and discrete norms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::DomainGrid;

pub type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One n x n complex matrix per cell, stored cell-major with row-major blocks.
#[derive(Debug, Clone)]
pub struct MatrixField {
    n: usize,
    domain: Arc<DomainGrid>,
    values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Z,
    ZBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Sup,
    C1ZBar,
    C2,
}

/// Unit-modulus samples of `exp(lambda (z-z0)^2 - conj(lambda) conj(z-z0)^2)`.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub z0: Complex64,
    pub lambda: Complex64,
    pub values: Vec<Complex64>,
}

#[inline]
pub fn phase_value(z: Complex64, z0: Complex64, lambda: Complex64) -> Complex64 {
    let w = z - z0;
    let s = 2.0 * (lambda * w * w).im;
    Complex64::new(s.cos(), s.sin())
}

pub fn phase(z0: Complex64, lambda: Complex64, domain: &DomainGrid) -> PhaseField {
    let values = (0..domain.len()).map(|c| phase_value(domain.center(c), z0, lambda)).collect();
    PhaseField { z0, lambda, values }
}

pub fn sample_field<F>(domain: &Arc<DomainGrid>, n: usize, generator: F) -> Result<MatrixField>
where
    F: Fn(Complex64) -> CMat,
{
    let mut values = Vec::with_capacity(domain.len() * n * n);
    for c in 0..domain.len() {
        let m = generator(domain.center(c));
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ChannelMismatch { expected: n, got: m.nrows() });
        }
        for i in 0..n {
            for j in 0..n {
                let x = m[(i, j)];
                if !x.re.is_finite() || !x.im.is_finite() {
                    return Err(Error::NonFinite { cell: c });
                }
                values.push(x);
            }
        }
    }
    Ok(MatrixField { n, domain: domain.clone(), values })
}

impl MatrixField {
    pub fn zeros(domain: &Arc<DomainGrid>, n: usize) -> Self {
        MatrixField { n, domain: domain.clone(), values: vec![Complex64::new(0.0, 0.0); domain.len() * n * n] }
    }

    pub fn identity(domain: &Arc<DomainGrid>, n: usize) -> Self {
        let mut f = Self::zeros(domain, n);
        for c in 0..domain.len() {
            for i in 0..n {
                f.values[c * n * n + i * n + i] = Complex64::new(1.0, 0.0);
            }
        }
        f
    }

    pub fn from_values(domain: &Arc<DomainGrid>, n: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.len() * n * n {
            return Err(Error::GridMismatch);
        }
        if let Some(p) = values.iter().position(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite { cell: p / (n * n) });
        }
        Ok(MatrixField { n, domain: domain.clone(), values })
    }

    /// Scalar field `s(z) * M` for a fixed matrix M.
    pub fn from_scalar(domain: &Arc<DomainGrid>, scalar: &[Complex64], m: &CMat) -> Self {
        let n = m.nrows();
        let mut values = Vec::with_capacity(scalar.len() * n * n);
        for &s in scalar {
            for i in 0..n {
                for j in 0..n {
                    values.push(s * m[(i, j)]);
                }
            }
        }
        MatrixField { n, domain: domain.clone(), values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &Arc<DomainGrid> {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn block(&self, cell: usize) -> &[Complex64] {
        let nn = self.n * self.n;
        &self.values[cell * nn..(cell + 1) * nn]
    }

    pub fn matrix(&self, cell: usize) -> CMat {
        CMat::from_row_slice(self.n, self.n, self.block(cell))
    }

    pub fn same_grid(&self, other: &MatrixField) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    pub fn check_compatible(&self, other: &MatrixField) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        if self.n != other.n {
            return Err(Error::ChannelMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    /// Entry (i, j) as a scalar grid function.
    pub fn plane(&self, i: usize, j: usize) -> Vec<Complex64> {
        let nn = self.n * self.n;
        self.values.iter().skip(i * self.n + j).step_by(nn).copied().collect()
    }

    pub fn set_plane(&mut self, i: usize, j: usize, plane: &[Complex64]) {
        let nn = self.n * self.n;
        for (slot, &x) in self.values.iter_mut().skip(i * self.n + j).step_by(nn).zip(plane) {
            *slot = x;
        }
    }

    /// Applies a scalar linear map to every entry plane.
    pub fn map_planes<F>(&self, f: F) -> MatrixField
    where
        F: Fn(&[Complex64]) -> Vec<Complex64>,
    {
        if self.n == 1 {
            return MatrixField { domain: self.domain.clone(), n: 1, values: f(&self.values) };
        }
        let mut out = Self::zeros(&self.domain, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set_plane(i, j, &f(&self.plane(i, j)));
            }
        }
        out
    }

    pub fn transpose(&self) -> MatrixField {
        let n = self.n;
        let mut out = self.clone();
        for c in 0..self.domain.len() {
            let b = c * n * n;
            for i in 0..n {
                for j in 0..n {
                    out.values[b + i * n + j] = self.values[b + j * n + i];
                }
            }
        }
        out
    }

    pub fn conj(&self) -> MatrixField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|x| *x = x.conj());
        out
    }

    pub fn scale(&self, s: Complex64) -> MatrixField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|x| *x *= s);
        out
    }

    /// Multiplies cell c by the scalar `s[c]`.
    pub fn scale_cells(&self, s: &[Complex64]) -> MatrixField {
        let nn = self.n * self.n;
        let mut out = self.clone();
        for (chunk, &sc) in out.values.chunks_mut(nn).zip(s) {
            chunk.iter_mut().for_each(|x| *x *= sc);
        }
        out
    }

    pub fn add(&self, other: &MatrixField) -> MatrixField {
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        out
    }

    pub fn sub(&self, other: &MatrixField) -> MatrixField {
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a -= b);
        out
    }

    pub fn axpy(&mut self, a: Complex64, other: &MatrixField) {
        self.values.iter_mut().zip(&other.values).for_each(|(x, y)| *x += a * y);
    }

    /// Pointwise matrix product `self(z) * other(z)`.
    pub fn mul(&self, other: &MatrixField) -> MatrixField {
        let n = self.n;
        let nn = n * n;
        let mut out = Self::zeros(&self.domain, n);
        for ((o, a), b) in out.values.chunks_mut(nn).zip(self.values.chunks(nn)).zip(other.values.chunks(nn)) {
            for i in 0..n {
                for j in 0..n {
                    let mut s = Complex64::new(0.0, 0.0);
                    for k in 0..n {
                        s += a[i * n + k] * b[k * n + j];
                    }
                    o[i * n + j] = s;
                }
            }
        }
        out
    }

    /// Area quadrature `sum_c w_c f(c)`.
    pub fn integrate(&self) -> CMat {
        let n = self.n;
        let nn = n * n;
        let mut acc = vec![Complex64::new(0.0, 0.0); nn];
        for (c, chunk) in self.values.chunks(nn).enumerate() {
            let w = self.domain.weight(c);
            for (a, x) in acc.iter_mut().zip(chunk) {
                *a += x * w;
            }
        }
        CMat::from_row_slice(n, n, &acc)
    }

    /// Max over cells of the max-entry modulus.
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Weighted L2 norm (Frobenius per cell) restricted to cells with `|z| <= r_max`.
    pub fn l2_within(&self, r_max: f64) -> f64 {
        let nn = self.n * self.n;
        let mut s = 0.0;
        for (c, chunk) in self.values.chunks(nn).enumerate() {
            if self.domain.center(c).norm() <= r_max {
                s += self.domain.weight(c) * chunk.iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
        }
        s.sqrt()
    }

    pub fn wirtinger(&self, direction: Direction) -> Result<MatrixField> {
        if self.domain.n_r < 3 {
            return Err(Error::TooCoarse(self.domain.n_r));
        }
        let d = &*self.domain;
        Ok(self.map_planes(|p| wirtinger_plane(d, p, direction)))
    }

    /// `4 (d/dz + 2 lambda (z - z0)) d/dzbar`, by finite differences; `lambda = 0` gives the Laplacian.
    pub fn twisted_laplacian(&self, z0: Complex64, lambda: Complex64) -> Result<MatrixField> {
        let dbar = self.wirtinger(Direction::ZBar)?;
        let mut out = dbar.wirtinger(Direction::Z)?;
        let shift: Vec<Complex64> = (0..self.domain.len()).map(|c| 2.0 * lambda * (self.domain.center(c) - z0)).collect();
        out = out.add(&dbar.scale_cells(&shift));
        Ok(out.scale(Complex64::new(4.0, 0.0)))
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        let sup = self.sup();
        match kind {
            NormKind::Sup => Ok(sup),
            NormKind::C1ZBar => Ok(sup.max(self.wirtinger(Direction::ZBar)?.sup())),
            NormKind::C2 => {
                let dz = self.wirtinger(Direction::Z)?;
                let dzb = self.wirtinger(Direction::ZBar)?;
                let dx = dz.add(&dzb);
                let dy = dz.sub(&dzb).scale(I);
                let mut m = sup.max(dx.sup()).max(dy.sup());
                for g in [&dx, &dy] {
                    let gz = g.wirtinger(Direction::Z)?;
                    let gzb = g.wirtinger(Direction::ZBar)?;
                    m = m.max(gz.add(&gzb).sup()).max(gz.sub(&gzb).sup());
                }
                Ok(m)
            }
        }
    }
}

/// Radial and angular partial derivatives of a scalar plane.
fn polar_partials(d: &DomainGrid, p: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let (nr, nt) = (d.n_r, d.n_theta);
    let h = d.dr;
    let mut pr = vec![Complex64::new(0.0, 0.0); p.len()];
    let mut pt = vec![Complex64::new(0.0, 0.0); p.len()];
    let at = |i: usize, j: usize| p[i * nt + j];
    for i in 0..nr {
        for j in 0..nt {
            let k = i * nt + j;
            pr[k] = if i == 0 {
                if nt % 2 == 0 {
                    // centered through the origin using the antipodal cell
                    (at(1, j) - at(0, (j + nt / 2) % nt)) / (2.0 * h)
                } else {
                    (-3.0 * at(0, j) + 4.0 * at(1, j) - at(2, j)) / (2.0 * h)
                }
            } else if i == nr - 1 {
                (3.0 * at(i, j) - 4.0 * at(i - 1, j) + at(i - 2, j)) / (2.0 * h)
            } else {
                (at(i + 1, j) - at(i - 1, j)) / (2.0 * h)
            };
            pt[k] = (at(i, (j + 1) % nt) - at(i, (j + nt - 1) % nt)) / (2.0 * d.dtheta);
        }
    }
    (pr, pt)
}

pub(crate) fn wirtinger_plane(d: &DomainGrid, p: &[Complex64], direction: Direction) -> Vec<Complex64> {
    let (pr, pt) = polar_partials(d, p);
    let nt = d.n_theta;
    (0..p.len())
        .map(|k| {
            let e = d.angles()[k % nt];
            let r = d.rings()[k / nt];
            match direction {
                Direction::ZBar => 0.5 * e * (pr[k] + I * pt[k] / r),
                Direction::Z => 0.5 * e.conj() * (pr[k] - I * pt[k] / r),
            }
        })
        .collect()
}

/// Serializes a matrix as rows of `[re, im]` pairs.
pub fn ser_cmat<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> =
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    rows.serialize(s)
}

impl Serialize for MatrixField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.values.iter().map(|x| [x.re, x.im]).collect();
        let mut st = s.serialize_struct("MatrixField", 4)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("n_r", &self.domain.n_r)?;
        st.serialize_field("n_theta", &self.domain.n_theta)?;
        st.serialize_field("values", &pairs)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_disk_domain;
    use proptest::prelude::*;

    fn dom(nr: usize, nt: usize) -> Arc<DomainGrid> {
        Arc::new(build_disk_domain(1.0, nr, nt).unwrap())
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sampling() {
        let d = dom(1, 4);
        let id = sample_field(&d, 2, |_| CMat::identity(2, 2)).unwrap();
        assert!((0..4).all(|k| id.matrix(k) == CMat::identity(2, 2)));
        let z = sample_field(&d, 1, |z| CMat::from_element(1, 1, z)).unwrap();
        for k in 0..4 {
            assert_eq!(z.values()[k], d.center(k));
        }
        assert!(sample_field(&d, 1, |_| CMat::from_element(1, 1, c(f64::NAN, 0.0))).is_err());
    }

    #[test]
    fn wirtinger_examples() {
        let d = dom(32, 64);
        let zbar = sample_field(&d, 1, |z| CMat::from_element(1, 1, z.conj())).unwrap();
        let e = zbar.wirtinger(Direction::ZBar).unwrap();
        // angular centered differences leave an O(dtheta^2) error
        assert!(e.values().iter().all(|x| (x - 1.0).norm() < 2e-3));
        let z = sample_field(&d, 1, |z| CMat::from_element(1, 1, z)).unwrap();
        assert!(z.wirtinger(Direction::ZBar).unwrap().sup() < 2e-3);
        let m = sample_field(&d, 2, |z| CMat::identity(2, 2) * c(z.norm_sqr(), 0.0)).unwrap();
        let g = m.wirtinger(Direction::Z).unwrap();
        let want = sample_field(&d, 2, |z| CMat::identity(2, 2) * z.conj()).unwrap();
        assert!(g.sub(&want).sup() < 1e-9);
        assert!(build_field_too_coarse().is_err());
    }

    fn build_field_too_coarse() -> Result<MatrixField> {
        MatrixField::identity(&dom(2, 8), 1).wirtinger(Direction::Z)
    }

    #[test]
    fn wirtinger_second_order() {
        let f = |z: Complex64| (z * c(1.3, -0.4)).exp() * z.conj();
        let df = |z: Complex64| (z * c(1.3, -0.4)).exp();
        let err = |nr: usize| {
            let d = dom(nr, 2 * nr);
            let u = sample_field(&d, 1, |z| CMat::from_element(1, 1, f(z))).unwrap();
            let g = u.wirtinger(Direction::ZBar).unwrap();
            let want = sample_field(&d, 1, |z| CMat::from_element(1, 1, df(z))).unwrap();
            g.sub(&want).l2_within(0.8)
        };
        let (a, b) = (err(24), err(48));
        assert!(a / b > 3.0, "ratio {}", a / b);
    }

    #[test]
    fn norms() {
        let d = dom(16, 32);
        let three = MatrixField::identity(&d, 2).scale(c(3.0, 0.0));
        assert_eq!(three.norm(NormKind::Sup).unwrap(), 3.0);
        let zero = MatrixField::zeros(&d, 2);
        for k in [NormKind::Sup, NormKind::C1ZBar, NormKind::C2] {
            assert_eq!(zero.norm(k).unwrap(), 0.0);
        }
        // fine-grid oracle: sup |zbar| -> 1 and d/dzbar zbar = 1
        let fine = dom(200, 512);
        let zb = sample_field(&fine, 1, |z| CMat::from_element(1, 1, z.conj())).unwrap();
        let direct_sup = fine.centers().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let n1 = zb.norm(NormKind::C1ZBar).unwrap();
        assert!((n1 - direct_sup.max(1.0)).abs() < 1e-4, "{n1}");
    }

    #[test]
    fn c2_of_quadratic() {
        // x^2 has second x-derivative 2
        let d = dom(32, 64);
        let u = sample_field(&d, 1, |z| CMat::from_element(1, 1, c(z.re * z.re, 0.0))).unwrap();
        let n = u.norm(NormKind::C2).unwrap();
        assert!((n - 2.0).abs() < 0.05, "{n}");
    }

    #[test]
    fn phase_examples() {
        let d = dom(8, 16);
        let p = phase(c(0.2, 0.1), c(0.0, 0.0), &d);
        assert!(p.values.iter().all(|&x| x == c(1.0, 0.0)));
        assert_eq!(phase_value(c(0.3, 0.3), c(0.3, 0.3), c(5.0, 2.0)), c(1.0, 0.0));
        let p = phase(c(-0.3, 0.5), c(40.0, -17.0), &d);
        assert!(p.values.iter().all(|x| (x.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn transpose_and_mul() {
        let d = dom(3, 4);
        let a = sample_field(&d, 2, |z| CMat::from_row_slice(2, 2, &[z, c(1.0, 0.0), z * z, c(0.0, 2.0)])).unwrap();
        let b = sample_field(&d, 2, |z| CMat::from_row_slice(2, 2, &[c(0.5, 0.0), z.conj(), c(0.0, 0.0), z])).unwrap();
        let ab = a.mul(&b);
        for k in 0..d.len() {
            assert!((ab.matrix(k) - a.matrix(k) * b.matrix(k)).norm() < 1e-14);
            assert_eq!(a.transpose().matrix(k), a.matrix(k).transpose());
        }
        let pl = a.plane(1, 0);
        let mut e = MatrixField::zeros(&d, 2);
        e.set_plane(1, 0, &pl);
        assert_eq!(e.plane(1, 0), pl);
    }

    #[test]
    fn json_layout() {
        let d = dom(1, 4);
        let f = MatrixField::identity(&d, 1);
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        assert_eq!(v["n"], 1);
        assert_eq!(v["n_theta"], 4);
        assert_eq!(v["values"][0][0], 1.0);
        assert_eq!(v["values"].as_array().unwrap().len(), 4);
    }

    fn arb_field(d: Arc<DomainGrid>) -> impl Strategy<Value = MatrixField> {
        prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), d.len() * 4).prop_map(move |v| {
            MatrixField::from_values(&d, 2, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sup_is_a_norm(a in arb_field(dom(4, 6)), b in arb_field(dom(4, 6)), s in -3.0f64..3.0) {
            prop_assert!(a.add(&b).sup() <= a.sup() + b.sup() + 1e-12);
            prop_assert!((a.scale(c(s, 0.0)).sup() - s.abs() * a.sup()).abs() < 1e-12);
        }

        #[test]
        fn wirtinger_linear_and_conjugate(a in arb_field(dom(4, 6)), b in arb_field(dom(4, 6))) {
            let lhs = a.scale(c(2.0, 1.0)).add(&b).wirtinger(Direction::ZBar).unwrap();
            let rhs = a.wirtinger(Direction::ZBar).unwrap().scale(c(2.0, 1.0))
                .add(&b.wirtinger(Direction::ZBar).unwrap());
            prop_assert!(lhs.sub(&rhs).sup() <= 1e-9 * (1.0 + lhs.sup()));
            let cz = a.conj().wirtinger(Direction::Z).unwrap();
            let zc = a.wirtinger(Direction::ZBar).unwrap().conj();
            prop_assert!(cz.sub(&zc).sup() <= 1e-9 * (1.0 + cz.sup()));
        }
    }
}
