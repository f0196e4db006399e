//! The integral equation `mu = I + g(v mu)`, its Neumann truncations and the
//! stationary-phase functionals built on it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cauchy::CauchyPlan;
use crate::error::{Error, Result};
use crate::field::{ser_cmat, CMat, MatrixField, NormKind};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest unknown count `cells * n` solved by dense LU.
pub const DENSE_UNKNOWNS: usize = 2048;
/// Power-iteration steps for the contraction estimate.
pub const DELTA_ITERATIONS: usize = 10;
/// Residual target of the direct solve.
pub const DIRECT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMethod {
    Neumann(usize),
    Direct,
}

/// Which kernel the equation uses: `g`, or its complex conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Standard,
    Conjugated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Truncated,
    DenseLu,
    FixedPoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct MuSolution {
    pub z0: Complex64,
    pub lambda: Complex64,
    #[serde(skip)]
    pub mu: MatrixField,
    pub method: MuMethod,
    pub kernel: Kernel,
    pub strategy: Strategy,
    pub residual: f64,
    pub delta_measured: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HValue {
    #[serde(serialize_with = "ser_cmat")]
    pub value: CMat,
    pub z0: Complex64,
    pub lambda: Complex64,
    /// Truncation order; `None` for the full solution.
    pub order: Option<usize>,
}

/// The linear map `u -> g(v u)` (or the conjugated-kernel variant).
pub struct MuOperator<'a> {
    pub plan: &'a CauchyPlan,
    pub v: &'a MatrixField,
    pub kernel: Kernel,
}

impl<'a> MuOperator<'a> {
    pub fn new(plan: &'a CauchyPlan, v: &'a MatrixField, kernel: Kernel) -> Result<Self> {
        if **v.domain() != **plan.domain() {
            return Err(Error::GridMismatch);
        }
        Ok(MuOperator { plan, v, kernel })
    }

    pub fn kernel_plane(&self, p: &[Complex64]) -> Vec<Complex64> {
        match self.kernel {
            Kernel::Standard => self.plan.g_plane(p),
            Kernel::Conjugated => {
                let c: Vec<_> = p.iter().map(|x| x.conj()).collect();
                self.plan.g_plane(&c).into_iter().map(|x| x.conj()).collect()
            }
        }
    }

    pub fn kernel_field(&self, f: &MatrixField) -> MatrixField {
        f.map_planes(|p| self.kernel_plane(p))
    }

    pub fn apply(&self, u: &MatrixField) -> MatrixField {
        self.kernel_field(&self.v.mul(u))
    }

    /// Largest growth ratio `|A x| / |x|` along 10 power steps from `I`, in the c1_zbar norm.
    pub fn measure_delta(&self) -> Result<f64> {
        let d = self.v.domain();
        let mut x = MatrixField::identity(d, self.v.n());
        let mut nx = x.norm(NormKind::C1ZBar)?;
        let mut delta: f64 = 0.0;
        for _ in 0..DELTA_ITERATIONS {
            let y = self.apply(&x);
            let ny = y.norm(NormKind::C1ZBar)?;
            delta = delta.max(ny / nx);
            if ny == 0.0 {
                break;
            }
            x = y.scale(Complex64::new(1.0 / ny, 0.0));
            nx = 1.0;
        }
        Ok(delta)
    }

    pub fn residual(&self, mu: &MatrixField) -> f64 {
        let mut r = self.apply(mu);
        add_identity(&mut r);
        max_diff(&r, mu)
    }

    /// Dense matrix of the scalar kernel on the grid (column c = kernel of unit plane c).
    fn scalar_matrix(&self) -> DMatrix<Complex64> {
        let m = self.v.domain().len();
        let cols: Vec<Vec<Complex64>> = (0..m)
            .into_par_iter()
            .map(|c| {
                let mut e = vec![ZERO; m];
                e[c] = Complex64::new(1.0, 0.0);
                self.kernel_plane(&e)
            })
            .collect();
        DMatrix::from_fn(m, m, |i, j| cols[j][i])
    }
}

/// Partial sums `sum_{j<=k} A^j I`; returns every order 0..=k.
pub fn neumann_chain(op: &MuOperator, k: usize) -> Vec<MatrixField> {
    let d = op.v.domain();
    let mut term = MatrixField::identity(d, op.v.n());
    let mut acc = term.clone();
    let mut out = vec![acc.clone()];
    for _ in 0..k {
        term = op.apply(&term);
        acc = acc.add(&term);
        out.push(acc.clone());
    }
    out
}

pub fn mu_truncated(v: &MatrixField, plan: &CauchyPlan, k: usize, kernel: Kernel) -> Result<MuSolution> {
    let op = MuOperator::new(plan, v, kernel)?;
    let mu = neumann_chain(&op, k).pop().expect("chain is non-empty");
    let residual = op.residual(&mu);
    Ok(MuSolution {
        z0: plan.z0,
        lambda: plan.lambda,
        mu,
        method: MuMethod::Neumann(k),
        kernel,
        strategy: Strategy::Truncated,
        residual,
        delta_measured: f64::NAN,
        iterations: k,
    })
}

pub fn solve_mu(v: &MatrixField, plan: &CauchyPlan, method: MuMethod, kernel: Kernel) -> Result<MuSolution> {
    solve_mu_with(v, plan, method, kernel, true)
}

/// As [`solve_mu`]; with `measure_delta = false` the power iteration is skipped
/// (only allowed for `Direct`) and `delta_measured` is NaN.
pub fn solve_mu_with(
    v: &MatrixField,
    plan: &CauchyPlan,
    method: MuMethod,
    kernel: Kernel,
    measure_delta: bool,
) -> Result<MuSolution> {
    let op = MuOperator::new(plan, v, kernel)?;
    let delta = if measure_delta || matches!(method, MuMethod::Neumann(_)) { op.measure_delta()? } else { f64::NAN };
    match method {
        MuMethod::Neumann(k) => {
            if delta > 0.9 {
                return Err(Error::Contraction(delta));
            }
            let mut sol = mu_truncated(v, plan, k, kernel)?;
            sol.delta_measured = delta;
            Ok(sol)
        }
        MuMethod::Direct => {
            let n = v.n();
            let m = v.domain().len();
            let (mu, strategy, iterations) = if m * n <= DENSE_UNKNOWNS {
                (dense_solve(&op)?, Strategy::DenseLu, 1)
            } else {
                let (mu, it) = fixed_point(&op, delta)?;
                (mu, Strategy::FixedPoint, it)
            };
            let residual = op.residual(&mu);
            if residual > DIRECT_TOLERANCE {
                return Err(Error::Contraction(delta));
            }
            Ok(MuSolution {
                z0: plan.z0,
                lambda: plan.lambda,
                mu,
                method,
                kernel,
                strategy,
                residual,
                delta_measured: delta,
                iterations,
            })
        }
    }
}

/// Dense LU on `cells * n` unknowns; the n columns of mu share one matrix.
fn dense_solve(op: &MuOperator) -> Result<MatrixField> {
    let d = op.v.domain();
    let (m, n) = (d.len(), op.v.n());
    let g = op.scalar_matrix();
    let dim = m * n;
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for cp in 0..m {
        for ap in 0..n {
            let row = cp * n + ap;
            for c in 0..m {
                let gk = g[(cp, c)];
                if gk == ZERO {
                    continue;
                }
                let vb = op.v.block(c);
                for b in 0..n {
                    a[(row, c * n + b)] -= gk * vb[ap * n + b];
                }
            }
            a[(row, row)] += Complex64::new(1.0, 0.0);
        }
    }
    let lu = a.lu();
    let mut rhs = DMatrix::<Complex64>::zeros(dim, n);
    for c in 0..m {
        for k in 0..n {
            rhs[(c * n + k, k)] = Complex64::new(1.0, 0.0);
        }
    }
    let x = lu.solve(&rhs).ok_or(Error::Singular { pivot: 0 })?;
    let mut vals = vec![ZERO; m * n * n];
    for c in 0..m {
        for a_ in 0..n {
            for k in 0..n {
                vals[(c * n + a_) * n + k] = x[(c * n + a_, k)];
            }
        }
    }
    MatrixField::from_values(d, n, vals)
}

fn add_identity(f: &mut MatrixField) {
    let n = f.n();
    for blk in f.values_mut().chunks_mut(n * n) {
        for a in 0..n {
            blk[a * n + a] += Complex64::new(1.0, 0.0);
        }
    }
}

fn max_diff(a: &MatrixField, b: &MatrixField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn fixed_point(op: &MuOperator, delta: f64) -> Result<(MatrixField, usize)> {
    let mut mu = MatrixField::identity(op.v.domain(), op.v.n());
    let mut last = f64::INFINITY;
    for it in 1..=500 {
        let mut next = op.apply(&mu);
        add_identity(&mut next);
        let step = max_diff(&next, &mu);
        mu = next;
        if !step.is_finite() || (it > 20 && step > last) {
            return Err(Error::Contraction(delta));
        }
        if step < 1e-3 * DIRECT_TOLERANCE {
            return Ok((mu, it));
        }
        last = step;
    }
    Err(Error::Contraction(delta))
}

pub fn w_functional(w: &MatrixField, plan: &CauchyPlan) -> Result<HValue> {
    if **w.domain() != **plan.domain() {
        return Err(Error::GridMismatch);
    }
    Ok(HValue { value: w.scale_cells(plan.p_plus()).integrate(), z0: plan.z0, lambda: plan.lambda, order: None })
}

pub fn h_functional(v: &MatrixField, sol: &MuSolution, plan: &CauchyPlan) -> Result<HValue> {
    v.check_compatible(&sol.mu)?;
    let mut h = w_functional(&v.mul(&sol.mu), plan)?;
    h.order = match sol.method {
        MuMethod::Neumann(k) => Some(k),
        MuMethod::Direct => None,
    };
    Ok(h)
}

pub fn h_truncated(v: &MatrixField, plan: &CauchyPlan, k: usize) -> Result<HValue> {
    let sol = mu_truncated(v, plan, k, Kernel::Standard)?;
    h_functional(v, &sol, plan)
}

/// `int e u (g v) dA`.
pub fn w_bilinear(u: &MatrixField, v: &MatrixField, plan: &CauchyPlan) -> Result<HValue> {
    u.check_compatible(v)?;
    let gv = crate::cauchy::green_g_apply(plan, v)?;
    w_functional(&u.mul(&gv), plan)
}

/// `psi = exp(lambda (z - z0)^2) mu`, refusing exponents beyond the overflow guard.
pub fn psi_from_mu(sol: &MuSolution) -> Result<MatrixField> {
    let d = sol.mu.domain();
    let mut s = Vec::with_capacity(d.len());
    for c in 0..d.len() {
        let w = d.center(c) - sol.z0;
        let e = sol.lambda * w * w;
        if e.re > crate::OVERFLOW_GUARD {
            return Err(Error::Overflow(e.re));
        }
        s.push(e.exp());
    }
    Ok(sol.mu.scale_cells(&s))
}

/// Relative L2 residual of `-4 d/dz d/dzbar psi + v psi = 0` over `|z| <= r_max`.
pub fn psi_pde_residual(v: &MatrixField, sol: &MuSolution, r_max: f64) -> Result<f64> {
    let psi = psi_from_mu(sol)?;
    let vpsi = v.mul(&psi);
    let lap = psi.twisted_laplacian(sol.z0, Complex64::new(0.0, 0.0))?;
    Ok(vpsi.sub(&lap).l2_within(r_max) / vpsi.l2_within(r_max).max(f64::MIN_POSITIVE))
}

/// Relative L2 residual of `-4 (d/dz + 2 lambda (z - z0)) d/dzbar mu + v mu = 0` over `|z| <= r_max`.
pub fn mu_pde_residual(v: &MatrixField, sol: &MuSolution, r_max: f64) -> Result<f64> {
    let vmu = v.mul(&sol.mu);
    let op = sol.mu.twisted_laplacian(sol.z0, sol.lambda)?;
    Ok(vmu.sub(&op).l2_within(r_max) / vmu.l2_within(r_max).max(f64::MIN_POSITIVE))
}
