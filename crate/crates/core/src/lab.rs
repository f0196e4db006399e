//! Potentials, the lambda schedule, decay-rate fits and stability sweeps.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::cauchy::{CauchyMethod, CauchyPlan};
use crate::error::{Error, Result};
use crate::field::{sample_field, CMat, MatrixField, NormKind};
use crate::forward::{
    assemble_dtn, check_dirichlet_spectrum, dtn_norm1, dtn_op_norm, DtnMap, ForwardSolver, DEFAULT_SPECTRUM_THRESHOLD,
};
use crate::grid::{build_disk_domain, max_boundary_distance, DomainGrid};
use crate::mu::{neumann_chain, solve_mu, w_bilinear, w_functional, Kernel, MuMethod, MuOperator};
use crate::recon::{i_decomposition, reconstruct_boundary_layer, reconstruct_from_dtn};

/// Complex number as `[re, im]` in config files.
pub type Cx = [f64; 2];

fn cx(a: Cx) -> Complex64 {
    Complex64::new(a[0], a[1])
}

const REGENERATE_ATTEMPTS: u64 = 8;

/// `phi(w) = exp(1 - 1/(1 - |w|^2))` for `|w| < 1`, else 0.
pub fn bump_profile(w: Complex64) -> f64 {
    let s = w.norm_sqr();
    if s < 1.0 {
        (1.0 - 1.0 / (1.0 - s)).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Cx,
    pub radius: f64,
    /// Row-major n x n entries, or a single entry meaning a multiple of I.
    pub amplitude: Vec<Cx>,
}

impl Bump {
    pub fn scalar(center: Cx, radius: f64, amplitude: Cx) -> Self {
        Bump { center, radius, amplitude: vec![amplitude] }
    }

    fn matrix(&self, n: usize) -> Result<CMat> {
        match self.amplitude.len() {
            1 => Ok(CMat::identity(n, n) * cx(self.amplitude[0])),
            k if k == n * n => Ok(CMat::from_row_iterator(n, n, self.amplitude.iter().map(|&a| cx(a)))),
            k => Err(Error::InvalidParameter(format!("bump amplitude has {k} entries, expected 1 or {}", n * n))),
        }
    }

    fn value(&self, z: Complex64) -> f64 {
        bump_profile((z - cx(self.center)) / self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBumps {
    pub count: usize,
    pub radius: [f64; 2],
    /// Entries drawn uniformly from the square `|re|, |im| <= amplitude`.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bumps: Vec<Bump>,
    #[serde(default)]
    pub random: Option<RandomBumps>,
    #[serde(default)]
    pub target_c2_bound: Option<f64>,
    /// Require every support inside `|z| < 0.9 R`.
    #[serde(default = "yes")]
    pub vanish_at_boundary: bool,
}

fn yes() -> bool {
    true
}

impl PotentialSpec {
    pub fn zero(n: usize) -> Self {
        PotentialSpec { n, seed: 0, bumps: vec![], random: None, target_c2_bound: None, vanish_at_boundary: true }
    }

    fn draw(&self, seed: u64, radius: f64) -> Result<Vec<Bump>> {
        let mut out = self.bumps.clone();
        if let Some(r) = &self.random {
            if !(r.radius[0] > 0.0 && r.radius[0] <= r.radius[1] && r.radius[1] < 0.9 * radius) {
                return Err(Error::InvalidParameter(format!("random bump radius range {:?}", r.radius)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..r.count {
                let rad = rng.gen_range(r.radius[0]..=r.radius[1]);
                let reach = 0.9 * radius - rad;
                let rho = reach * rng.gen::<f64>().sqrt();
                let th = rng.gen_range(0.0..2.0 * PI);
                let amp = (0..self.n * self.n)
                    .map(|_| [rng.gen_range(-r.amplitude..=r.amplitude), rng.gen_range(-r.amplitude..=r.amplitude)])
                    .collect();
                out.push(Bump { center: [rho * th.cos(), rho * th.sin()], radius: rad, amplitude: amp });
            }
        }
        Ok(out)
    }
}

/// Sum of bumps, without any checks beyond shapes.
pub fn sample_bumps(domain: &Arc<DomainGrid>, n: usize, bumps: &[Bump]) -> Result<MatrixField> {
    let mats = bumps.iter().map(|b| b.matrix(n)).collect::<Result<Vec<_>>>()?;
    sample_field(domain, n, |z| {
        let mut m = CMat::zeros(n, n);
        for (b, a) in bumps.iter().zip(&mats) {
            let p = b.value(z);
            if p != 0.0 {
                m += a * Complex64::new(p, 0.0);
            }
        }
        m
    })
}

/// Exact value of the bump sum at a point.
pub fn bumps_at(n: usize, bumps: &[Bump], z: Complex64) -> Result<CMat> {
    let mut m = CMat::zeros(n, n);
    for b in bumps {
        m += b.matrix(n)? * Complex64::new(b.value(z), 0.0);
    }
    Ok(m)
}

pub fn generate_potential(spec: &PotentialSpec, domain: &Arc<DomainGrid>) -> Result<MatrixField> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    for b in &spec.bumps {
        if b.radius <= 0.0 {
            return Err(Error::InvalidParameter(format!("bump radius {}", b.radius)));
        }
        if spec.vanish_at_boundary && cx(b.center).norm() + b.radius > 0.9 * domain.radius {
            return Err(Error::InvalidParameter(format!("bump at {:?} leaves |z| < 0.9 R", b.center)));
        }
        b.matrix(spec.n)?;
    }
    let attempts = if spec.random.is_some() { REGENERATE_ATTEMPTS } else { 1 };
    for attempt in 0..attempts {
        let bumps = spec.draw(spec.seed.wrapping_add(attempt), domain.radius)?;
        let mut v = sample_bumps(domain, spec.n, &bumps)?;
        if let Some(cap) = spec.target_c2_bound {
            let c2 = v.norm(NormKind::C2)?;
            if c2 > cap {
                v = v.scale(Complex64::new(cap / c2, 0.0));
            }
        }
        if check_dirichlet_spectrum(&v, DEFAULT_SPECTRUM_THRESHOLD)?.passes {
            return Ok(v);
        }
    }
    Err(Error::PotentialRejected(attempts as usize))
}

/// `|lambda| = gamma log(3 + 1/epsilon)`, with `0 < gamma < 1/(2 L^2 + 1)`.
pub fn lambda_schedule(epsilon: f64, gamma: f64, l: f64) -> Result<f64> {
    let bound = 1.0 / (2.0 * l * l + 1.0);
    if !(gamma > 0.0 && gamma < bound) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in (0, {bound})")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    Ok(gamma * (3.0 + 1.0 / epsilon).ln())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> RateFit {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    RateFit { slope, intercept, residual: (ss / k).sqrt() }
}

/// Slope of `log value - p log log(3 lambda)` against `log lambda`.
pub fn rate_fit(samples: &[(f64, f64)], subtract_log_power: u32) -> Result<RateFit> {
    if samples.len() < 6 {
        return Err(Error::BadSamples(format!("{} samples, need at least 6", samples.len())));
    }
    if let Some(s) = samples.iter().find(|s| !(s.0 > 0.0 && s.1 > 0.0 && s.0.is_finite() && s.1.is_finite())) {
        return Err(Error::BadSamples(format!("non-positive sample {s:?}")));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> =
        samples.iter().map(|s| s.1.ln() - subtract_log_power as f64 * (3.0 * s.0).ln().ln()).collect();
    Ok(least_squares(&x, &y))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub lemma: String,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub subtract_log_power: u32,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub window: Option<Window>,
    pub decades: f64,
    pub pass: bool,
    pub detail: String,
}

impl DecayReport {
    fn from_fit(lemma: &str, lambdas: Vec<f64>, values: Vec<f64>, p: u32, window: Window) -> Result<Self> {
        let samples: Vec<(f64, f64)> = lambdas.iter().copied().zip(values.iter().copied()).collect();
        let fit = rate_fit(&samples, p)?;
        let decades = span_decades(&lambdas);
        let pass = window.contains(fit.slope) && decades >= 2.0;
        Ok(DecayReport {
            lemma: lemma.into(),
            lambdas,
            values,
            subtract_log_power: p,
            slope: Some(fit.slope),
            residual: Some(fit.residual),
            window: Some(window),
            decades,
            pass,
            detail: String::new(),
        })
    }
}

fn span_decades(x: &[f64]) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(0.0, f64::max);
    (hi / lo).log10()
}

/// Grid sized to resolve the phase at a given lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRule {
    pub nr_min: usize,
    pub nr_per_lambda: f64,
    pub nth_min: usize,
    pub nth_per_lambda: f64,
    pub nth_offset: f64,
}

impl Default for GridRule {
    fn default() -> Self {
        GridRule { nr_min: 64, nr_per_lambda: 2.0, nth_min: 256, nth_per_lambda: 5.0, nth_offset: 200.0 }
    }
}

impl GridRule {
    /// `(n_r, n_theta)`; n_theta is a power of two.
    pub fn size(&self, lambda: f64) -> (usize, usize) {
        let nr = self.nr_min.max((self.nr_per_lambda * lambda).ceil() as usize);
        let want = (self.nth_per_lambda * lambda + self.nth_offset).ceil() as usize;
        (nr, self.nth_min.max(want.next_power_of_two()))
    }

    pub fn domain(&self, lambda: f64, factor: usize) -> Result<Arc<DomainGrid>> {
        let (nr, nt) = self.size(lambda);
        Ok(Arc::new(build_disk_domain(1.0, nr * factor, nt * factor)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub lambdas: Vec<f64>,
    pub z0: Cx,
    pub grid: GridRule,
    pub method: CauchyMethod,
    pub u: Bump,
    pub v: Bump,
    pub v1: Bump,
    pub v2: Bump,
    pub lemma1: Window,
    pub lemma3: Window,
    pub lemma5: Window,
    pub lemma6: Window,
    pub i2: Window,
    pub i3: Window,
    pub i4: Window,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            lambdas: (0..9).map(|k| 4.0 * 2f64.powi(k)).collect(),
            z0: [0.0, 0.0],
            grid: GridRule::default(),
            method: CauchyMethod::Spectral,
            u: Bump::scalar([0.1, 0.05], 0.6, [1.0, 0.0]),
            v: Bump::scalar([-0.1, 0.1], 0.55, [1.0, 0.5]),
            v1: Bump::scalar([0.1, 0.05], 0.6, [0.8, 0.0]),
            v2: Bump::scalar([-0.1, 0.1], 0.55, [1.0, 0.3]),
            lemma1: Window { lo: -0.65, hi: -0.35 },
            lemma3: Window { lo: -1.2, hi: -0.8 },
            lemma5: Window { lo: -1.2, hi: -0.8 },
            lemma6: Window { lo: -2.0, hi: -1.5 },
            i2: Window { lo: -2.3, hi: -1.7 },
            i3: Window { lo: -2.0, hi: -1.5 },
            i4: Window { lo: -2.0, hi: -1.5 },
        }
    }
}

/// Raw per-lambda measurements behind the slope reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecaySample {
    pub lambda: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// `||g u||_c1 / ||u||_c1` with the zbar derivative taken exactly.
    pub lemma1: f64,
    pub lemma3: f64,
    pub lemma5: f64,
    pub lemma6: f64,
    pub i: [f64; 4],
}

/// Measures every decay quantity at one lambda on its own grid.
pub fn decay_sample(cfg: &DecayConfig, lambda: f64) -> Result<DecaySample> {
    let d = cfg.grid.domain(lambda, 1)?;
    let plan = CauchyPlan::new(&d, cx(cfg.z0), Complex64::new(lambda, 0.0), cfg.method)?;
    let u = sample_bumps(&d, 1, std::slice::from_ref(&cfg.u))?;
    let v = sample_bumps(&d, 1, std::slice::from_ref(&cfg.v))?;
    let (lemma1, lemma5) = {
        let tb = plan.tbar_plane(u.values());
        let gu: Vec<Complex64> = plan.t_plane(&tb).into_iter().map(|x| 0.25 * x).collect();
        let sup_g = gu.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let sup_dbar = 0.25 * tb.iter().map(|x| x.norm()).fold(0.0, f64::max);
        (sup_g.max(sup_dbar) / u.norm(NormKind::C1ZBar)?, sup_g / u.sup())
    };
    let lemma3 = w_functional(&v, &plan)?.value[(0, 0)].norm();
    let lemma6 = w_bilinear(&u, &v, &plan)?.value[(0, 0)].norm();
    drop((u, v));
    let v1 = sample_bumps(&d, 1, std::slice::from_ref(&cfg.v1))?;
    let v2 = sample_bumps(&d, 1, std::slice::from_ref(&cfg.v2))?;
    let dec = i_decomposition(&v1, &v2, &plan)?;
    Ok(DecaySample { lambda, n_r: d.n_r, n_theta: d.n_theta, lemma1, lemma3, lemma5, lemma6, i: dec.magnitudes() })
}

pub fn decay_reports(cfg: &DecayConfig, samples: &[DecaySample]) -> Result<Vec<DecayReport>> {
    let lams: Vec<f64> = samples.iter().map(|s| s.lambda).collect();
    let col = |f: &dyn Fn(&DecaySample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    Ok(vec![
        DecayReport::from_fit("lemma1", lams.clone(), col(&|s| s.lemma1), 0, cfg.lemma1)?,
        DecayReport::from_fit("lemma3", lams.clone(), col(&|s| s.lemma3), 1, cfg.lemma3)?,
        DecayReport::from_fit("lemma5", lams.clone(), col(&|s| s.lemma5), 1, cfg.lemma5)?,
        DecayReport::from_fit("lemma6", lams.clone(), col(&|s| s.lemma6), 2, cfg.lemma6)?,
        DecayReport::from_fit("i2", lams.clone(), col(&|s| s.i[1]), 2, cfg.i2)?,
        DecayReport::from_fit("i3", lams.clone(), col(&|s| s.i[2]), 2, cfg.i3)?,
        DecayReport::from_fit("i4", lams, col(&|s| s.i[3]), 2, cfg.i4)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma2Config {
    pub lambdas: Vec<f64>,
    pub z0: Cx,
    pub potential: Bump,
    pub grid: GridRule,
    /// Refinement factors; the last one is the reference for the floors.
    pub levels: Vec<usize>,
    pub max_slope: f64,
    /// Samples within `floor_margin` times their distance to the next level are excluded from the fit.
    pub floor_margin: f64,
}

impl Default for Lemma2Config {
    fn default() -> Self {
        Lemma2Config {
            lambdas: (0..7).map(|k| 4.0 * 2f64.powi(k)).collect(),
            z0: [0.0, 0.0],
            potential: Bump::scalar([0.1, 0.05], 0.6, [1.0, 0.0]),
            grid: GridRule::default(),
            levels: vec![1, 2, 4],
            max_slope: -0.75,
            floor_margin: 3.0,
        }
    }
}

/// Reconstruction error of `(2/pi)|lambda| h0` against the exact value, with
/// discretization floors measured between consecutive levels.
pub fn lemma2_report(cfg: &Lemma2Config) -> Result<(DecayReport, Vec<f64>)> {
    if cfg.levels.len() < 2 {
        return Err(Error::InvalidParameter("lemma2 needs at least two refinement levels".into()));
    }
    let z0 = cx(cfg.z0);
    let exact = bumps_at(1, std::slice::from_ref(&cfg.potential), z0)?[(0, 0)];
    // rec[level][lambda]
    let mut rec = vec![Vec::new(); cfg.levels.len()];
    for &lam in &cfg.lambdas {
        for (li, &f) in cfg.levels.iter().enumerate() {
            let d = cfg.grid.domain(lam, f)?;
            let v = sample_bumps(&d, 1, std::slice::from_ref(&cfg.potential))?;
            let plan = CauchyPlan::new(&d, z0, Complex64::new(lam, 0.0), CauchyMethod::Spectral)?;
            rec[li].push(crate::recon::reconstruct_pointwise(&v, &plan)?[(0, 0)]);
        }
    }
    // per-lambda floor of a level: distance to the next finer level
    let last = rec.len() - 1;
    let gaps: Vec<Vec<f64>> =
        (0..last).map(|li| rec[li].iter().zip(&rec[li + 1]).map(|(a, b)| (a - b).norm()).collect()).collect();
    let floors: Vec<f64> = gaps.iter().map(|g| g.iter().copied().fold(0.0, f64::max)).collect();
    let fit_level = last - 1;
    let errors: Vec<f64> = rec[fit_level].iter().map(|r| (r - exact).norm()).collect();
    let kept: Vec<(f64, f64)> = cfg
        .lambdas
        .iter()
        .zip(&errors)
        .zip(&gaps[fit_level])
        .filter(|((_, &e), &g)| e > cfg.floor_margin * g)
        .map(|((&l, &e), _)| (l, e))
        .collect();
    let shrinking = floors.windows(2).all(|w| w[1] < w[0]);
    let (slope, residual) = match rate_fit(&kept, 0) {
        Ok(f) => (Some(f.slope), Some(f.residual)),
        Err(_) => (None, None),
    };
    let pass = slope.is_some_and(|s| s <= cfg.max_slope) && shrinking;
    let detail = format!("floors {floors:?}, {} of {} samples above floor", kept.len(), errors.len());
    Ok((
        DecayReport {
            lemma: "lemma2".into(),
            lambdas: cfg.lambdas.clone(),
            values: errors,
            subtract_log_power: 0,
            slope,
            residual,
            window: Some(Window { lo: f64::NEG_INFINITY, hi: cfg.max_slope }),
            decades: span_decades(&kept.iter().map(|k| k.0).collect::<Vec<_>>()),
            pass,
            detail,
        },
        floors,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma4Config {
    pub cases: usize,
    pub max_attempts: usize,
    pub seed: u64,
    pub n: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub lambda: [f64; 2],
    pub z0_radius: f64,
    pub bumps: RandomBumps,
    pub max_k: usize,
    pub max_delta: f64,
}

impl Default for Lemma4Config {
    fn default() -> Self {
        Lemma4Config {
            cases: 10,
            max_attempts: 40,
            seed: 7,
            n: 2,
            n_r: 12,
            n_theta: 24,
            lambda: [3.0, 10.0],
            z0_radius: 0.4,
            bumps: RandomBumps { count: 2, radius: [0.2, 0.4], amplitude: 1.5 },
            max_k: 4,
            max_delta: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma4Case {
    pub seed: u64,
    pub z0: Complex64,
    pub lambda: f64,
    pub delta: f64,
    /// `||mu - mu_k||_c1` for k = 0..=max_k.
    pub errors: Vec<f64>,
    pub bounds: Vec<f64>,
    pub violations: usize,
    pub monotone: bool,
}

/// Truncation errors of the partial sums against the bound `delta^(k+1) / (1 - delta)`.
pub fn lemma4_cases(cfg: &Lemma4Config) -> Result<Vec<Lemma4Case>> {
    let d = Arc::new(build_disk_domain(1.0, cfg.n_r, cfg.n_theta)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for attempt in 0..cfg.max_attempts {
        if out.len() == cfg.cases {
            break;
        }
        let seed = cfg.seed.wrapping_mul(1000).wrapping_add(attempt as u64);
        let spec = PotentialSpec {
            n: cfg.n,
            seed,
            bumps: vec![],
            random: Some(cfg.bumps.clone()),
            target_c2_bound: None,
            vanish_at_boundary: true,
        };
        let lambda = rng.gen_range(cfg.lambda[0]..=cfg.lambda[1]);
        let (rho, th) = (cfg.z0_radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
        let z0 = Complex64::from_polar(rho, th);
        let v = match generate_potential(&spec, &d) {
            Ok(v) => v,
            Err(Error::PotentialRejected(_)) => continue,
            Err(e) => return Err(e),
        };
        let plan = CauchyPlan::new(&d, z0, Complex64::new(lambda, 0.0), CauchyMethod::Spectral)?;
        let op = MuOperator::new(&plan, &v, Kernel::Standard)?;
        let delta = op.measure_delta()?;
        if delta > cfg.max_delta {
            continue;
        }
        let mu = solve_mu(&v, &plan, MuMethod::Direct, Kernel::Standard)?.mu;
        let chain = neumann_chain(&op, cfg.max_k);
        let mut errors = Vec::new();
        let mut bounds = Vec::new();
        for partial in &chain {
            errors.push(mu.sub(partial).norm(NormKind::C1ZBar)?);
            bounds.push(delta.powi(errors.len() as i32) / (1.0 - delta));
        }
        let violations = errors.iter().zip(&bounds).filter(|(e, b)| e > b).count();
        let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
        out.push(Lemma4Case { seed, z0, lambda, delta, errors, bounds, violations, monotone });
    }
    if out.len() < cfg.cases {
        return Err(Error::InvalidParameter(format!(
            "only {} of {} lemma4 cases had delta <= {}",
            out.len(),
            cfg.cases,
            cfg.max_delta
        )));
    }
    Ok(out)
}

pub fn lemma4_report(cases: &[Lemma4Case]) -> DecayReport {
    let violations: usize = cases.iter().map(|c| c.violations).sum();
    let worst: Vec<f64> = cases
        .iter()
        .map(|c| c.errors.iter().zip(&c.bounds).map(|(e, b)| e / b).fold(0.0, f64::max))
        .collect();
    DecayReport {
        lemma: "lemma4".into(),
        lambdas: cases.iter().map(|c| c.lambda).collect(),
        values: worst,
        subtract_log_power: 0,
        slope: None,
        residual: None,
        window: None,
        decades: 0.0,
        pass: violations == 0,
        detail: format!(
            "{violations} violations over {} cases; monotone in k: {}",
            cases.len(),
            cases.iter().all(|c| c.monotone)
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LemmaSuiteConfig {
    pub decay: DecayConfig,
    pub lemma2: Lemma2Config,
    pub lemma4: Lemma4Config,
}

/// One report per measured quantity, in a fixed order.
pub fn lemma_decay_suite(cfg: &LemmaSuiteConfig) -> Result<Vec<DecayReport>> {
    let samples = cfg.decay.lambdas.iter().map(|&l| decay_sample(&cfg.decay, l)).collect::<Result<Vec<_>>>()?;
    let mut reports = decay_reports(&cfg.decay, &samples)?;
    reports.push(lemma2_report(&cfg.lemma2)?.0);
    reports.push(lemma4_report(&lemma4_cases(&cfg.lemma4)?));
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtnNorm {
    Op,
    Norm1,
}

impl DtnNorm {
    pub fn of(self, a: &DtnMap) -> f64 {
        match self {
            DtnNorm::Op => dtn_op_norm(a),
            DtnNorm::Norm1 => dtn_norm1(a),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRecord {
    pub seed: u64,
    pub t: f64,
    pub epsilon: f64,
    pub norm_kind: DtnNorm,
    pub gamma: f64,
    pub lambda: f64,
    pub sup_error: f64,
    pub model: f64,
    pub layer_delta: Option<f64>,
    pub per_z0_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prop1Config {
    pub potential: PotentialSpec,
    pub alpha: f64,
    /// `layer_delta = log(3 + 1/epsilon)^(-layer_exponent)`.
    pub layer_exponent: f64,
    pub probe_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_r: usize,
    pub n_theta: usize,
    pub gamma: f64,
    /// Amplitudes `2^0, 2^-1, ..., 2^-(steps-1)`.
    pub steps: u32,
    pub potential: PotentialSpec,
    pub probe_radius: f64,
    pub probe_stride: usize,
    pub max_inversions: usize,
    pub min_decades: f64,
    pub min_correlation: f64,
    pub prop1: Prop1Config,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_r: 64,
            n_theta: 128,
            gamma: 1.0 / 18.0,
            steps: 10,
            potential: PotentialSpec {
                bumps: vec![Bump::scalar([0.0, 0.0], 0.15, [60.0, 0.0]), Bump::scalar([0.0, 0.0], 0.3, [-15.0, 0.0])],
                ..PotentialSpec::zero(1)
            },
            probe_radius: 0.5,
            probe_stride: 4,
            max_inversions: 1,
            min_decades: 3.0,
            min_correlation: 0.9,
            prop1: Prop1Config {
                potential: PotentialSpec {
                    bumps: vec![Bump::scalar([0.7, 0.0], 0.6, [1.0, 0.5])],
                    vanish_at_boundary: false,
                    ..PotentialSpec::zero(1)
                },
                alpha: 0.15,
                layer_exponent: 0.15,
                probe_stride: 4,
            },
        }
    }
}

/// `log(3 + 1/e)^(-3/4) * log(3 log(3 + 1/e))^2`.
pub fn theorem1_model(epsilon: f64) -> f64 {
    let l = (3.0 + 1.0 / epsilon).ln();
    l.powf(-0.75) * (3.0 * l).ln().powi(2)
}

pub fn prop1_model(epsilon: f64, alpha: f64) -> f64 {
    (3.0 + 1.0 / epsilon).ln().powf(-alpha)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingCheck {
    /// Adjacent pairs (sorted by epsilon) where the error drops as epsilon grows.
    pub inversions: usize,
    /// RMS log residual of a straight log-log fit of error against epsilon.
    pub fit_residual: f64,
    pub largest_inversion: f64,
    pub pass: bool,
}

/// Error must not decrease as epsilon grows, up to `max_inversions` drops each within the fit residual.
pub fn ordering_check(records: &[StabilityRecord], max_inversions: usize) -> OrderingCheck {
    let mut pts: Vec<(f64, f64)> = records.iter().map(|r| (r.epsilon, r.sup_error)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut inversions = 0;
    let mut largest: f64 = 0.0;
    for w in pts.windows(2) {
        if w[1].1 < w[0].1 {
            inversions += 1;
            largest = largest.max((w[0].1 / w[1].1).ln());
        }
    }
    let ok: Vec<&(f64, f64)> = pts.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
    let fit_residual = if ok.len() >= 2 {
        let x: Vec<f64> = ok.iter().map(|p| p.0.ln()).collect();
        let y: Vec<f64> = ok.iter().map(|p| p.1.ln()).collect();
        least_squares(&x, &y).residual
    } else {
        0.0
    };
    let pass = inversions == 0 || (inversions <= max_inversions && largest <= fit_residual);
    OrderingCheck { inversions, fit_residual, largest_inversion: largest, pass }
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Summary {
    pub records: Vec<StabilityRecord>,
    pub eps_decades: f64,
    pub ordering: OrderingCheck,
    /// Pearson correlation of log error against log model.
    pub correlation: f64,
    pub correlation_raw: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop1Summary {
    pub records: Vec<StabilityRecord>,
    pub alpha: f64,
    pub ordering: OrderingCheck,
    /// Nonnegative fit `error ~ k1 * interior_term + k2 * boundary_term`.
    pub kappa: [f64; 2],
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub theorem1: Theorem1Summary,
    pub prop1: Prop1Summary,
}

fn ladder(steps: u32) -> Vec<f64> {
    (0..steps).map(|k| 2f64.powi(-(k as i32))).collect()
}

fn probe_cells(d: &DomainGrid, r_max: f64, stride: usize) -> Vec<usize> {
    (0..d.len()).filter(|&c| d.center(c).norm() <= r_max).step_by(stride.max(1)).collect()
}

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Main sweep: DtN data against the zero reference, operator norm for epsilon.
pub fn theorem1_sweep(cfg: &SweepConfig) -> Result<Theorem1Summary> {
    let d = Arc::new(build_disk_domain(1.0, cfg.n_r, cfg.n_theta)?);
    let l = max_boundary_distance(&d);
    let w = generate_potential(&cfg.potential, &d)?;
    let phi0 = assemble_dtn(&MatrixField::zeros(&d, cfg.potential.n))?;
    let cells = probe_cells(&d, cfg.probe_radius, cfg.probe_stride);
    let mut records = Vec::new();
    for t in ladder(cfg.steps) {
        let v = w.scale(Complex64::new(t, 0.0));
        let phi = ForwardSolver::new(&v)?.assemble_dtn()?;
        let epsilon = dtn_op_norm(&phi.sub(&phi0)?);
        let lambda = lambda_schedule(epsilon, cfg.gamma, l)?;
        let per: Vec<f64> = cells
            .iter()
            .map(|&c| {
                let r = reconstruct_from_dtn(&phi, &phi0, d.center(c), Complex64::new(lambda, 0.0))?;
                Ok(max_entry(&(r - v.matrix(c))))
            })
            .collect::<Result<_>>()?;
        records.push(StabilityRecord {
            seed: cfg.potential.seed,
            t,
            epsilon,
            norm_kind: DtnNorm::Op,
            gamma: cfg.gamma,
            lambda,
            sup_error: per.iter().copied().fold(0.0, f64::max),
            model: theorem1_model(epsilon),
            layer_delta: None,
            per_z0_errors: per,
        });
    }
    records.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    let eps_decades = span_decades(&eps);
    let ordering = ordering_check(&records, cfg.max_inversions);
    let le: Vec<f64> = records.iter().map(|r| r.sup_error.ln()).collect();
    let lm: Vec<f64> = records.iter().map(|r| r.model.ln()).collect();
    let correlation = pearson(&le, &lm);
    let correlation_raw = pearson(
        &records.iter().map(|r| r.sup_error).collect::<Vec<_>>(),
        &records.iter().map(|r| r.model).collect::<Vec<_>>(),
    );
    let pass = eps_decades >= cfg.min_decades && ordering.pass && correlation >= cfg.min_correlation;
    Ok(Theorem1Summary { records, eps_decades, ordering, correlation, correlation_raw, pass })
}

/// Nonnegative least squares with two columns, by checking the active sets.
fn nnls2(a: &[[f64; 2]], b: &[f64]) -> [f64; 2] {
    let dot = |i: usize, j: usize| a.iter().map(|r| r[i] * r[j]).sum::<f64>();
    let rhs = |i: usize| a.iter().zip(b).map(|(r, y)| r[i] * y).sum::<f64>();
    let cost = |k: [f64; 2]| a.iter().zip(b).map(|(r, y)| (r[0] * k[0] + r[1] * k[1] - y).powi(2)).sum::<f64>();
    let mut cands = vec![[0.0, 0.0]];
    let (a00, a01, a11) = (dot(0, 0), dot(0, 1), dot(1, 1));
    let det = a00 * a11 - a01 * a01;
    if det.abs() > 1e-300 {
        let k0 = (rhs(0) * a11 - rhs(1) * a01) / det;
        let k1 = (rhs(1) * a00 - rhs(0) * a01) / det;
        if k0 >= 0.0 && k1 >= 0.0 {
            cands.push([k0, k1]);
        }
    }
    if a00 > 0.0 {
        cands.push([(rhs(0) / a00).max(0.0), 0.0]);
    }
    if a11 > 0.0 {
        cands.push([0.0, (rhs(1) / a11).max(0.0)]);
    }
    cands.into_iter().min_by(|x, y| cost(*x).total_cmp(&cost(*y))).unwrap_or([0.0, 0.0])
}

/// Weak-norm variant: kernel norm for epsilon, potentials that need not vanish on the wall.
pub fn prop1_sweep(cfg: &SweepConfig) -> Result<Prop1Summary> {
    let p = &cfg.prop1;
    let d = Arc::new(build_disk_domain(1.0, cfg.n_r, cfg.n_theta)?);
    let l = max_boundary_distance(&d);
    let w = generate_potential(&p.potential, &d)?;
    let phi0 = assemble_dtn(&MatrixField::zeros(&d, p.potential.n))?;
    let base = CauchyPlan::new(&d, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), CauchyMethod::Spectral)?;
    let mut records = Vec::new();
    let mut design = Vec::new();
    for t in ladder(cfg.steps) {
        let v = w.scale(Complex64::new(t, 0.0));
        let phi = ForwardSolver::new(&v)?.assemble_dtn()?;
        let epsilon = dtn_norm1(&phi.sub(&phi0)?);
        let lambda = lambda_schedule(epsilon, cfg.gamma, l)?;
        let layer = (3.0 + 1.0 / epsilon).ln().powf(-p.layer_exponent);
        let cells = probe_cells(&d, d.radius - layer, p.probe_stride);
        let mut per = Vec::with_capacity(cells.len());
        let mut terms = [0.0f64; 2];
        for &c in &cells {
            let plan = base.retarget(d.center(c), Complex64::new(lambda, 0.0));
            let rep = reconstruct_boundary_layer(&v, &plan, layer)?;
            per.push(max_entry(&(rep.value - v.matrix(c))));
            terms = [rep.interior_term, rep.boundary_term];
        }
        let sup_error = per.iter().copied().fold(0.0, f64::max);
        design.push(terms);
        records.push(StabilityRecord {
            seed: p.potential.seed,
            t,
            epsilon,
            norm_kind: DtnNorm::Norm1,
            gamma: cfg.gamma,
            lambda,
            sup_error,
            model: prop1_model(epsilon, p.alpha),
            layer_delta: Some(layer),
            per_z0_errors: per,
        });
    }
    let errs: Vec<f64> = records.iter().map(|r| r.sup_error).collect();
    let kappa = nnls2(&design, &errs);
    records.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let ordering = ordering_check(&records, cfg.max_inversions);
    let pass = ordering.pass;
    Ok(Prop1Summary { records, alpha: p.alpha, ordering, kappa, pass })
}

pub fn stability_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    Ok(SweepReport { theorem1: theorem1_sweep(cfg)?, prop1: prop1_sweep(cfg)? })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransposeReport {
    pub dimension: usize,
    /// Max entry of `S(v^T) - S(v)^T` for the symmetrized interior operators.
    pub max_matrix_deviation: f64,
    /// Hausdorff distance between the two computed spectra.
    pub max_eigenvalue_deviation: f64,
    pub spectral_radius: f64,
    pub relative_deviation: f64,
}

fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one = |x: &[Complex64], y: &[Complex64]| {
        x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

pub fn transpose_spectrum_check(v: &MatrixField) -> Result<TransposeReport> {
    let s = ForwardSolver::new(v)?.symmetrized_dense();
    let st = ForwardSolver::new(&v.transpose())?.symmetrized_dense();
    let max_matrix_deviation = (&st - s.transpose()).iter().map(|x| x.norm()).fold(0.0, f64::max);
    let dimension = s.nrows();
    let ev = |m: nalgebra::DMatrix<Complex64>| -> Result<Vec<Complex64>> {
        m.schur().eigenvalues().map(|e| e.iter().copied().collect()).ok_or(Error::NoConvergence(0))
    };
    let (ea, eb) = (ev(s)?, ev(st)?);
    let max_eigenvalue_deviation = hausdorff(&ea, &eb);
    let spectral_radius = ea.iter().map(|x| x.norm()).fold(0.0, f64::max);
    Ok(TransposeReport {
        dimension,
        max_matrix_deviation,
        max_eigenvalue_deviation,
        spectral_radius,
        relative_deviation: max_eigenvalue_deviation / spectral_radius.max(f64::MIN_POSITIVE),
    })
}
