use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use bukhgeim_core::cauchy::CauchyPlan;
use bukhgeim_core::field::{CMat, MatrixField};
use bukhgeim_core::forward::{assemble_dtn, BoundaryTrace, DtnMap, ForwardSolver, SpectrumReport, DEFAULT_SPECTRUM_THRESHOLD};
use bukhgeim_core::grid::{build_disk_domain, DomainGrid};
use bukhgeim_core::lab::{generate_potential, lemma_decay_suite, stability_sweep, DecayReport, PotentialSpec, StabilityRecord};
use bukhgeim_core::mu::{h_functional, mu_pde_residual, psi_pde_residual, solve_mu, HValue, Kernel, MuMethod, MuSolution};
use bukhgeim_core::recon::{identity_check, reconstruction_report, IdentityCheckReport, MISMATCH_FLOOR};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{write_atomic, write_json};

/// What a command produced and whether all of its pass flags hold.
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub pass: bool,
}

fn cx(a: [f64; 2]) -> Complex64 {
    Complex64::new(a[0], a[1])
}

fn domain(cfg: &RunConfig) -> anyhow::Result<Arc<DomainGrid>> {
    let d = &cfg.domain;
    Ok(Arc::new(build_disk_domain(d.radius, d.n_r, d.n_theta)?))
}

fn potential(spec: &PotentialSpec, d: &Arc<DomainGrid>) -> anyhow::Result<MatrixField> {
    Ok(generate_potential(spec, d)?)
}

#[derive(Serialize)]
struct ModeResponse {
    k: i32,
    /// `<Phi f, f> / <f, f>` for `f = exp(i k theta) I`.
    symbol: f64,
    symbol_imag: f64,
}

#[derive(Serialize)]
struct ForwardReport {
    n: usize,
    n_r: usize,
    n_theta: usize,
    spectrum: SpectrumReport,
    modes: Vec<ModeResponse>,
    pass: bool,
}

pub fn forward(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let d = domain(cfg)?;
    let v = potential(&cfg.potential, &d)?;
    let solver = ForwardSolver::new(&v)?;
    let spectrum = solver.spectrum(DEFAULT_SPECTRUM_THRESHOLD)?;
    let n = v.n();
    let mut modes = Vec::new();
    for &k in &cfg.forward.modes {
        let f = BoundaryTrace::from_fn(&d, n, |z| CMat::identity(n, n) * Complex64::new(0.0, k as f64 * z.arg()).exp());
        let psi = solver.solve(&f)?;
        let df = solver.normal_derivative(&f, &psi);
        let num: Complex64 = df.values.iter().zip(&f.values).map(|(a, b)| a * b.conj()).sum();
        let den: f64 = f.values.iter().map(|b| b.norm_sqr()).sum();
        modes.push(ModeResponse { k, symbol: num.re / den, symbol_imag: num.im / den });
    }
    let report = ForwardReport { n, n_r: d.n_r, n_theta: d.n_theta, pass: spectrum.passes, spectrum, modes };
    let path = out.join("forward.json");
    write_json(&path, &report)?;
    Ok(Outcome { artifacts: vec![path], pass: report.pass })
}

pub fn dtn(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let d = domain(cfg)?;
    let v = potential(&cfg.potential, &d)?;
    let v0 = potential(&cfg.reference, &d)?;
    let a = out.join("dtn.json");
    let b = out.join("dtn_reference.json");
    write_json(&a, &assemble_dtn(&v)?)?;
    write_json(&b, &assemble_dtn(&v0)?)?;
    Ok(Outcome { artifacts: vec![a, b], pass: true })
}

#[derive(Serialize)]
struct MuReport {
    solution: MuSolution,
    h: HValue,
    psi_residual: f64,
    mu_residual: f64,
    pass: bool,
}

pub fn mu(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let d = domain(cfg)?;
    let v = potential(&cfg.potential, &d)?;
    let m = &cfg.mu;
    let plan = CauchyPlan::new(&d, cx(m.z0), cx(m.lambda), m.cauchy)?;
    let method = m.neumann_order.map_or(MuMethod::Direct, MuMethod::Neumann);
    let solution = solve_mu(&v, &plan, method, Kernel::Standard)?;
    let h = h_functional(&v, &solution, &plan)?;
    let psi_residual = psi_pde_residual(&v, &solution, m.residual_radius)?;
    let mu_residual = mu_pde_residual(&v, &solution, m.residual_radius)?;
    let pass = solution.residual <= m.max_residual;
    let path = out.join("mu.json");
    write_json(&path, &MuReport { solution, h, psi_residual, mu_residual, pass })?;
    Ok(Outcome { artifacts: vec![path], pass })
}

fn load_dtn(path: &Path) -> anyhow::Result<DtnMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let map: DtnMap = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    map.check_shape().with_context(|| format!("{} has inconsistent array lengths", path.display()))?;
    Ok(map)
}

pub fn reconstruct(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let d = domain(cfg)?;
    let v = potential(&cfg.potential, &d)?;
    let r = &cfg.reconstruct;
    let phi = match &r.dtn {
        Some(p) => load_dtn(p)?,
        None => assemble_dtn(&v)?,
    };
    let phi0 = match &r.reference_dtn {
        Some(p) => load_dtn(p)?,
        None => assemble_dtn(&potential(&cfg.reference, &d)?)?,
    };
    if phi.m != d.n_theta || phi0.m != d.n_theta || phi.n != v.n() || phi0.n != v.n() {
        bail!("DtN maps do not match the configured grid ({} boundary nodes, n = {})", d.n_theta, v.n());
    }
    let cells: Vec<usize> =
        (0..d.len()).filter(|&c| d.center(c).norm() <= r.probe_radius).step_by(r.probe_stride).collect();
    // errors are only meaningful when the maps were built from the configured potential
    let truth = if r.dtn.is_none() { Some(&v) } else { None };
    let report = reconstruction_report(&phi, &phi0, &d, &cells, r.lambda, "fixed", truth)?;
    let pass = match (r.max_error, report.sup_error) {
        (Some(max), Some(e)) => e <= max,
        _ => true,
    };
    let json = out.join("reconstruction.json");
    write_json(&json, &report)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["z0_re", "z0_im", "error"])?;
    for (i, z) in report.z0.iter().enumerate() {
        let e = report.per_point_error.as_ref().map_or(String::new(), |p| p[i].to_string());
        w.write_record([z.re.to_string(), z.im.to_string(), e])?;
    }
    let table = out.join("reconstruction_errors.csv");
    write_atomic(&table, &w.into_inner()?)?;
    Ok(Outcome { artifacts: vec![json, table], pass })
}

#[derive(Serialize)]
struct IdentityOutput {
    #[serde(flatten)]
    report: IdentityCheckReport,
    floor: f64,
    max_mismatch: f64,
    pass: bool,
}

pub fn identity(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let d = domain(cfg)?;
    let v1 = potential(&cfg.reference, &d)?;
    let v2 = potential(&cfg.potential, &d)?;
    let c = &cfg.identity;
    let report = identity_check(&v1, &v2, cx(c.z0), cx(c.lambda))?;
    let pass = report.relative_mismatch <= c.max_mismatch;
    let path = out.join("identity.json");
    write_json(&path, &IdentityOutput { report, floor: MISMATCH_FLOOR, max_mismatch: c.max_mismatch, pass })?;
    Ok(Outcome { artifacts: vec![path], pass })
}

pub fn lemmas(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let reports: Vec<DecayReport> = lemma_decay_suite(&cfg.lemmas)?;
    for r in &reports {
        eprintln!("{:<8} slope {:>8} {}", r.lemma, r.slope.map_or("-".into(), |s| format!("{s:.3}")), if r.pass { "pass" } else { "FAIL" });
    }
    let pass = reports.iter().all(|r| r.pass);
    let path = out.join("decay_report.json");
    write_json(&path, &reports)?;
    Ok(Outcome { artifacts: vec![path], pass })
}

/// Sweep table; identical inputs give identical bytes.
pub fn sweep_csv(records: &[&StabilityRecord]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "t", "epsilon", "norm_kind", "gamma", "lambda", "sup_error", "model", "layer_delta"])?;
    for r in records {
        let kind = match r.norm_kind {
            bukhgeim_core::lab::DtnNorm::Op => "op",
            bukhgeim_core::lab::DtnNorm::Norm1 => "norm1",
        };
        w.write_record([
            r.seed.to_string(),
            r.t.to_string(),
            r.epsilon.to_string(),
            kind.to_string(),
            r.gamma.to_string(),
            r.lambda.to_string(),
            r.sup_error.to_string(),
            r.model.to_string(),
            r.layer_delta.map_or(String::new(), |x| x.to_string()),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let report = stability_sweep(&cfg.sweep)?;
    let records: Vec<&StabilityRecord> = report.theorem1.records.iter().chain(&report.prop1.records).collect();
    let table = out.join("sweep.csv");
    write_atomic(&table, &sweep_csv(&records)?)?;
    let summary = out.join("sweep_summary.json");
    write_json(&summary, &report)?;
    let pass = report.theorem1.pass && report.prop1.pass;
    Ok(Outcome { artifacts: vec![table, summary], pass })
}
