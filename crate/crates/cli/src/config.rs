use std::path::{Path, PathBuf};

use bukhgeim_core::cauchy::CauchyMethod;
use bukhgeim_core::lab::{Bump, Cx, LemmaSuiteConfig, PotentialSpec, SweepConfig, Window};
use serde::{Deserialize, Serialize};

/// Diameter of the unit disk used by the sweeps; enters the gamma bound.
pub const SWEEP_DIAMETER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub radius: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths resolve against the config file's directory.
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardConfig {
    /// Boundary data `exp(i k theta) I` for each listed k.
    pub modes: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuConfig {
    pub z0: Cx,
    pub lambda: Cx,
    pub cauchy: CauchyMethod,
    /// Truncated Neumann series of this order; full solve when absent.
    #[serde(default)]
    pub neumann_order: Option<usize>,
    /// Radius of the disk on which PDE residuals are measured.
    pub residual_radius: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub lambda: f64,
    pub probe_radius: f64,
    pub probe_stride: usize,
    /// DtN map of the potential; assembled from `[potential]` when absent.
    #[serde(default)]
    pub dtn: Option<PathBuf>,
    /// DtN map of the reference; assembled from `[reference]` when absent.
    #[serde(default)]
    pub reference_dtn: Option<PathBuf>,
    #[serde(default)]
    pub max_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub z0: Cx,
    pub lambda: Cx,
    pub max_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every potential seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
    pub domain: DomainConfig,
    pub output: OutputConfig,
    pub potential: PotentialSpec,
    pub reference: PotentialSpec,
    pub forward: ForwardConfig,
    pub mu: MuConfig,
    pub reconstruct: ReconstructConfig,
    pub identity: IdentityConfig,
    pub lemmas: LemmaSuiteConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            domain: DomainConfig { radius: 1.0, n_r: 32, n_theta: 64 },
            output: OutputConfig { dir: PathBuf::from("out") },
            potential: PotentialSpec {
                bumps: vec![Bump {
                    center: [0.1, 0.0],
                    radius: 0.5,
                    amplitude: vec![[1.0, 0.0], [0.5, 0.0], [0.2, 0.0], [1.5, 0.0]],
                }],
                ..PotentialSpec::zero(2)
            },
            reference: PotentialSpec::zero(2),
            forward: ForwardConfig { modes: vec![0, 1, 2, 4, 8] },
            mu: MuConfig {
                z0: [0.1, 0.0],
                lambda: [4.0, 0.0],
                cauchy: CauchyMethod::Spectral,
                neumann_order: None,
                residual_radius: 0.5,
                max_residual: 1e-8,
            },
            reconstruct: ReconstructConfig {
                lambda: 3.0,
                probe_radius: 0.5,
                probe_stride: 8,
                dtn: None,
                reference_dtn: None,
                max_error: None,
            },
            identity: IdentityConfig { z0: [0.1, -0.1], lambda: [3.0, 1.0], max_mismatch: 0.02 },
            lemmas: LemmaSuiteConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, toml::de::Error> {
        toml::from_str(text)
    }

    /// Applies `seed` to every potential.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        for p in [
            &mut self.potential,
            &mut self.reference,
            &mut self.sweep.potential,
            &mut self.sweep.prop1.potential,
        ] {
            p.seed = seed;
        }
        self.lemmas.lemma4.seed = seed;
    }

    /// Relative paths are taken from `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output.dir);
        if let Some(p) = self.reconstruct.dtn.as_mut() {
            fix(p);
        }
        if let Some(p) = self.reconstruct.reference_dtn.as_mut() {
            fix(p);
        }
    }

    /// Semantic problems the schema cannot express. Paths are expected to be resolved.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let d = &self.domain;
        if !(d.radius > 0.0 && d.radius.is_finite()) {
            out.push(format!("domain.radius = {} must be positive", d.radius));
        }
        if d.n_r < 3 {
            out.push(format!("domain.n_r = {} must be at least 3", d.n_r));
        }
        for (key, nt) in [("domain.n_theta", d.n_theta), ("sweep.n_theta", self.sweep.n_theta)] {
            if nt < 4 {
                out.push(format!("{key} = {nt} must be at least 4"));
            } else if nt % 2 == 1 {
                out.push(format!("{key} = {nt} is odd; the kernel norm needs antipodal boundary pairs"));
            }
        }
        if self.sweep.n_r < 3 {
            out.push(format!("sweep.n_r = {} must be at least 3", self.sweep.n_r));
        }
        let l = SWEEP_DIAMETER;
        let bound = 1.0 / (2.0 * l * l + 1.0);
        let g = self.sweep.gamma;
        if !(g > 0.0 && g < bound) {
            out.push(format!("sweep.gamma = {g} violates 0 < gamma < 1/(2L^2+1) = {bound:.6} with L = {l}"));
        }
        if self.sweep.steps < 2 {
            out.push("sweep.steps must be at least 2".into());
        }
        let a = self.sweep.prop1.alpha;
        if !(a > 0.0 && a < 0.2) {
            out.push(format!("sweep.prop1.alpha = {a} must lie in (0, 1/5)"));
        }
        for (key, p) in [
            ("potential", &self.potential),
            ("reference", &self.reference),
            ("sweep.potential", &self.sweep.potential),
            ("sweep.prop1.potential", &self.sweep.prop1.potential),
        ] {
            if p.n == 0 {
                out.push(format!("{key}.n must be at least 1"));
            }
            for (i, b) in p.bumps.iter().enumerate() {
                if b.amplitude.len() != 1 && b.amplitude.len() != p.n * p.n {
                    out.push(format!("{key}.bumps[{i}] has {} amplitude entries, expected 1 or {}", b.amplitude.len(), p.n * p.n));
                }
                if !(b.radius > 0.0) {
                    out.push(format!("{key}.bumps[{i}].radius must be positive"));
                }
            }
        }
        if self.reference.n != self.potential.n {
            out.push(format!("reference.n = {} differs from potential.n = {}", self.reference.n, self.potential.n));
        }
        if !(self.mu.residual_radius > 0.0 && self.mu.residual_radius <= d.radius) {
            out.push(format!("mu.residual_radius = {} must lie in (0, domain.radius]", self.mu.residual_radius));
        }
        if self.reconstruct.probe_stride == 0 || self.sweep.probe_stride == 0 || self.sweep.prop1.probe_stride == 0 {
            out.push("probe strides must be at least 1".into());
        }
        for (key, p) in [("reconstruct.dtn", &self.reconstruct.dtn), ("reconstruct.reference_dtn", &self.reconstruct.reference_dtn)] {
            if let Some(p) = p {
                if !p.is_file() {
                    out.push(format!("{key} = {} does not exist", p.display()));
                }
            }
        }
        let dc = &self.lemmas.decay;
        let windows: [(&str, &Window); 7] = [
            ("lemma1", &dc.lemma1),
            ("lemma3", &dc.lemma3),
            ("lemma5", &dc.lemma5),
            ("lemma6", &dc.lemma6),
            ("i2", &dc.i2),
            ("i3", &dc.i3),
            ("i4", &dc.i4),
        ];
        for (key, w) in windows {
            if !(w.lo < w.hi) {
                out.push(format!("lemmas.decay.{key}: window lo = {} is not below hi = {}", w.lo, w.hi));
            }
        }
        if dc.lambdas.len() < 6 || self.lemmas.lemma2.lambdas.len() < 6 {
            out.push("decay fits need at least 6 lambda values".into());
        }
        if self.lemmas.lemma2.levels.len() < 2 {
            out.push("lemmas.lemma2.levels needs at least two refinement levels".into());
        }
        out
    }
}
