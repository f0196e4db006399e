//! Config handling and commands behind the `bukhgeim` binary.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

pub use config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Dtn,
    Mu,
    Reconstruct,
    IdentityCheck,
    Lemmas,
    Sweep,
}

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED_CHECK: i32 = 2;

/// Reads, resolves and applies overrides; schema errors surface here.
pub fn load_config(path: &Path, ov: &Overrides) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    if let Some(dir) = &ov.output {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = ov.seed {
        cfg.apply_seed(seed);
    } else if let Some(seed) = cfg.seed {
        cfg.apply_seed(seed);
    }
    Ok(cfg)
}

/// Schema and semantic diagnostics; empty when the file is usable.
pub fn validate_config(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return Ok(vec![e.to_string().trim().to_string()]),
    };
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg.diagnostics())
}

pub fn run(command: Command, cfg: &RunConfig) -> anyhow::Result<commands::Outcome> {
    let out = cfg.output.dir.as_path();
    match command {
        Command::Forward => commands::forward(cfg, out),
        Command::Dtn => commands::dtn(cfg, out),
        Command::Mu => commands::mu(cfg, out),
        Command::Reconstruct => commands::reconstruct(cfg, out),
        Command::IdentityCheck => commands::identity(cfg, out),
        Command::Lemmas => commands::lemmas(cfg, out),
        Command::Sweep => commands::sweep(cfg, out),
    }
}
