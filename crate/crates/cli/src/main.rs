use std::path::PathBuf;
use std::process::ExitCode;

use bukhgeim_cli::{load_config, run, validate_config, Command, Overrides, EXIT_FAILED_CHECK, EXIT_OK, EXIT_USAGE};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bukhgeim", version, about = "DtN maps, Faddeev-type solutions and stationary-phase reconstruction on the disk")]
struct Cli {
    #[command(subcommand)]
    action: Action,
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for every potential (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Action {
    /// Run a command against a config file.
    #[command(flatten)]
    Run(RunAction),
    /// List config problems without running anything.
    Validate { config: PathBuf },
}

#[derive(Subcommand)]
enum RunAction {
    /// Spectrum check and per-mode DtN response of the potential.
    Forward { config: PathBuf },
    /// Write the DtN maps of the potential and the reference.
    Dtn { config: PathBuf },
    /// Solve for mu at one (z0, lambda) and report residuals.
    Mu { config: PathBuf },
    /// Pointwise reconstruction from two DtN maps.
    Reconstruct { config: PathBuf },
    /// Compare both sides of the boundary identity for two potentials.
    IdentityCheck { config: PathBuf },
    /// Decay-rate fits in lambda.
    Lemmas { config: PathBuf },
    /// Stability sweep over an amplitude ladder.
    Sweep { config: PathBuf },
}

impl RunAction {
    fn split(self) -> (Command, PathBuf) {
        match self {
            RunAction::Forward { config } => (Command::Forward, config),
            RunAction::Dtn { config } => (Command::Dtn, config),
            RunAction::Mu { config } => (Command::Mu, config),
            RunAction::Reconstruct { config } => (Command::Reconstruct, config),
            RunAction::IdentityCheck { config } => (Command::IdentityCheck, config),
            RunAction::Lemmas { config } => (Command::Lemmas, config),
            RunAction::Sweep { config } => (Command::Sweep, config),
        }
    }
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return code(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: --jobs must be a positive thread count");
            return code(EXIT_USAGE);
        }
    }
    match cli.action {
        Action::Validate { config } => match validate_config(&config) {
            Ok(diags) if diags.is_empty() => {
                println!("ok");
                code(EXIT_OK)
            }
            Ok(diags) => {
                for d in diags {
                    println!("{}: {d}", config.display());
                }
                code(EXIT_USAGE)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                code(EXIT_USAGE)
            }
        },
        Action::Run(action) => {
            let (command, path) = action.split();
            let ov = Overrides { output: cli.output, seed: cli.seed };
            let cfg = match load_config(&path, &ov) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return code(EXIT_USAGE);
                }
            };
            let diags = cfg.diagnostics();
            if !diags.is_empty() {
                for d in diags {
                    eprintln!("{}: {d}", path.display());
                }
                return code(EXIT_USAGE);
            }
            match run(command, &cfg) {
                Ok(outcome) => {
                    for a in &outcome.artifacts {
                        println!("{}", a.display());
                    }
                    code(if outcome.pass { EXIT_OK } else { EXIT_FAILED_CHECK })
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    code(EXIT_USAGE)
                }
            }
        }
    }
}
