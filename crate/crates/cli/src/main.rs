//! `eit-mono`: batch front-end for the monotonicity toolkit.
//!
//! Exit status: 0 on success, 2 when the config or a method precondition is
//! rejected, 3 when a solve or an output write fails.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eit_mono::mono::{Method, OneSided};

use config::{MeshSpec, RunConfig, Setup, ToleranceSpec};
use output::RunDir;

#[derive(Parser, Debug)]
#[command(name = "eit-mono", version, about = "Monotonicity-based inclusion detection on P1 finite elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run config; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (overrides `output_dir`).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(short, long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Mesh size for generated meshes.
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long, global = true, value_parser = parse_one_sided)]
    one_sided: Option<OneSided>,
    /// Fixed test tolerance.
    #[arg(long, global = true, conflicts_with = "calibrate")]
    tol: Option<f64>,
    /// Calibrate the tolerance on background data with this safety factor.
    #[arg(long, global = true)]
    calibrate: Option<f64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Mesh JSON, Γ edges and a summary.
    Mesh,
    /// Coefficient fields, D and M masks, bound and hypothesis checks.
    Phantom,
    /// Forward solves for the configured currents.
    Forward,
    /// ND matrices and spectra for A_D and A₀.
    Ndmap,
    /// One inclusion test for `test_inclusion`.
    Test,
    /// Candidate sweep and reconstruction mask.
    Reconstruct,
    /// Localized potential for the configured U and B.
    Locpot,
    /// Numerical checks of the monotonicity inequalities.
    Verify,
    /// mesh, phantom, ndmap and reconstruct into one run directory.
    Pipeline,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: eit_mono::Error| e.to_string())
}

fn parse_one_sided(s: &str) -> Result<OneSided, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown side `{s}`"))
}

/// Failure class, mapped to the exit status.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    pub fn from_core(e: eit_mono::Error) -> Self {
        use eit_mono::Error as E;
        match e {
            E::Mesh(_) | E::EmptyGamma | E::Coefficient(_) | E::Dimension { .. } | E::Parse(_) | E::Json(_) => {
                Failure::Validation(e.into())
            }
            _ => Failure::Solver(e.into()),
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

pub trait Classify<T> {
    fn core(self) -> Result<T, Failure>;
}

impl<T> Classify<T> for eit_mono::Result<T> {
    fn core(self) -> Result<T, Failure> {
        self.map_err(Failure::from_core)
    }
}

pub trait Io<T> {
    fn io(self) -> Result<T, Failure>;
}

impl<T> Io<T> for anyhow::Result<T> {
    fn io(self) -> Result<T, Failure> {
        self.map_err(Failure::Solver)
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) -> Result<(), Failure> {
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(h) = cli.h {
        match &mut cfg.mesh {
            MeshSpec::Generate { h: mh, .. } => *mh = h,
            MeshSpec::File(_) => {
                return Err(Failure::Validation(anyhow::anyhow!("config: --h given but the mesh is read from a file")))
            }
        }
    }
    if let Some(m) = cli.method {
        cfg.method = m;
    }
    if let Some(s) = cli.one_sided {
        cfg.one_sided = s;
    }
    if let Some(t) = cli.tol {
        cfg.tolerance = ToleranceSpec::Fixed(t);
    }
    if let Some(f) = cli.calibrate {
        cfg.tolerance = ToleranceSpec::Calibrated { factor: f };
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_overrides(cli, &mut cfg)?;
    cfg.validate().map_err(Failure::Validation)?;
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Validation(anyhow::anyhow!("config: --jobs must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Solver(e.into()))?;
    }
    // the run directory is not part of the hashed config, so moving a run
    // does not change its manifest
    let mut hashed = cfg.clone();
    hashed.output_dir = PathBuf::new();
    let config_text = serde_json::to_string_pretty(&hashed).map_err(|e| Failure::Solver(e.into()))?;

    let setup = Setup::build(&cfg)?;
    log::info!(
        "mesh: {} nodes, {} triangles, Γ with {} edges",
        setup.mesh.n_nodes(),
        setup.mesh.n_triangles(),
        setup.gamma.len()
    );
    let mut out = RunDir::create(&cfg.output_dir).io()?;
    out.write("config.json", &(config_text.clone() + "\n")).io()?;
    match cli.command {
        Command::Mesh => commands::mesh(&cfg, &setup, &mut out)?,
        Command::Phantom => commands::phantom(&cfg, &setup, &mut out)?,
        Command::Forward => commands::forward(&cfg, &setup, &mut out)?,
        Command::Ndmap => commands::ndmap(&cfg, &setup, &mut out)?,
        Command::Test => commands::test(&cfg, &setup, &mut out)?,
        Command::Reconstruct => commands::reconstruct_cmd(&cfg, &setup, &mut out)?,
        Command::Locpot => commands::locpot(&cfg, &setup, &mut out)?,
        Command::Verify => commands::verify(&cfg, &setup, &mut out)?,
        Command::Pipeline => {
            setup.validate_method(cfg.method).map_err(Failure::Validation)?;
            commands::mesh(&cfg, &setup, &mut out)?;
            commands::phantom(&cfg, &setup, &mut out)?;
            commands::ndmap(&cfg, &setup, &mut out)?;
            commands::reconstruct_cmd(&cfg, &setup, &mut out)?;
        }
    }
    let name = format!("{:?}", cli.command).to_lowercase();
    out.finish(&name, cfg.seed, &config_text).io()?;
    eprintln!("{name}: outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, e) = match &f {
                Failure::Validation(e) => ("validation", e),
                Failure::Solver(e) => ("solver", e),
            };
            eprintln!("error ({kind}): {e:#}");
            ExitCode::from(f.code())
        }
    }
}
