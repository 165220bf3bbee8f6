//! `chandra`: a radial laboratory for the relativistic Chandrasekhar
//! energy. Subcommands solve the Lane-Emden limit profile, minimize the
//! energy at fixed mass, sweep couplings toward the collapse threshold,
//! and audit the numerical kernels; every run leaves a manifest so it can
//! be reproduced bit for bit.

mod check;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chandra_core::ChandraError;
use config::{RunConfig, SweepMode};

/// Command failure with its process exit code: 1 io, 2 usage, 3 solver
/// non-convergence, 4 property/gate failure.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Gate(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Gate(_) => 4,
        }
    }
}

impl From<ChandraError> for Failure {
    fn from(e: ChandraError) -> Self {
        match e {
            ChandraError::Structure(_)
            | ChandraError::Domain(_)
            | ChandraError::GridConstruction(_)
            | ChandraError::Supercritical(_) => Failure::Usage(e.to_string()),
            ChandraError::SolverFailure(_)
            | ChandraError::ProfileConstruction(_)
            | ChandraError::MuBracket(_)
            | ChandraError::DomainTooSmall(_) => Failure::Solver(e.to_string()),
            ChandraError::Fit(_) => Failure::Gate(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "chandra",
    version,
    about = "Radial laboratory for the relativistic Chandrasekhar energy"
)]
struct Cli {
    /// Flat key=value config file; command-line flags override its entries
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ModelArgs {
    /// Spin degeneracy (positive integer)
    #[arg(long)]
    q: Option<u32>,

    /// Particle mass
    #[arg(long)]
    m: Option<f64>,

    /// Number of radial grid nodes
    #[arg(long)]
    grid_n: Option<usize>,

    /// Truncation radius of the grid
    #[arg(long)]
    rmax: Option<f64>,
}

#[derive(Args)]
struct WellArgs {
    /// External-well strength; setting it switches the well on
    #[arg(long)]
    z: Option<f64>,

    /// External-well decay exponent, in (0, 3/4)
    #[arg(long)]
    s: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print and save the model constants (K_cl, sigma_f, tau_c, xi1, ...)
    Constants {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Output directory (default: $CHANDRA_OUT_DIR/constants)
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Solve the limit profile; emit its constants, moments, and CSV
    LaneEmden {
        #[command(flatten)]
        model: ModelArgs,
        /// Output directory (default: $CHANDRA_OUT_DIR/lane-emden)
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Minimize the energy at fixed mass and coupling
    Minimize {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Coupling tau (absolute)
        #[arg(long, conflicts_with = "tau_frac")]
        tau: Option<f64>,
        /// Coupling as a fraction of tau_c
        #[arg(long)]
        tau_frac: Option<f64>,
        /// Constraint mass
        #[arg(long)]
        mass: Option<f64>,
        /// Output directory (default: $CHANDRA_OUT_DIR/minimize)
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Ladder sweep toward tau_c with power-law fits of the collapse
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Sweep target: free space or the external well
        #[arg(long, value_enum)]
        mode: Option<SweepMode>,
        /// Comma-separated ladder of tau_c - tau values, decreasing
        #[arg(long)]
        ladder: Option<String>,
        /// Number of largest ladder points excluded from fits
        #[arg(long)]
        fit_window: Option<usize>,
        /// Output directory (default: $CHANDRA_OUT_DIR/sweep)
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Run the structural property suite and report PASS/FAIL per property
    Check {
        #[command(flatten)]
        model: ModelArgs,
        /// Output directory (default: $CHANDRA_OUT_DIR/check)
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

fn apply_model(cfg: &mut RunConfig, args: &ModelArgs) {
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(n) = args.grid_n {
        cfg.grid_n = n;
    }
    if let Some(r) = args.rmax {
        cfg.rmax = r;
    }
}

fn apply_well(cfg: &mut RunConfig, args: &WellArgs) {
    if let Some(z) = args.z {
        cfg.z = Some(z);
    }
    if let Some(s) = args.s {
        cfg.s = s;
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    match cli.cmd {
        Cmd::Constants { model, well, out_dir } => {
            apply_model(&mut cfg, &model);
            apply_well(&mut cfg, &well);
            cfg.validate()?;
            commands::cmd_constants(&cfg, out_dir)
        }
        Cmd::LaneEmden { model, out_dir } => {
            apply_model(&mut cfg, &model);
            cfg.validate()?;
            commands::cmd_lane_emden(&cfg, out_dir)
        }
        Cmd::Minimize {
            model,
            well,
            tau,
            tau_frac,
            mass,
            out_dir,
        } => {
            apply_model(&mut cfg, &model);
            apply_well(&mut cfg, &well);
            if tau.is_some() || tau_frac.is_some() {
                cfg.tau = tau;
                cfg.tau_frac = tau_frac;
            }
            if let Some(mass) = mass {
                cfg.target_mass = mass;
            }
            cfg.validate()?;
            commands::cmd_minimize(&cfg, out_dir)
        }
        Cmd::Sweep {
            model,
            well,
            mode,
            ladder,
            fit_window,
            out_dir,
        } => {
            apply_model(&mut cfg, &model);
            apply_well(&mut cfg, &well);
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            if let Some(spec) = &ladder {
                cfg.apply_kv("ladder", spec)?;
            }
            if let Some(w) = fit_window {
                cfg.fit_window = w;
            }
            // Potential mode runs a unit-strength well unless one is given;
            // the default is made explicit so the echoed config reproduces
            // the run under any command.
            if matches!(cfg.mode, config::SweepMode::Potential) && cfg.z.is_none() {
                cfg.z = Some(1.0);
            }
            cfg.validate()?;
            commands::cmd_sweep(&cfg, out_dir)
        }
        Cmd::Check { model, out_dir } => {
            apply_model(&mut cfg, &model);
            cfg.validate()?;
            check::cmd_check(&cfg, out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
