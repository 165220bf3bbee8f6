//! The artifact-producing commands: constants, lane-emden, minimize, and
//! sweep. Each writes its outputs through an [`ArtifactWriter`] so the
//! manifest indexes every file.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use chandra_core::asymptotics::{
    direct_term_scaling, fit_exponent, run_sweep, DirectScaling, Observable, PowerFit,
    SweepRecord, SweepSpec,
};
use chandra_core::grid::RadialGrid;
use chandra_core::kinetic::PhysicalParams;
use chandra_core::lane_emden::LaneEmdenProfile;
use chandra_core::minimizer::{minimize, EnergyBreakdown, Residuals};
use chandra_core::potential::PowerLawPotential;
use chandra_core::ChandraError;

use crate::config::{RunConfig, SweepMode};
use crate::manifest::{resolve_out_dir, ArtifactWriter};
use crate::Failure;

/// Default first-node radius of the graded grid.
const R_FIRST: f64 = 1e-5;

fn build_grid(cfg: &RunConfig) -> Result<Arc<RadialGrid>, Failure> {
    Ok(RadialGrid::graded(cfg.grid_n, cfg.rmax, R_FIRST)?)
}

fn build_profile(grid: &Arc<RadialGrid>) -> Result<LaneEmdenProfile, Failure> {
    Ok(LaneEmdenProfile::build(grid)?)
}

fn params_of(cfg: &RunConfig) -> Result<PhysicalParams, Failure> {
    Ok(PhysicalParams::new(cfg.q, cfg.m)?)
}

fn potential_of(cfg: &RunConfig) -> Result<Option<PowerLawPotential>, Failure> {
    match cfg.z {
        None => Ok(None),
        Some(z) => Ok(Some(PowerLawPotential::new(z, cfg.s)?)),
    }
}

/// Grid, limit profile, and model parameters of one run, bundled for
/// commands that issue several solves.
pub struct SolveContext {
    pub grid: Arc<RadialGrid>,
    pub profile: LaneEmdenProfile,
    pub params: PhysicalParams,
    pub tau_c: f64,
}

impl SolveContext {
    pub fn build(cfg: &RunConfig) -> Result<Self, Failure> {
        let grid = build_grid(cfg)?;
        let profile = build_profile(&grid)?;
        let params = params_of(cfg)?;
        let tau_c = profile.tau_c(&params);
        Ok(Self {
            grid,
            profile,
            params,
            tau_c,
        })
    }
}

#[derive(Serialize)]
struct Provenance {
    config_hash: String,
    code_version: String,
}

impl Provenance {
    fn new(writer: &ArtifactWriter) -> Self {
        Self {
            config_hash: writer.config_hash().to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

// ---------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct ConstantsRecord {
    q: u32,
    m: f64,
    k_cl: f64,
    sigma_f: f64,
    tau_c: f64,
    xi1: f64,
    omega: f64,
    lambda_inf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    s: f64,
    provenance: Provenance,
}

pub fn cmd_constants(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), Failure> {
    let grid = build_grid(cfg)?;
    let profile = build_profile(&grid)?;
    let params = params_of(cfg)?;
    let pot = potential_of(cfg)?;
    let mut writer = ArtifactWriter::new(resolve_out_dir(out, "constants"), "constants", cfg)?;

    let record = ConstantsRecord {
        q: cfg.q,
        m: cfg.m,
        k_cl: params.k_cl(),
        sigma_f: profile.sigma_f(),
        tau_c: profile.tau_c(&params),
        xi1: profile.solution().xi1(),
        omega: profile.solution().omega(),
        lambda_inf: profile.lambda_inf(&params),
        lambda_s: pot.as_ref().map(|p| profile.lambda_s(p)).transpose()?,
        z: cfg.z,
        s: cfg.s,
        provenance: Provenance::new(&writer),
    };
    println!("k_cl       = {:.12}", record.k_cl);
    println!("sigma_f    = {:.12}", record.sigma_f);
    println!("tau_c      = {:.12}", record.tau_c);
    println!("xi1        = {:.12}", record.xi1);
    println!("omega      = {:.12}", record.omega);
    println!("lambda_inf = {:.12}", record.lambda_inf);
    if let Some(ls) = record.lambda_s {
        println!("lambda_s   = {:.12}", ls);
    }
    writer.write_json("constants.json", &record)?;
    writer.finish()
}

// ---------------------------------------------------------------------
// lane-emden
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct ProfileRecord {
    xi1: f64,
    dtheta_xi1: f64,
    omega: f64,
    sigma_f: f64,
    tau_c: f64,
    amplitude: f64,
    length_scale: f64,
    support_radius: f64,
    mass: f64,
    l43_moment: f64,
    l23_moment: f64,
    direct: f64,
    provenance: Provenance,
}

pub fn cmd_lane_emden(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), Failure> {
    let grid = build_grid(cfg)?;
    let profile = build_profile(&grid)?;
    let params = params_of(cfg)?;
    let mut writer = ArtifactWriter::new(resolve_out_dir(out, "lane-emden"), "lane-emden", cfg)?;

    let record = ProfileRecord {
        xi1: profile.solution().xi1(),
        dtheta_xi1: profile.solution().dtheta_xi1(),
        omega: profile.solution().omega(),
        sigma_f: profile.sigma_f(),
        tau_c: profile.tau_c(&params),
        amplitude: profile.amplitude(),
        length_scale: profile.length_scale(),
        support_radius: profile.support_radius(),
        mass: profile.mass(),
        l43_moment: profile.l43_moment(),
        l23_moment: profile.l23_moment(),
        direct: profile.direct(),
        provenance: Provenance::new(&writer),
    };
    println!(
        "xi1 = {:.12}  sigma_f = {:.12}  tau_c = {:.12}",
        record.xi1, record.sigma_f, record.tau_c
    );
    println!(
        "moments: mass = {:.6e}  l43 = {:.6e}  l23 = {:.6e}  direct = {:.6e}",
        record.mass, record.l43_moment, record.l23_moment, record.direct
    );
    writer.write_json("profile.json", &record)?;
    writer.write("q_profile.csv", &profile.q_density().to_csv())?;
    writer.finish()
}

// ---------------------------------------------------------------------
// minimize
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct MinimizeRecord {
    tau: f64,
    tau_c: f64,
    mu: f64,
    energy: EnergyBreakdown,
    residuals: Residuals,
    iterations: usize,
    converged: bool,
    support_radius: Option<f64>,
    provenance: Provenance,
}

/// Resolves the coupling: exactly one of tau / tau_frac must be set.
fn resolve_tau(cfg: &RunConfig, tau_c: f64) -> Result<f64, Failure> {
    match (cfg.tau, cfg.tau_frac) {
        (Some(t), None) => Ok(t),
        (None, Some(f)) => Ok(f * tau_c),
        (None, None) => Err(Failure::Usage(
            "one of --tau / --tau-frac is required".into(),
        )),
        (Some(_), Some(_)) => Err(Failure::Usage(
            "tau and tau-frac are mutually exclusive".into(),
        )),
    }
}

pub fn cmd_minimize(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), Failure> {
    let grid = build_grid(cfg)?;
    let profile = build_profile(&grid)?;
    let params = params_of(cfg)?;
    let pot = potential_of(cfg)?;
    let tau_c = profile.tau_c(&params);
    let tau = resolve_tau(cfg, tau_c)?;
    let mut writer = ArtifactWriter::new(resolve_out_dir(out, "minimize"), "minimize", cfg)?;

    let solved = minimize(
        &grid,
        &params,
        &profile,
        tau,
        pot.as_ref(),
        cfg.target_mass,
        &cfg.solve_config(),
    )
    .map_err(|e| match e {
        ChandraError::Supercritical(msg) => Failure::Usage(format!(
            "{msg}; `chandra check` exercises the descent direction at \
             supercritical couplings"
        )),
        other => Failure::from(other),
    })?;

    let record = MinimizeRecord {
        tau,
        tau_c,
        mu: solved.mu,
        energy: solved.energy,
        residuals: solved.residuals,
        iterations: solved.iterations,
        converged: solved.converged,
        support_radius: solved.support_radius,
        provenance: Provenance::new(&writer),
    };
    writer.write_json("result.json", &record)?;
    writer.write("rho.csv", &solved.rho.to_csv())?;
    writer.finish()?;

    println!(
        "tau = {:.12} ({}tau_c)  E = {:.12e}  mu = {:.12}  iters = {}",
        tau,
        tau / tau_c,
        record.energy.total,
        record.mu,
        record.iterations
    );
    if !solved.converged {
        return Err(Failure::Solver(format!(
            "solver did not converge within {} iterations (artifacts were \
             written; raise max_iter or loosen scf_tol)",
            cfg.max_iter
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------

fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("tau,dtau,eps,E,D,mu,L1_dist,L43_dist,r_half,converged\n");
    for r in records {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.tau,
            r.dtau,
            r.eps,
            r.energy,
            r.direct,
            r.mu,
            r.l1_dist,
            r.l43_dist,
            r.r_half,
            r.converged
        );
    }
    out
}

#[derive(Serialize)]
struct TheoryRefs {
    energy_exponent: f64,
    energy_prefactor: f64,
    direct_exponent: f64,
    length_exponent: f64,
    lambda_ref: f64,
}

#[derive(Serialize)]
struct Deviations {
    energy_exponent_abs: f64,
    energy_prefactor_rel: f64,
    direct_exponent_abs: f64,
}

#[derive(Serialize)]
struct Gates {
    exponent_tol: f64,
    direct_exponent_tol: f64,
    prefactor_tol: f64,
    fit_window_skip: usize,
}

#[derive(Serialize)]
struct FitsRecord {
    mode: String,
    tau_c: f64,
    energy: PowerFit,
    direct: DirectScaling,
    length: PowerFit,
    theory: TheoryRefs,
    deviations: Deviations,
    gates: Gates,
    pass: bool,
    provenance: Provenance,
}

pub fn cmd_sweep(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), Failure> {
    let grid = build_grid(cfg)?;
    let profile = build_profile(&grid)?;
    let params = params_of(cfg)?;
    let pot = match cfg.mode {
        SweepMode::Free => None,
        // The well strength defaults to 1 when the mode asks for it.
        SweepMode::Potential => Some(PowerLawPotential::new(cfg.z.unwrap_or(1.0), cfg.s)?),
    };
    let base = match &pot {
        None => SweepSpec::default_free(),
        Some(p) => SweepSpec::default_potential(p.clone()),
    };
    let spec = SweepSpec {
        ladder: cfg.ladder.clone().unwrap_or(base.ladder),
        pot: base.pot,
        solve: cfg.solve_config(),
        fit_skip_head: cfg.fit_window,
    };
    let mut writer = ArtifactWriter::new(resolve_out_dir(out, "sweep"), "sweep", cfg)?;

    let sweep = run_sweep(&grid, &params, &profile, &spec)?;
    writer.write("sweep.csv", &sweep_csv(&sweep.records))?;

    let fitted = (|| -> chandra_core::Result<(PowerFit, DirectScaling, PowerFit)> {
        Ok((
            fit_exponent(&sweep, spec.fit_skip_head, Observable::Energy)?,
            direct_term_scaling(&sweep, spec.fit_skip_head)?,
            fit_exponent(&sweep, spec.fit_skip_head, Observable::Length)?,
        ))
    })();
    let (energy, direct, length) = match fitted {
        Ok(f) => f,
        Err(e) => {
            // The raw records are already on disk; surface the fit failure.
            writer.finish()?;
            return Err(Failure::from(e));
        }
    };

    let theory = match &pot {
        None => TheoryRefs {
            energy_exponent: 0.5,
            energy_prefactor: 2.0 * profile.lambda_inf(&params),
            direct_exponent: -0.5,
            length_exponent: 0.5,
            lambda_ref: sweep.lambda_ref,
        },
        Some(p) => TheoryRefs {
            energy_exponent: p.s() / (p.s() - 1.0),
            energy_prefactor: (1.0 - 1.0 / p.s()) * profile.lambda_s(p)?,
            direct_exponent: 1.0 / (p.s() - 1.0),
            length_exponent: 1.0 / (1.0 - p.s()),
            lambda_ref: sweep.lambda_ref,
        },
    };
    let deviations = Deviations {
        energy_exponent_abs: (energy.exponent - theory.energy_exponent).abs(),
        energy_prefactor_rel: (energy.prefactor - theory.energy_prefactor).abs()
            / theory.energy_prefactor.abs(),
        direct_exponent_abs: (direct.fitted.exponent - theory.direct_exponent).abs(),
    };
    let gates = Gates {
        exponent_tol: cfg.exponent_tol.unwrap_or(match cfg.mode {
            SweepMode::Free => 0.02,
            SweepMode::Potential => 0.05,
        }),
        direct_exponent_tol: cfg.direct_exponent_tol.unwrap_or(match cfg.mode {
            SweepMode::Free => 0.02,
            SweepMode::Potential => 0.1,
        }),
        prefactor_tol: cfg.prefactor_tol,
        fit_window_skip: spec.fit_skip_head,
    };
    let pass = deviations.energy_exponent_abs <= gates.exponent_tol
        && deviations.energy_prefactor_rel <= gates.prefactor_tol
        && deviations.direct_exponent_abs <= gates.direct_exponent_tol;

    let record = FitsRecord {
        mode: cfg.mode.name().to_string(),
        tau_c: sweep.tau_c,
        energy,
        direct,
        length,
        theory,
        deviations,
        gates,
        pass,
        provenance: Provenance::new(&writer),
    };
    writer.write_json("fits.json", &record)?;
    writer.finish()?;

    println!(
        "{} sweep: E ~ {:+.6e} * dtau^{:.4} (r^2 = {:.6}), D exponent {:.4}",
        record.mode,
        record.energy.prefactor,
        record.energy.exponent,
        record.energy.r_squared,
        record.direct.fitted.exponent
    );
    if !pass {
        return Err(Failure::Gate(format!(
            "fit deviations exceed gates: energy exponent {:.3e} (tol {:.1e}), \
             prefactor {:.3e} (tol {:.1e}), direct exponent {:.3e} (tol {:.1e})",
            record.deviations.energy_exponent_abs,
            record.gates.exponent_tol,
            record.deviations.energy_prefactor_rel,
            record.gates.prefactor_tol,
            record.deviations.direct_exponent_abs,
            record.gates.direct_exponent_tol
        )));
    }
    Ok(())
}
