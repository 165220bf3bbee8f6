//! Constrained minimization of the Chandrasekhar-type energy
//!
//!   E_tau(rho) = int j_m(rho) - tau D(rho, rho) + int V rho
//!
//! over nonnegative radial densities of fixed mass, for subcritical
//! coupling tau < tau_c. The solver is a damped self-consistent-field
//! iteration on the Euler-Lagrange system
//!
//!   sqrt(eta(rho)^2 + m^2) = tau Phi_rho - V + mu   on {rho > 0},
//!   m + V - mu - tau Phi_rho >= 0                   off the support,
//!
//! with the chemical potential mu matched to the mass constraint by
//! bisection at every step (the constrained mass is monotone in mu).
//! Near criticality the collapse makes physical iterates singular, so the
//! solve switches to blow-up variables w(x) = eps^3 rho(eps x): w solves
//! the same problem with mass m*eps and potential strength z*eps^{1-s},
//! every energy component maps back as a factor 1/eps, and w stays O(1).
//! A periodic dilation line search removes the soft scaling mode whose
//! plain SCF contraction rate degrades like 1 - O(tau_c - tau).

use std::sync::Arc;

use serde::Serialize;

use crate::coulomb::newton_potential;
use crate::error::{ChandraError, Result};
use crate::grid::{rescale, same_grid, RadialDensity, RadialGrid, SUPPORT_REL_TOL};
use crate::kinetic::{dj_drho, j_m, PhysicalParams};
use crate::lane_emden::LaneEmdenProfile;
use crate::potential::PowerLawPotential;

/// Where the solve happens relative to criticality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupPolicy {
    /// Blow-up frame when tau > 0.8 tau_c and the target mass is 1.
    Auto,
    Never,
    Always,
}

/// Solver knobs. `Default` gives the production configuration.
#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    /// Initial damping: rho <- (1 - beta) rho + beta el_update(rho).
    pub beta: f64,
    /// Smallest damping the energy-increase monitor may reach.
    pub beta_floor: f64,
    /// Convergence threshold on the relative sup-norm of the SCF update.
    pub scf_tol: f64,
    pub max_iter: usize,
    /// Relative mass-matching tolerance of the mu bisection.
    pub mu_rel_tol: f64,
    /// Bracket-expansion cap of the mu bisection.
    pub mu_max_expansions: u32,
    pub blowup: BlowupPolicy,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            beta_floor: 1.0 / 64.0,
            scf_tol: 1e-10,
            max_iter: 50_000,
            mu_rel_tol: 1e-12,
            mu_max_expansions: 64,
            blowup: BlowupPolicy::Auto,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(ChandraError::Domain(format!(
                "damping must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if !(self.beta_floor > 0.0 && self.beta_floor <= self.beta) {
            return Err(ChandraError::Domain(
                "damping floor must lie in (0, beta]".into(),
            ));
        }
        if !(self.scf_tol > 0.0 && self.mu_rel_tol > 0.0) {
            return Err(ChandraError::Domain(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(ChandraError::Domain("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Energy components; `total = kinetic - tau * direct + external`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub direct: f64,
    pub external: f64,
    pub total: f64,
}

/// Euler-Lagrange defect of a solution candidate: `on_support` is the
/// largest |sqrt(eta^2 + m^2) - (tau Phi - V + mu)| where rho > 0;
/// `off_support` is the largest positive excess of tau Phi - V + mu over m
/// where rho = 0 (0 when the off-support inequality holds).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residuals {
    pub on_support: f64,
    pub off_support: f64,
}

/// Blow-up frame data attached to near-critical solves.
#[derive(Debug, Clone)]
pub struct BlowupFrame {
    /// eps = (tau_c - tau)^{1/2} (free) or (tau_c - tau)^{1/(1-s)} (potential).
    pub eps: f64,
    /// The O(1) blow-up profile w(x) = eps^3 rho(eps x).
    pub w: RadialDensity,
    /// Chemical potential of the w-problem; mu = mu_w / eps.
    pub mu_w: f64,
}

#[derive(Debug)]
pub struct MinimizerResult {
    pub rho: RadialDensity,
    pub mu: f64,
    pub energy: EnergyBreakdown,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
    /// Support radius; sub-cell accurate when the outer EL equation
    /// tau Phi - V + mu = m has a root, otherwise the last substantive node.
    pub support_radius: Option<f64>,
    pub blowup: Option<BlowupFrame>,
}

/// Nodal external-potential values. V(0) = -inf, so node 0 is capped at
/// the first positive node's value; its quadrature weight is O(r_1^3) and
/// contributes nothing at solver tolerances.
fn nodal_potential(grid: &RadialGrid, pot: Option<&PowerLawPotential>) -> Vec<f64> {
    match pot {
        None => vec![0.0; grid.len()],
        Some(p) => {
            let nodes = grid.nodes();
            let mut v: Vec<f64> = nodes.iter().map(|&r| p.v_at(r)).collect();
            v[0] = p.v_at(nodes[1]);
            v
        }
    }
}

/// Density values of the Euler-Lagrange closure at multiplier mu:
/// rho = (q / 6 pi^2) (g^2 - m^2)^{3/2} where g = tau Phi - V + mu > m,
/// else 0.
fn el_values(
    phi: &[f64],
    v: &[f64],
    mu: f64,
    tau: f64,
    params: &PhysicalParams,
) -> Vec<f64> {
    let c = params.q() as f64 / (6.0 * std::f64::consts::PI.powi(2));
    let m = params.m();
    phi.iter()
        .zip(v)
        .map(|(&p, &vv)| {
            let g = tau * p - vv + mu;
            if g > m {
                let u = g * g - m * m;
                c * u * u.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// One Euler-Lagrange closure step at fixed multiplier: computes Phi_rho
/// and returns the updated density (not mass-matched).
pub fn el_update(
    rho: &RadialDensity,
    mu: f64,
    tau: f64,
    params: &PhysicalParams,
    pot: Option<&PowerLawPotential>,
) -> Result<RadialDensity> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "coupling must be positive and finite, got {tau}"
        )));
    }
    let phi = newton_potential(rho);
    let v = nodal_potential(rho.grid(), pot);
    RadialDensity::new(rho.grid().clone(), el_values(&phi, &v, mu, tau, params))
}

/// Mass of the EL closure as a function of mu, on precomputed potentials.
fn el_mass(
    grid: &RadialGrid,
    phi: &[f64],
    v: &[f64],
    mu: f64,
    tau: f64,
    params: &PhysicalParams,
) -> (Vec<f64>, f64) {
    let vals = el_values(phi, v, mu, tau, params);
    let mass = grid
        .weights()
        .iter()
        .zip(&vals)
        .map(|(w, x)| w * x)
        .sum();
    (vals, mass)
}

/// Bisects mu so the EL closure has the target mass. The closure mass is
/// nondecreasing in mu, 0 for mu <= m - max(tau Phi - V), and unbounded;
/// the initial bracket is expanded (doubling) if it does not straddle.
fn bisect_mu(
    grid: &RadialGrid,
    phi: &[f64],
    v: &[f64],
    tau: f64,
    params: &PhysicalParams,
    target: f64,
    cfg: &SolveConfig,
) -> Result<(f64, Vec<f64>, f64)> {
    let m = params.m();
    let base_hi = phi
        .iter()
        .zip(v)
        .map(|(&p, &vv)| tau * p - vv)
        .fold(f64::NEG_INFINITY, f64::max);
    // Mass is exactly 0 at lo; hi starts one unit above the first node
    // where the closure could activate.
    let mut lo = m - base_hi - 1.0;
    let mut hi = m - base_hi + 1.0;
    let mut step = 1.0;
    let mut expansions = 0;
    loop {
        let (_, mass) = el_mass(grid, phi, v, hi, tau, params);
        if mass >= target {
            break;
        }
        hi += step;
        step *= 2.0;
        expansions += 1;
        if expansions > cfg.mu_max_expansions {
            return Err(ChandraError::MuBracket(format!(
                "mass {mass:.3e} still below target {target:.3e} after {expansions} expansions"
            )));
        }
    }

    let scale = hi.abs().max(lo.abs()).max(1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (_, mass) = el_mass(grid, phi, v, mid, tau, params);
        if mass < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * scale {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    let (vals, mass) = el_mass(grid, phi, v, mu, tau, params);
    if !((mass - target).abs() <= 1e-6 * target.max(1e-300)) {
        return Err(ChandraError::MuBracket(format!(
            "mu bisection stalled: mass {mass:.17e} vs target {target:.17e}"
        )));
    }
    Ok((mu, vals, mass))
}

/// Matches mu to `target_mass` for the EL closure built from `rho`'s own
/// potential (one outer step of the SCF map).
pub fn solve_mu(
    rho: &RadialDensity,
    tau: f64,
    params: &PhysicalParams,
    pot: Option<&PowerLawPotential>,
    target_mass: f64,
    cfg: &SolveConfig,
) -> Result<f64> {
    if !(target_mass > 0.0) {
        return Err(ChandraError::Domain(
            "mu matching needs a positive target mass".into(),
        ));
    }
    let phi = newton_potential(rho);
    let v = nodal_potential(rho.grid(), pot);
    let (mu, _, _) = bisect_mu(rho.grid(), &phi, &v, tau, params, target_mass, cfg)?;
    Ok(mu)
}

/// Energy components from precomputed Phi and the potential pairing
/// int V rho (0 without a potential).
fn energy_parts(
    rho: &RadialDensity,
    phi: &[f64],
    external: f64,
    tau: f64,
    params: &PhysicalParams,
) -> Result<EnergyBreakdown> {
    let grid = rho.grid();
    let mut kinetic = 0.0;
    let mut direct2 = 0.0;
    for ((&w, &x), &p) in grid.weights().iter().zip(rho.values()).zip(phi) {
        kinetic += w * j_m(x, params)?;
        direct2 += w * x * p;
    }
    let direct = 0.5 * direct2;
    Ok(EnergyBreakdown {
        kinetic,
        direct,
        external,
        total: kinetic - tau * direct + external,
    })
}

/// Full energy breakdown of a density at coupling tau.
pub fn energy(
    rho: &RadialDensity,
    tau: f64,
    params: &PhysicalParams,
    pot: Option<&PowerLawPotential>,
) -> Result<EnergyBreakdown> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "coupling must be positive and finite, got {tau}"
        )));
    }
    let phi = newton_potential(rho);
    let external = match pot {
        None => 0.0,
        Some(p) => {
            let pw = rho.grid().power_weights(p.s())?;
            -p.z() * pw.iter().zip(rho.values()).map(|(w, x)| w * x).sum::<f64>()
        }
    };
    energy_parts(rho, &phi, external, tau, params)
}

/// Euler-Lagrange defect of (rho, mu) in the frame it is given.
pub fn verify_el_residual(
    rho: &RadialDensity,
    mu: f64,
    tau: f64,
    params: &PhysicalParams,
    pot: Option<&PowerLawPotential>,
) -> Result<Residuals> {
    let phi = newton_potential(rho);
    let v = nodal_potential(rho.grid(), pot);
    let m = params.m();
    let cutoff = SUPPORT_REL_TOL * rho.max_value();
    let mut on: f64 = 0.0;
    let mut off: f64 = 0.0;
    // Node 0 is skipped when a potential is present: its V value is the
    // cap, not the singular limit.
    let start = usize::from(pot.is_some());
    for i in start..rho.grid().len() {
        let g = tau * phi[i] - v[i] + mu;
        let x = rho.values()[i];
        if x > cutoff {
            on = on.max((dj_drho(x, params)? - g).abs());
        } else {
            off = off.max(g - m);
        }
    }
    Ok(Residuals {
        on_support: on,
        off_support: off.max(0.0),
    })
}

/// Relative defect of the multiplier identity
/// mu * M = int j_m'(rho) rho - 2 tau D + int V rho.
pub fn multiplier_identity_gap(
    rho: &RadialDensity,
    mu: f64,
    tau: f64,
    params: &PhysicalParams,
    pot: Option<&PowerLawPotential>,
) -> Result<f64> {
    let grid = rho.grid();
    let phi = newton_potential(rho);
    let mut dj_pairing = 0.0;
    let mut direct2 = 0.0;
    for ((&w, &x), &p) in grid.weights().iter().zip(rho.values()).zip(phi.iter()) {
        dj_pairing += w * dj_drho(x, params)? * x;
        direct2 += w * x * p;
    }
    let external = match pot {
        None => 0.0,
        Some(p) => {
            let pw = grid.power_weights(p.s())?;
            -p.z() * pw.iter().zip(rho.values()).map(|(w, x)| w * x).sum::<f64>()
        }
    };
    let direct = 0.5 * direct2;
    let mass = rho.mass();
    let gap = (mu * mass - (dj_pairing - 2.0 * tau * direct + external)).abs();
    Ok(gap / (mass * params.m().max(mu.abs()).max(1e-300)))
}

struct ScfOutcome {
    rho: RadialDensity,
    mu: f64,
    phi: Vec<f64>,
    iterations: usize,
    converged: bool,
    external: f64,
}

/// Damped SCF loop in a fixed frame.
fn scf_loop(
    params: &PhysicalParams,
    tau: f64,
    pot: Option<&PowerLawPotential>,
    target: f64,
    mut rho: RadialDensity,
    cfg: &SolveConfig,
) -> Result<ScfOutcome> {
    let grid = rho.grid().clone();
    let v = nodal_potential(&grid, pot);
    let pw = match pot {
        None => None,
        Some(p) => Some(grid.power_weights(p.s())?),
    };
    let external_of = |vals: &[f64]| -> f64 {
        match (&pw, pot) {
            (Some(w), Some(p)) => {
                -p.z() * w.iter().zip(vals).map(|(a, b)| a * b).sum::<f64>()
            }
            _ => 0.0,
        }
    };

    {
        let mass = rho.mass();
        if !(mass > 0.0) {
            return Err(ChandraError::SolverFailure(
                "initial iterate has zero mass".into(),
            ));
        }
        rho.scale_values(target / mass)?;
    }

    let mut beta = cfg.beta;
    let mut prev_energy = f64::INFINITY;
    let mut increase_streak = 0u32;

    let mut mu = 0.0;
    let mut phi = newton_potential(&rho);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        phi = newton_potential(&rho);
        let (mu_it, mut hat, hat_mass) =
            bisect_mu(&grid, &phi, &v, tau, params, target, cfg)?;
        mu = mu_it;
        // Exact mass matching of the update.
        let c = target / hat_mass;
        for x in hat.iter_mut() {
            *x *= c;
        }

        let scale = rho
            .max_value()
            .max(hat.iter().fold(0.0_f64, |a, &b| a.max(b)))
            .max(1e-300);
        let update_norm = rho
            .values()
            .iter()
            .zip(&hat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max)
            / scale;

        // Energy descent monitor on the pre-mix iterate. The total is a
        // cancellation of the individual terms (near criticality it is two
        // orders below them), so increases count only above a noise floor
        // set by the term magnitudes; counting machine-level fluctuations
        // would collapse beta during the late soft-mode phase for no reason.
        let external = external_of(rho.values());
        let e = energy_parts(&rho, &phi, external, tau, params)?;
        let e_now = e.total;
        let noise = 1e-13 * (e.kinetic.abs() + tau * e.direct + e.external.abs());
        if e_now > prev_energy + noise {
            increase_streak += 1;
            if increase_streak >= 5 {
                beta = (0.5 * beta).max(cfg.beta_floor);
                increase_streak = 0;
            }
        } else {
            increase_streak = 0;
        }
        prev_energy = e_now;

        if update_norm <= cfg.scf_tol {
            converged = true;
            break;
        }

        // Damped mixing, then exact renormalization.
        let mixed: Vec<f64> = rho
            .values()
            .iter()
            .zip(&hat)
            .map(|(a, b)| (1.0 - beta) * a + beta * b)
            .collect();
        rho = RadialDensity::new(grid.clone(), mixed)?;
        let mass = rho.mass();
        rho.scale_values(target / mass)?;
    }

    let external = external_of(rho.values());
    Ok(ScfOutcome {
        rho,
        mu,
        phi,
        iterations,
        converged,
        external,
    })
}

/// Sub-cell support edge: the root of tau M / r + z r^{-s} = m - mu, which
/// is where the outer Euler-Lagrange inequality saturates (Phi = M/r
/// outside a compact support). None when mu >= m or no root lies in the
/// domain.
fn analytic_edge(
    mass: f64,
    mu: f64,
    tau: f64,
    params: &PhysicalParams,
    pot: Option<&PowerLawPotential>,
    r_max: f64,
) -> Option<f64> {
    let gap = params.m() - mu;
    if !(gap > 0.0) {
        return None;
    }
    let h = |r: f64| -> f64 {
        let vz = pot.map_or(0.0, |p| p.z() * r.powf(-p.s()));
        tau * mass / r + vz - gap
    };
    let mut lo = 1e-8;
    let mut hi = r_max;
    if h(lo) <= 0.0 || h(hi) >= 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Whether a solve at (tau, target_mass) runs in the blow-up frame. Sweep
/// drivers use this to decide which frame a warm start must live in.
pub fn uses_blowup(cfg: &SolveConfig, tau: f64, tau_c: f64, target_mass: f64) -> bool {
    match cfg.blowup {
        BlowupPolicy::Never => false,
        BlowupPolicy::Always => true,
        BlowupPolicy::Auto => target_mass == 1.0 && tau > 0.8 * tau_c,
    }
}

/// Minimizes E_tau at fixed mass; equivalent to [`minimize_warm`] without
/// a warm start.
pub fn minimize(
    grid: &Arc<RadialGrid>,
    params: &PhysicalParams,
    profile: &LaneEmdenProfile,
    tau: f64,
    pot: Option<&PowerLawPotential>,
    target_mass: f64,
    cfg: &SolveConfig,
) -> Result<MinimizerResult> {
    minimize_warm(grid, params, profile, tau, pot, target_mass, cfg, None)
}

/// Minimizes E_tau at fixed mass, optionally starting from `warm`.
///
/// The warm start lives in the solve frame: the physical density for a
/// direct solve, the blow-up profile w for a near-critical solve (as
/// returned in [`MinimizerResult::blowup`]); it must be sampled on `grid`.
#[allow(clippy::too_many_arguments)]
pub fn minimize_warm(
    grid: &Arc<RadialGrid>,
    params: &PhysicalParams,
    profile: &LaneEmdenProfile,
    tau: f64,
    pot: Option<&PowerLawPotential>,
    target_mass: f64,
    cfg: &SolveConfig,
    warm: Option<&RadialDensity>,
) -> Result<MinimizerResult> {
    cfg.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "coupling must be positive and finite, got {tau}"
        )));
    }
    if !(target_mass >= 0.0 && target_mass.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "target mass must be finite and >= 0, got {target_mass}"
        )));
    }
    if params.m() <= 0.0 {
        return Err(ChandraError::Domain(
            "minimization requires m > 0 (at m = 0 dilation makes the \
             subcritical infimum unattained)"
                .into(),
        ));
    }
    if let Some(w) = warm {
        if !same_grid(w.grid(), grid) {
            return Err(ChandraError::Structure(
                "warm start must be sampled on the solve grid".into(),
            ));
        }
    }

    let tau_c = profile.tau_c(params);
    let tau_eff = tau * target_mass.powf(2.0 / 3.0);
    if target_mass > 0.0 && tau_eff >= tau_c * (1.0 - 1e-12) {
        return Err(ChandraError::Supercritical(format!(
            "no minimizer exists: effective coupling tau * M^(2/3) = {tau_eff:.12} >= \
             tau_c = {tau_c:.12}, the energy is unbounded below (see the \
             instability probe)"
        )));
    }

    if target_mass == 0.0 {
        let rho = RadialDensity::from_fn(grid.clone(), |_| 0.0)?;
        return Ok(MinimizerResult {
            rho,
            mu: params.m(),
            energy: EnergyBreakdown {
                kinetic: 0.0,
                direct: 0.0,
                external: 0.0,
                total: 0.0,
            },
            residuals: Residuals {
                on_support: 0.0,
                off_support: 0.0,
            },
            iterations: 0,
            converged: true,
            support_radius: Some(0.0),
            blowup: None,
        });
    }

    let use_blowup = uses_blowup(cfg, tau, tau_c, target_mass);

    if !use_blowup {
        return finish_direct(grid, params, profile, tau, pot, target_mass, cfg, warm, tau_c);
    }

    // Blow-up frame: w(x) = eps^3 rho(eps x) minimizes the same energy with
    // mass m*eps and potential strength z*eps^{1-s}; every component of
    // (E, mu, residuals) maps back by the factor 1/eps.
    let dtau = tau_c - tau;
    let eps = match pot {
        None => dtau.sqrt(),
        Some(p) => dtau.powf(1.0 / (1.0 - p.s())),
    };
    let params_w = params.with_mass(params.m() * eps)?;
    let pot_w = match pot {
        None => None,
        Some(p) => Some(p.with_strength_factor(eps.powf(1.0 - p.s()))?),
    };

    let init = match warm {
        Some(w) => w.clone(),
        None => {
            let lambda = match pot {
                None => profile.lambda_inf(params),
                Some(p) => profile.lambda_s(p)?,
            };
            let lambda = if lambda.is_finite() && lambda > 1e-6 {
                lambda
            } else {
                1.0
            };
            profile.dilated(lambda, grid)?
        }
    };

    let out = scf_loop(&params_w, tau, pot_w.as_ref(), 1.0, init, cfg)?;

    // Map back to the physical frame.
    let mut w = out.rho.clone();
    if w.flag_compact_support().is_none() && out.converged {
        return Err(ChandraError::DomainTooSmall(format!(
            "blow-up profile support reaches r_max = {}; enlarge the domain",
            grid.r_max()
        )));
    }
    let rho = rescale(&w, 1.0 / eps, grid)?;
    let energy_w = energy_parts(&out.rho, &out.phi, out.external, tau, &params_w)?;
    let energy = EnergyBreakdown {
        kinetic: energy_w.kinetic / eps,
        direct: energy_w.direct / eps,
        external: energy_w.external / eps,
        total: energy_w.total / eps,
    };
    let res_w = verify_el_residual(&out.rho, out.mu, tau, &params_w, pot_w.as_ref())?;
    let residuals = Residuals {
        on_support: res_w.on_support / eps,
        off_support: res_w.off_support / eps,
    };
    let mu = out.mu / eps;
    let support_radius = analytic_edge(1.0, out.mu, tau, &params_w, pot_w.as_ref(), grid.r_max())
        .map(|r| r * eps)
        .or(w.support_radius().map(|r| r * eps));

    let mut rho = rho;
    rho.flag_compact_support();
    if let Some(r) = support_radius {
        rho.set_support_radius(r);
    }

    Ok(MinimizerResult {
        rho,
        mu,
        energy,
        residuals,
        iterations: out.iterations,
        converged: out.converged,
        support_radius,
        blowup: Some(BlowupFrame {
            eps,
            w,
            mu_w: out.mu,
        }),
    })
}

/// Direct-frame solve and result assembly.
#[allow(clippy::too_many_arguments)]
fn finish_direct(
    grid: &Arc<RadialGrid>,
    params: &PhysicalParams,
    profile: &LaneEmdenProfile,
    tau: f64,
    pot: Option<&PowerLawPotential>,
    target_mass: f64,
    cfg: &SolveConfig,
    warm: Option<&RadialDensity>,
    tau_c: f64,
) -> Result<MinimizerResult> {
    let init = match warm {
        Some(w) => w.clone(),
        None => {
            if tau > 0.8 * tau_c {
                // Near-critical direct solve: start from the collapsed
                // reference at the predicted physical scale.
                let eps = match pot {
                    None => (tau_c - tau).sqrt(),
                    Some(p) => (tau_c - tau).powf(1.0 / (1.0 - p.s())),
                };
                let lambda = match pot {
                    None => profile.lambda_inf(params),
                    Some(p) => profile.lambda_s(p)?,
                };
                let lambda = if lambda.is_finite() && lambda > 1e-6 {
                    lambda / eps
                } else {
                    1.0 / eps
                };
                profile.dilated(lambda, grid)?
            } else {
                RadialDensity::from_fn(grid.clone(), |r| (-r * r).exp())?
            }
        }
    };

    let out = scf_loop(params, tau, pot, target_mass, init, cfg)?;
    let mut rho = out.rho;
    if rho.flag_compact_support().is_none() && out.converged {
        return Err(ChandraError::DomainTooSmall(format!(
            "solution support reaches r_max = {}; enlarge the domain",
            grid.r_max()
        )));
    }
    let energy = energy_parts(&rho, &out.phi, out.external, tau, params)?;
    let residuals = verify_el_residual(&rho, out.mu, tau, params, pot)?;
    let support_radius =
        analytic_edge(target_mass, out.mu, tau, params, pot, grid.r_max())
            .or(rho.support_radius());
    if let Some(r) = support_radius {
        rho.set_support_radius(r);
    }

    Ok(MinimizerResult {
        rho,
        mu: out.mu,
        energy,
        residuals,
        iterations: out.iterations,
        converged: out.converged,
        support_radius,
        blowup: None,
    })
}
