//! Collapse asymptotics near the critical coupling: ladder sweeps
//! tau -> tau_c with warm starts, power-law fits of the observables,
//! profile distances against the dilated limit profile, and the
//! supercritical instability probe.
//!
//! In free space the minimizer concentrates at the scale
//! eps = (tau_c - tau)^{1/2} with E ~ 2 lambda_inf eps and
//! D ~ lambda_inf / eps; with an attractive well -z |x|^{-s} the scale is
//! eps = (tau_c - tau)^{1/(1-s)} and E ~ (1 - 1/s) lambda_s eps^{-s}.
//! The sweep records the physical observables together with blow-up-frame
//! distances to lambda^3 Q(lambda x), which certify convergence of the
//! shape, and the fits recover the exponents and prefactors from the data.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{ChandraError, Result};
use crate::grid::{lp_distance, rescale, RadialDensity, RadialGrid};
use crate::kinetic::PhysicalParams;
use crate::lane_emden::LaneEmdenProfile;
use crate::minimizer::{minimize_warm, uses_blowup, SolveConfig};
use crate::potential::PowerLawPotential;

/// Collapse scale eps for a coupling distance dtau = tau_c - tau:
/// dtau^{1/2} in free space, dtau^{1/(1-s)} with an external well.
pub fn collapse_scale(dtau: f64, pot: Option<&PowerLawPotential>) -> f64 {
    match pot {
        None => dtau.sqrt(),
        Some(p) => dtau.powf(1.0 / (1.0 - p.s())),
    }
}

/// Ladder sweep description: which couplings to visit and how to solve.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Coupling distances tau_c - tau, strictly decreasing.
    pub ladder: Vec<f64>,
    pub pot: Option<PowerLawPotential>,
    pub solve: SolveConfig,
    /// Number of largest-dtau points excluded from fits.
    pub fit_skip_head: usize,
}

impl SweepSpec {
    /// Free-space default: nine points, dtau = 10^{-(1 + k/4)}, k = 0..8,
    /// spanning 1e-1 down to 1e-3; the two largest are outside the fit
    /// window.
    pub fn default_free() -> Self {
        Self {
            ladder: (0..9).map(|k| 10f64.powf(-1.0 - k as f64 / 4.0)).collect(),
            pot: None,
            solve: SolveConfig::default(),
            fit_skip_head: 2,
        }
    }

    /// External-well default: seven points from 1e-1 down to 10^{-2.5}.
    pub fn default_potential(pot: PowerLawPotential) -> Self {
        Self {
            ladder: (0..7).map(|k| 10f64.powf(-1.0 - k as f64 / 4.0)).collect(),
            pot: Some(pot),
            solve: SolveConfig::default(),
            fit_skip_head: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(ChandraError::Domain("sweep ladder is empty".into()));
        }
        for &d in &self.ladder {
            if !(d > 0.0 && d.is_finite()) {
                return Err(ChandraError::Domain(format!(
                    "ladder entries must be positive and finite, got {d}"
                )));
            }
        }
        if self.ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ChandraError::Domain(
                "ladder must be strictly decreasing in tau_c - tau".into(),
            ));
        }
        Ok(())
    }
}

/// One solved point of a sweep. Distances are blow-up-frame distances to
/// the dilated reference profile; `r_half` is the physical radius holding
/// half the mass (measured on the blow-up profile and mapped back by eps
/// when that frame is active, since the physical star can shrink below
/// grid resolution). Failed points carry NaN observables and converged =
/// false.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub tau: f64,
    pub dtau: f64,
    pub eps: f64,
    pub energy: f64,
    pub direct: f64,
    pub mu: f64,
    pub l1_dist: f64,
    pub l43_dist: f64,
    pub r_half: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// A completed sweep. `usable` is false when more than 20% of the points
/// failed to converge; fits refuse unusable sweeps.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub tau_c: f64,
    /// Reference dilation of the limit profile (lambda_inf or lambda_s).
    pub lambda_ref: f64,
    pub pot: Option<PowerLawPotential>,
    pub usable: bool,
}

/// Radius enclosing half the total mass, by linear interpolation of the
/// cumulative nodal mass.
pub fn median_radius(rho: &RadialDensity) -> Result<f64> {
    let mass = rho.mass();
    if !(mass > 0.0) {
        return Err(ChandraError::Domain(
            "median radius requires positive mass".into(),
        ));
    }
    let target = 0.5 * mass;
    let grid = rho.grid();
    let nodes = grid.nodes();
    let mut cum = 0.0;
    let mut prev_cum = 0.0;
    let mut prev_r = 0.0;
    for (i, &v) in rho.values().iter().enumerate() {
        cum += grid.weights()[i] * v;
        if cum >= target {
            let span = cum - prev_cum;
            let frac = if span > 0.0 { (target - prev_cum) / span } else { 1.0 };
            return Ok(prev_r + frac * (nodes[i] - prev_r));
        }
        prev_cum = cum;
        prev_r = nodes[i];
    }
    Ok(grid.r_max())
}

/// Blow-up-frame distances (L^1, L^{4/3}) between a physical minimizer and
/// the dilated limit profile: w(x) = eps^3 rho(eps x) is compared against
/// lambda^3 Q(lambda x) on rho's grid.
pub fn profile_distance(
    rho: &RadialDensity,
    eps: f64,
    lambda: f64,
    profile: &LaneEmdenProfile,
) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "collapse scale must be positive and finite, got {eps}"
        )));
    }
    let grid = rho.grid().clone();
    let w = rescale(rho, eps, &grid)?;
    let reference = profile.dilated(lambda, &grid)?;
    Ok((
        lp_distance(&w, &reference, 1.0)?,
        lp_distance(&w, &reference, 4.0 / 3.0)?,
    ))
}

/// Dilation factor lambda minimizing the L^1 distance between `w` and
/// lambda^3 Q(lambda x), by golden-section search over `bracket`.
pub fn best_lambda(
    w: &RadialDensity,
    profile: &LaneEmdenProfile,
    bracket: (f64, f64),
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "dilation bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let grid = w.grid().clone();
    let dist = |l: f64| -> Result<f64> {
        lp_distance(w, &profile.dilated(l, &grid)?, 1.0)
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = dist(a)?;
    let mut fb = dist(b)?;
    for _ in 0..64 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = dist(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = dist(b)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Runs a ladder sweep tau = tau_c - dtau at unit mass, warm-starting each
/// point from the previous one (coarse-to-fine in eps). Per-point solver
/// failures are recorded as non-converged rows and the sweep continues;
/// more than 20% of them marks the sweep unusable for fitting.
pub fn run_sweep(
    grid: &Arc<RadialGrid>,
    params: &PhysicalParams,
    profile: &LaneEmdenProfile,
    spec: &SweepSpec,
) -> Result<SweepResult> {
    spec.validate()?;
    let tau_c = profile.tau_c(params);
    if spec.ladder[0] >= tau_c {
        return Err(ChandraError::Domain(format!(
            "largest ladder entry {} leaves no positive coupling (tau_c = {tau_c})",
            spec.ladder[0]
        )));
    }
    let lambda_ref = match &spec.pot {
        None => profile.lambda_inf(params),
        Some(p) => profile.lambda_s(p)?,
    };
    let reference = profile.dilated(lambda_ref, grid)?;

    let mut records = Vec::with_capacity(spec.ladder.len());
    let mut warm: Option<(RadialDensity, bool)> = None;
    for &dtau in &spec.ladder {
        let tau = tau_c - dtau;
        let eps = collapse_scale(dtau, spec.pot.as_ref());
        let want_blowup = uses_blowup(&spec.solve, tau, tau_c, 1.0);
        let start = warm
            .as_ref()
            .filter(|(_, f)| *f == want_blowup)
            .map(|(d, _)| d);
        let solved = minimize_warm(
            grid,
            params,
            profile,
            tau,
            spec.pot.as_ref(),
            1.0,
            &spec.solve,
            start,
        );
        match solved {
            Ok(r) => {
                let (l1, l43, r_half) = if r.converged {
                    match &r.blowup {
                        Some(b) => (
                            lp_distance(&b.w, &reference, 1.0)?,
                            lp_distance(&b.w, &reference, 4.0 / 3.0)?,
                            eps * median_radius(&b.w)?,
                        ),
                        None => {
                            let w = rescale(&r.rho, eps, grid)?;
                            (
                                lp_distance(&w, &reference, 1.0)?,
                                lp_distance(&w, &reference, 4.0 / 3.0)?,
                                median_radius(&r.rho)?,
                            )
                        }
                    }
                } else {
                    (f64::NAN, f64::NAN, f64::NAN)
                };
                records.push(SweepRecord {
                    tau,
                    dtau,
                    eps,
                    energy: r.energy.total,
                    direct: r.energy.direct,
                    mu: r.mu,
                    l1_dist: l1,
                    l43_dist: l43,
                    r_half,
                    converged: r.converged,
                    iterations: r.iterations,
                });
                warm = if r.converged {
                    match r.blowup {
                        Some(b) => Some((b.w, true)),
                        None => Some((r.rho, false)),
                    }
                } else {
                    None
                };
            }
            Err(
                ChandraError::SolverFailure(_)
                | ChandraError::MuBracket(_)
                | ChandraError::DomainTooSmall(_),
            ) => {
                // Per-point numerical failure: record and move on cold.
                records.push(SweepRecord {
                    tau,
                    dtau,
                    eps,
                    energy: f64::NAN,
                    direct: f64::NAN,
                    mu: f64::NAN,
                    l1_dist: f64::NAN,
                    l43_dist: f64::NAN,
                    r_half: f64::NAN,
                    converged: false,
                    iterations: 0,
                });
                warm = None;
            }
            Err(e) => return Err(e),
        }
    }

    let failed = records.iter().filter(|r| !r.converged).count();
    let usable = (failed as f64) <= 0.2 * (records.len() as f64);
    Ok(SweepResult {
        records,
        tau_c,
        lambda_ref,
        pot: spec.pot,
        usable,
    })
}

/// Observables a sweep can be fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Total energy (signed; the fit requires one sign across the window).
    Energy,
    /// Direct Coulomb term D(rho, rho).
    Direct,
    /// Half-mass radius.
    Length,
}

impl Observable {
    fn value(&self, r: &SweepRecord) -> f64 {
        match self {
            Observable::Energy => r.energy,
            Observable::Direct => r.direct,
            Observable::Length => r.r_half,
        }
    }
}

/// Least-squares power law obs ~ prefactor * dtau^exponent over the fit
/// window; `prefactor` carries the common sign of the observable.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_used: usize,
}

/// Fits ln|obs| against ln(dtau) on the converged records after skipping
/// the `skip_head` largest-dtau points. Requires a usable sweep, at least
/// four points in the window, and a constant observable sign.
pub fn fit_exponent(
    sweep: &SweepResult,
    skip_head: usize,
    obs: Observable,
) -> Result<PowerFit> {
    if !sweep.usable {
        return Err(ChandraError::Fit(
            "sweep is unusable for fitting: more than 20% of its points \
             failed to converge"
                .into(),
        ));
    }
    let rows: Vec<&SweepRecord> = sweep
        .records
        .iter()
        .skip(skip_head)
        .filter(|r| r.converged)
        .collect();
    if rows.len() < 4 {
        return Err(ChandraError::Fit(format!(
            "fit window holds {} converged points; at least 4 are required",
            rows.len()
        )));
    }
    let sign = obs.value(rows[0]).signum();
    if rows.iter().any(|r| {
        let y = obs.value(r);
        y == 0.0 || !y.is_finite() || y.signum() != sign
    }) {
        return Err(ChandraError::Fit(
            "observable changes sign (or vanishes) within the fit window"
                .into(),
        ));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.dtau.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| obs.value(r).abs().ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    if sxx == 0.0 {
        return Err(ChandraError::Fit(
            "fit window has no spread in tau_c - tau".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PowerFit {
        exponent: slope,
        prefactor: sign * intercept.exp(),
        r_squared,
        n_used: rows.len(),
    })
}

/// Scaling of the direct term against its predicted exponent: reports the
/// fitted power law together with the spread [k_min, k_max] of
/// D * dtau^{-theory_exponent} across the fit window (a bounded ratio
/// k_max/k_min certifies the predicted rate without fitting).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirectScaling {
    pub theory_exponent: f64,
    pub fitted: PowerFit,
    pub k_min: f64,
    pub k_max: f64,
}

pub fn direct_term_scaling(sweep: &SweepResult, skip_head: usize) -> Result<DirectScaling> {
    let theory = match &sweep.pot {
        None => -0.5,
        Some(p) => 1.0 / (p.s() - 1.0),
    };
    let fitted = fit_exponent(sweep, skip_head, Observable::Direct)?;
    let mut k_min = f64::INFINITY;
    let mut k_max = f64::NEG_INFINITY;
    for r in sweep.records.iter().skip(skip_head).filter(|r| r.converged) {
        let k = r.direct * r.dtau.powf(-theory);
        k_min = k_min.min(k);
        k_max = k_max.max(k);
    }
    Ok(DirectScaling {
        theory_exponent: theory,
        fitted,
        k_min,
        k_max,
    })
}

/// Trial energies E(l^3 Q(l x)) on an increasing dilation ladder at a
/// supercritical coupling; the tail slope exposes the unbounded descent
/// direction. Subcritical couplings are refused: there the energy is
/// bounded below and the minimizer should be used instead.
pub fn instability_probe(
    profile: &LaneEmdenProfile,
    params: &PhysicalParams,
    tau: f64,
    pot: Option<&PowerLawPotential>,
    ells: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let tau_c = profile.tau_c(params);
    if tau < tau_c * (1.0 - 1e-12) {
        return Err(ChandraError::Domain(format!(
            "instability probe refused: tau = {tau:.12} is below tau_c = \
             {tau_c:.12}, where the energy is bounded below; run the \
             minimizer instead"
        )));
    }
    if ells.is_empty() {
        return Err(ChandraError::Domain("dilation ladder is empty".into()));
    }
    for &l in ells {
        if !(l > 0.0 && l.is_finite()) {
            return Err(ChandraError::Domain(format!(
                "dilation factors must be positive and finite, got {l}"
            )));
        }
    }
    if ells.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ChandraError::Domain(
            "dilation factors must be strictly increasing".into(),
        ));
    }
    ells.iter()
        .map(|&l| Ok((l, profile.trial_energy(l, tau, params, pot)?)))
        .collect()
}
