//! Kinetic energy densities of the free relativistic Fermi gas.
//!
//! With Fermi momentum eta = (6 pi^2 rho / q)^{1/3},
//!
//!   j_m(rho)  = (q/2pi^2) int_0^eta p^2 sqrt(p^2 + m^2) dp
//!   j~_m(rho) = (q/2pi^2) int_0^eta p^2 / sqrt(p^2 + m^2) dp,
//!
//! evaluated in closed form. Both are written as m-power prefactors times
//! functions of t = eta/m, with asinh for the log term; the closed forms
//! cancel catastrophically as t -> 0 (the bracket shrinks like t^3 while
//! its terms stay of size t), so below t = 1e-2 a Taylor series through
//! t^6 takes over. At the switch point the series truncation is ~ 1e-14
//! relative and the cancellation noise ~ 1e-12, so both branches agree to
//! better than 1e-11 there.

use crate::error::{ChandraError, Result};
use crate::grid::RadialDensity;

/// Series/closed-form switch point in t = eta/m.
const SMALL_T: f64 = 1e-2;

/// Fermi-gas parameters: spin multiplicity q, particle mass m, and the
/// massless-limit kinetic constant K_cl = (3/4)(6 pi^2 / q)^{1/3}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    q: u32,
    m: f64,
    k_cl: f64,
}

impl PhysicalParams {
    /// `q >= 1`; `m >= 0` (m = 0 selects the scale-invariant limit forms).
    pub fn new(q: u32, m: f64) -> Result<Self> {
        if q == 0 {
            return Err(ChandraError::Domain("multiplicity q must be >= 1".into()));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(ChandraError::Domain(format!(
                "mass must be finite and >= 0, got {m}"
            )));
        }
        let k_cl = 0.75 * (6.0 * std::f64::consts::PI.powi(2) / q as f64).cbrt();
        Ok(Self { q, m, k_cl })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// K_cl = (3/4)(6 pi^2/q)^{1/3}; j_0(rho) = K_cl rho^{4/3}.
    pub fn k_cl(&self) -> f64 {
        self.k_cl
    }

    /// Fermi momentum eta(rho) = (6 pi^2 rho / q)^{1/3}.
    pub fn eta(&self, rho: f64) -> f64 {
        (6.0 * std::f64::consts::PI.powi(2) * rho / self.q as f64).cbrt()
    }

    /// Same parameters with the mass replaced (blow-up change of variables).
    pub fn with_mass(&self, m: f64) -> Result<Self> {
        Self::new(self.q, m)
    }
}

/// Kinetic energy density j_m(rho). Errors on rho < 0.
pub fn j_m(rho: f64, params: &PhysicalParams) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(ChandraError::Domain(format!(
            "kinetic density needs rho >= 0, got {rho}"
        )));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let m = params.m;
    let eta = params.eta(rho);
    if m == 0.0 {
        // K_cl rho^{4/3} = (3/4) rho eta.
        return Ok(0.75 * rho * eta);
    }
    let t = eta / m;
    let pref = params.q as f64 / (16.0 * std::f64::consts::PI.powi(2));
    if t < SMALL_T {
        // j = m rho (1 + (3/10) t^2 - (3/56) t^4 + (1/48) t^6 - ...)
        let t2 = t * t;
        Ok(m * rho * (1.0 + t2 * (0.3 + t2 * (-3.0 / 56.0 + t2 / 48.0))))
    } else {
        // j = (q/16 pi^2) m^4 [ t (2t^2 + 1) sqrt(t^2 + 1) - asinh t ]
        let b = t * (2.0 * t * t + 1.0) * (t * t + 1.0).sqrt() - t.asinh();
        Ok(pref * m.powi(4) * b)
    }
}

/// Companion density j~_m(rho) = (q/2pi^2) int_0^eta p^2/sqrt(p^2+m^2) dp.
/// For m = 0 returns the limit (q/4pi^2) eta^2.
pub fn j_tilde_m(rho: f64, params: &PhysicalParams) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(ChandraError::Domain(format!(
            "kinetic density needs rho >= 0, got {rho}"
        )));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let m = params.m;
    let eta = params.eta(rho);
    let pref = params.q as f64 / (4.0 * std::f64::consts::PI.powi(2));
    if m == 0.0 {
        return Ok(pref * eta * eta);
    }
    let t = eta / m;
    if t < SMALL_T {
        // j~ = (rho/m)(1 - (3/10) t^2 + (9/56) t^4 - (5/48) t^6 + ...)
        let t2 = t * t;
        Ok(rho / m * (1.0 + t2 * (-0.3 + t2 * (9.0 / 56.0 - t2 * 5.0 / 48.0))))
    } else {
        // j~ = (q/4 pi^2) m^2 [ t sqrt(t^2 + 1) - asinh t ]
        let b = t * (t * t + 1.0).sqrt() - t.asinh();
        Ok(pref * m * m * b)
    }
}

/// dj_m/drho = sqrt(eta^2 + m^2), the single-particle energy at the Fermi
/// surface; equals eta when m = 0.
pub fn dj_drho(rho: f64, params: &PhysicalParams) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(ChandraError::Domain(format!(
            "kinetic density needs rho >= 0, got {rho}"
        )));
    }
    let eta = params.eta(rho);
    Ok((eta * eta + params.m * params.m).sqrt())
}

/// int j_m(rho) dV over the grid.
pub fn kinetic_energy(rho: &RadialDensity, params: &PhysicalParams) -> Result<f64> {
    let vals: Vec<f64> = rho
        .values()
        .iter()
        .map(|&v| j_m(v, params))
        .collect::<Result<_>>()?;
    rho.grid().integrate(&vals)
}

/// int j~_m(rho) dV over the grid.
pub fn kinetic_tilde_energy(rho: &RadialDensity, params: &PhysicalParams) -> Result<f64> {
    let vals: Vec<f64> = rho
        .values()
        .iter()
        .map(|&v| j_tilde_m(v, params))
        .collect::<Result<_>>()?;
    rho.grid().integrate(&vals)
}
