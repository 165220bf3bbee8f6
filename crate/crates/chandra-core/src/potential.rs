//! Attractive power-law external potential V(x) = -z |x|^{-s}.
//!
//! The admissible exponent window is 0 < s < 3/4: the upper end keeps the
//! potential energy controlled by the kinetic term all the way to the
//! critical coupling (values of s at or above 3/4 void the collapse
//! expansion), and z > 0 makes the well attractive. The pairing
//! int V rho = -z int rho r^{-s} dV uses the grid's singular power
//! weights, whose first cell is integrated analytically.

use crate::error::{ChandraError, Result};
use crate::grid::RadialDensity;

/// V(x) = -z |x|^{-s}, z > 0, 0 < s < 3/4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawPotential {
    z: f64,
    s: f64,
}

impl PowerLawPotential {
    pub fn new(z: f64, s: f64) -> Result<Self> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(ChandraError::Domain(format!(
                "potential strength must be positive and finite, got {z}"
            )));
        }
        if !(s > 0.0 && s < 0.75) {
            return Err(ChandraError::Domain(format!(
                "potential exponent must lie in (0, 3/4), got {s}"
            )));
        }
        Ok(Self { z, s })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Pointwise value V(r) = -z r^{-s}; -inf at the origin.
    pub fn v_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            f64::NEG_INFINITY
        } else {
            -self.z * r.powf(-self.s)
        }
    }

    /// Same exponent with strength multiplied by `c` (blow-up rescaling).
    pub fn with_strength_factor(&self, c: f64) -> Result<Self> {
        Self::new(self.z * c, self.s)
    }
}

/// int V rho dV = -z * (4 pi int rho r^{2-s} dr), finite for any bounded
/// density since 2 - s > -1.
pub fn potential_energy(rho: &RadialDensity, pot: &PowerLawPotential) -> Result<f64> {
    let pw = rho.grid().power_weights(pot.s())?;
    let paired: f64 = pw.iter().zip(rho.values()).map(|(w, v)| w * v).sum();
    Ok(-pot.z() * paired)
}

/// Potential energy of a blow-up profile against the contracted potential:
/// for w(x) = eps^3 rho(eps x),
///
///   int V rho = int V(eps x) w(x) dx = eps^{-s} int V w.
///
/// The eps-independent pairing int V w (fixed by the limiting profile) is
/// kept separate from the divergent prefactor eps^{-s} so callers can report
/// both without re-integration.
#[derive(Debug, Clone, Copy)]
pub struct RescaledPotentialEnergy {
    /// int V w, the unit-scale pairing of the blow-up profile.
    pub inner: f64,
    /// eps^{-s}, the change-of-variables prefactor.
    pub prefactor: f64,
    /// int V(eps x) w dx = prefactor * inner.
    pub value: f64,
}

/// Evaluates int V(eps x) w(x) dx through the prefactor split above.
pub fn rescaled_potential_energy(
    w: &RadialDensity,
    pot: &PowerLawPotential,
    eps: f64,
) -> Result<RescaledPotentialEnergy> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "blow-up scale must be positive and finite, got {eps}"
        )));
    }
    let inner = potential_energy(w, pot)?;
    let prefactor = eps.powf(-pot.s());
    Ok(RescaledPotentialEnergy {
        inner,
        prefactor,
        value: prefactor * inner,
    })
}
