//! Newton potential and direct interaction energy for radial densities.
//!
//! For spherically symmetric rho, the shell theorem gives
//!
//!   Phi(r) = int rho(y)/|x - y| dy
//!          = (4 pi / r) int_0^r rho s^2 ds + 4 pi int_r^inf rho s ds,
//!
//! so nodal potentials come from prefix sums of the grid's cached
//! per-interval tables for the measures s^2 ds and s ds. Both cumulants
//! are exact at nodes for piecewise-cubic interpolants of rho, and the
//! direct energy D = (1/2) int rho Phi reuses the standard grid weights.

use crate::error::{ChandraError, Result};
use crate::grid::{moment, RadialDensity};

/// Nodal values of the Newton potential Phi(r_i). Phi(0) uses the pure
/// suffix form 4 pi int_0^rmax rho s ds.
pub fn newton_potential(rho: &RadialDensity) -> Vec<f64> {
    let grid = rho.grid();
    let n = grid.len();
    let v = rho.values();
    let four_pi = 4.0 * std::f64::consts::PI;

    // Per-interval integrals of rho against s^2 ds and s ds.
    let mut cell2 = vec![0.0; n - 1];
    let mut cell1 = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let j0 = i.min(n - 4);
        let w2 = &grid.cell_w2()[i];
        let w1 = &grid.cell_w1()[i];
        let mut a = 0.0;
        let mut b = 0.0;
        for k in 0..4 {
            a += w2[k] * v[j0 + k];
            b += w1[k] * v[j0 + k];
        }
        cell2[i] = a;
        cell1[i] = b;
    }

    // inner[i] = int_0^{r_i} rho s^2 ds, outer[i] = int_{r_i}^{rmax} rho s ds.
    let mut inner = vec![0.0; n];
    for i in 1..n {
        inner[i] = inner[i - 1] + cell2[i - 1];
    }
    let mut outer = vec![0.0; n];
    for i in (0..n - 1).rev() {
        outer[i] = outer[i + 1] + cell1[i];
    }

    let nodes = grid.nodes();
    let mut phi = vec![0.0; n];
    phi[0] = four_pi * outer[0];
    for i in 1..n {
        phi[i] = four_pi * (inner[i] / nodes[i] + outer[i]);
    }
    phi
}

/// Direct energy D(rho, rho) = (1/2) int rho Phi_rho.
pub fn direct_energy(rho: &RadialDensity) -> Result<f64> {
    let phi = newton_potential(rho);
    let integrand: Vec<f64> = rho.values().iter().zip(&phi).map(|(a, b)| a * b).collect();
    Ok(0.5 * rho.grid().integrate(&integrand)?)
}

/// Hardy-Littlewood-Sobolev-type ratio
///
///   D(rho, rho) / ( ||rho||_{4/3}^{4/3} ||rho||_1^{2/3} ),
///
/// the quantity maximized by the Lane-Emden profile with sharp value
/// sigma_f. Errors on the zero density.
pub fn hls_ratio(rho: &RadialDensity) -> Result<f64> {
    let mass = rho.mass();
    if mass <= 0.0 {
        return Err(ChandraError::Domain(
            "HLS ratio is undefined for the zero density".into(),
        ));
    }
    let d = direct_energy(rho)?;
    let l43 = moment(rho, 4.0 / 3.0)?;
    Ok(d / (l43 * mass.powf(2.0 / 3.0)))
}
