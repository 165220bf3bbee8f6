//! Radial numerical laboratory for a relativistic Thomas-Fermi star model.
//!
//! The model minimizes, over nonnegative densities of fixed mass,
//!
//! ```text
//! E_tau(rho) = ∫ j_m(rho) - tau D(rho,rho) + ∫ V rho,
//! ```
//!
//! where j_m is the kinetic energy density of a free relativistic Fermi gas,
//! D is the Newtonian self-interaction energy, and V is an optional
//! attractive power-law potential -z/|x|^s with 0 < s < 3/4. The coupling
//! has a critical value tau_c = K_cl / sigma_f, with sigma_f the sharp
//! constant in sigma_f ||rho||_{4/3}^{4/3} ||rho||_1^{2/3} >= D(rho,rho),
//! attained by a Lane-Emden index-3 profile Q.
//!
//! Modules:
//! - [`grid`]: radial discretization, quadrature, norms, rescaling.
//! - [`kinetic`]: closed-form kinetic densities j_m, j~_m and their bounds.
//! - [`coulomb`]: Newton potential, direct energy, HLS ratio.
//! - [`potential`]: power-law external potential and singular-weight pairing.
//! - [`lane_emden`]: the optimizer profile Q, sigma_f, tau_c, moments.
//! - [`minimizer`]: constrained SCF minimization with chemical-potential
//!   bisection, damping, and blow-up variables near criticality.
//! - [`asymptotics`]: coupling sweeps, log-log exponent fits, blow-up profile
//!   distances, and the supercritical instability probe.

pub mod asymptotics;
pub mod coulomb;
pub mod error;
pub mod grid;
pub mod interp;
pub mod kinetic;
pub mod lane_emden;
pub mod minimizer;
pub mod potential;

pub use error::{ChandraError, Result};
