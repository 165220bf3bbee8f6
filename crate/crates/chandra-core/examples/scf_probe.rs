//! Development probe: SCF iteration counts and wall time across the
//! coupling ladder with warm-start chaining.

use std::time::Instant;

use chandra_core::grid::{RadialDensity, RadialGrid};
use chandra_core::kinetic::PhysicalParams;
use chandra_core::lane_emden::LaneEmdenProfile;
use chandra_core::minimizer::{minimize_warm, uses_blowup, SolveConfig};

fn main() {
    let grid = RadialGrid::default_grid();
    let params = PhysicalParams::new(2, 1.0).unwrap();
    let profile = LaneEmdenProfile::build(&grid).unwrap();
    let tau_c = profile.tau_c(&params);
    let cfg = SolveConfig::default();

    println!("tau_c = {tau_c:.12}");
    let total = Instant::now();
    let mut warm: Option<RadialDensity> = None;
    let mut warm_blowup = false;
    for k in 0..9 {
        let dtau = 10f64.powf(-(1.0 + k as f64 / 4.0));
        let tau = tau_c * (1.0 - dtau);
        let blow = uses_blowup(&cfg, tau, tau_c, 1.0);
        let w = if blow == warm_blowup { warm.as_ref() } else { None };
        let t0 = Instant::now();
        match minimize_warm(&grid, &params, &profile, tau, None, 1.0, &cfg, w) {
            Ok(r) => {
                println!(
                    "dtau {dtau:>10.3e}: iters {:>6} conv {:>5} ms {:>7} E {:.9e} {}",
                    r.iterations,
                    r.converged,
                    t0.elapsed().as_millis(),
                    r.energy.total,
                    if r.blowup.is_some() { "blowup" } else { "direct" }
                );
                warm = match &r.blowup {
                    Some(b) => Some(b.w.clone()),
                    None => Some(r.rho.clone()),
                };
                warm_blowup = r.blowup.is_some();
            }
            Err(e) => {
                println!("dtau {dtau:>10.3e}: failed: {e}");
                warm = None;
            }
        }
    }
    println!("total {} ms", total.elapsed().as_millis());
}
