//! The `check` command: a self-contained structural property suite over
//! the kinetic densities, the Coulomb pieces, the limit profile, and the
//! minimizer, reported one PASS/FAIL line per property.

use std::path::PathBuf;

use serde::Serialize;

use chandra_core::asymptotics::instability_probe;
use chandra_core::coulomb::direct_energy;
use chandra_core::grid::{RadialDensity, RadialGrid};
use chandra_core::kinetic::{dj_drho, j_m, j_tilde_m, PhysicalParams};
use chandra_core::lane_emden::LaneEmdenProfile;
use chandra_core::minimizer::{minimize, multiplier_identity_gap, verify_el_residual};

use crate::commands::SolveContext;
use crate::config::RunConfig;
use crate::manifest::{resolve_out_dir, ArtifactWriter};
use crate::Failure;

const PI: f64 = std::f64::consts::PI;

/// SplitMix64, matching the test suites: deterministic draws without an
/// RNG dependency.
struct SplitMix(u64);

impl SplitMix {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

#[derive(Serialize)]
struct PropertyResult {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn property(name: &'static str, pass: bool, detail: String) -> PropertyResult {
    PropertyResult { name, pass, detail }
}

/// Pointwise kinetic bounds over 1000 draws (rho in (0,10], m in (0,5],
/// q in {1,2}): the massless-term sandwich, the subleading moment cap,
/// the Fermi bracket, and the two-sided dual product.
fn kinetic_bounds() -> Vec<PropertyResult> {
    let slack = 1e-12;
    let mut rng = SplitMix(0xC0FFEE_01);
    // Worst signed margins (negative = violation beyond slack).
    let mut sandwich = f64::INFINITY;
    let mut moment_cap = f64::INFINITY;
    let mut bracket = f64::INFINITY;
    let mut product = f64::INFINITY;
    for _ in 0..1000 {
        let q = 1 + (rng.next_u64() % 2) as u32;
        let m = rng.in_range(1e-6, 5.0);
        let rho = rng.in_range(1e-6, 10.0);
        let params = PhysicalParams::new(q, m).unwrap();
        let k_cl = params.k_cl();
        let eta = params.eta(rho);
        let j = j_m(rho, &params).unwrap();
        let jt = j_tilde_m(rho, &params).unwrap();
        let lead = k_cl * rho.powf(4.0 / 3.0);

        sandwich = sandwich.min((j - lead) / lead).min((lead + m * rho - j) / lead);
        let cap = lead + 9.0 / 16.0 * m * m / k_cl * rho.powf(2.0 / 3.0);
        moment_cap = moment_cap.min((cap - j) / cap);
        let mid = rho * (eta * eta + m * m).sqrt();
        bracket = bracket.min((mid - j) / mid).min((4.0 / 3.0 * j - mid) / mid);
        let prod = j * jt;
        let rho2 = rho * rho;
        product = product
            .min((prod - rho2) / rho2)
            .min((9.0 / 8.0 * rho2 - prod) / rho2);
    }
    let gate = -slack;
    vec![
        property(
            "kinetic-sandwich",
            sandwich >= gate,
            format!("1000 draws, worst margin {sandwich:+.3e}"),
        ),
        property(
            "kinetic-moment-cap",
            moment_cap >= gate,
            format!("1000 draws, worst margin {moment_cap:+.3e}"),
        ),
        property(
            "kinetic-fermi-bracket",
            bracket >= gate,
            format!("1000 draws, worst margin {bracket:+.3e}"),
        ),
        property(
            "kinetic-dual-product",
            product >= gate,
            format!("rho^2 <= j*j~ <= (9/8) rho^2, worst margin {product:+.3e}"),
        ),
    ]
}

fn kinetic_derivative() -> PropertyResult {
    let mut rng = SplitMix(0xC0FFEE_02);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let q = 1 + (rng.next_u64() % 2) as u32;
        let m = rng.in_range(1e-2, 5.0);
        let rho = rng.in_range(1e-2, 10.0);
        let params = PhysicalParams::new(q, m).unwrap();
        let h = 1e-5 * rho;
        let fd = (j_m(rho + h, &params).unwrap() - j_m(rho - h, &params).unwrap()) / (2.0 * h);
        let dj = dj_drho(rho, &params).unwrap();
        worst = worst.max((dj - fd).abs() / dj.abs());
    }
    property(
        "kinetic-derivative",
        worst <= 1e-6,
        format!("300 draws, worst relative FD deviation {worst:.3e}"),
    )
}

fn kinetic_convexity() -> PropertyResult {
    let mut rng = SplitMix(0xC0FFEE_03);
    let mut worst = f64::INFINITY;
    for _ in 0..300 {
        let q = 1 + (rng.next_u64() % 2) as u32;
        let m = rng.in_range(1e-3, 5.0);
        let params = PhysicalParams::new(q, m).unwrap();
        let a = rng.in_range(1e-4, 10.0);
        let b = rng.in_range(1e-4, 10.0);
        let t = rng.unit();
        let ja = j_m(a, &params).unwrap();
        let jb = j_m(b, &params).unwrap();
        let chord = t * ja + (1.0 - t) * jb;
        let mix = j_m(t * a + (1.0 - t) * b, &params).unwrap();
        worst = worst.min((chord - mix) / chord.max(1e-300));
        let sum = j_m(a + b, &params).unwrap();
        worst = worst.min((sum - ja - jb) / sum);
    }
    property(
        "kinetic-convexity",
        worst >= -1e-12,
        format!("chord and superadditivity margins >= {worst:+.3e}"),
    )
}

/// Closed-form Coulomb targets: the uniform unit ball on an edge-aligned
/// grid (exact quadrature) and the standard normal on the run grid.
fn coulomb_closed_forms(grid_n: usize, rmax: f64) -> PropertyResult {
    let ball_grid = match RadialGrid::uniform(801, 1.0) {
        Ok(g) => g,
        Err(e) => return property("coulomb-closed-forms", false, e.to_string()),
    };
    let ball = RadialDensity::from_fn(ball_grid, |_| 3.0 / (4.0 * PI)).unwrap();
    let d_ball = direct_energy(&ball).unwrap();
    let ball_dev = (d_ball - 0.6).abs() / 0.6;

    let grid = match RadialGrid::graded(grid_n, rmax, 1e-5) {
        Ok(g) => g,
        Err(e) => return property("coulomb-closed-forms", false, e.to_string()),
    };
    let gauss = RadialDensity::from_fn(grid, |r| (-0.5 * r * r).exp() / (2.0 * PI).powf(1.5))
        .unwrap();
    let d_gauss = direct_energy(&gauss).unwrap();
    let target = 1.0 / (2.0 * PI.sqrt());
    let gauss_dev = (d_gauss - target).abs() / target;

    property(
        "coulomb-closed-forms",
        ball_dev <= 1e-6 && gauss_dev <= 1e-5,
        format!("ball D dev {ball_dev:.3e} (<= 1e-6), gaussian D dev {gauss_dev:.3e} (<= 1e-5)"),
    )
}

fn profile_normalization(profile: &LaneEmdenProfile) -> PropertyResult {
    let q = profile.q_density();
    let mass_dev = (q.mass().powf(2.0 / 3.0) - 1.0).abs();
    let l43 = match chandra_core::grid::lp_norm(q, 4.0 / 3.0) {
        Ok(n) => n.powf(4.0 / 3.0),
        Err(e) => return property("profile-normalization", false, e.to_string()),
    };
    let l43_dev = (profile.sigma_f() * l43 - 1.0).abs();
    let d_dev = match direct_energy(q) {
        Ok(d) => (d - 1.0).abs(),
        Err(e) => return property("profile-normalization", false, e.to_string()),
    };
    let (on, off) = match profile.integral_identity_residual() {
        Ok(r) => r,
        Err(e) => return property("profile-normalization", false, e.to_string()),
    };
    property(
        "profile-normalization",
        mass_dev <= 1e-5 && l43_dev <= 1e-5 && d_dev <= 1e-5 && on <= 1e-5 && off >= -1e-5,
        format!(
            "|mass^(2/3)-1| {mass_dev:.1e}, |sigma_f l43-1| {l43_dev:.1e}, \
             |D-1| {d_dev:.1e}, stationarity {on:.1e}, off-support slack {off:+.1e}"
        ),
    )
}

/// Multiplier identity mu M = int j' rho - 2 tau D + int V rho on a
/// converged solve at 0.7 tau_c, together with the EL residuals.
fn multiplier_identity(ctx: &SolveContext, cfg: &RunConfig) -> PropertyResult {
    let tau = 0.7 * ctx.tau_c;
    let solved = match minimize(
        &ctx.grid,
        &ctx.params,
        &ctx.profile,
        tau,
        None,
        1.0,
        &cfg.solve_config(),
    ) {
        Ok(s) => s,
        Err(e) => return property("multiplier-identity", false, e.to_string()),
    };
    if !solved.converged {
        return property("multiplier-identity", false, "solve did not converge".into());
    }
    let scale = ctx.params.m().max(solved.mu.abs());
    let res = verify_el_residual(&solved.rho, solved.mu, tau, &ctx.params, None).unwrap();
    let gap = multiplier_identity_gap(&solved.rho, solved.mu, tau, &ctx.params, None).unwrap();
    property(
        "multiplier-identity",
        res.on_support <= 1e-6 * scale && res.off_support <= 1e-6 * scale && gap <= 1e-6,
        format!(
            "EL residuals {:.1e}/{:.1e} (scale {scale:.3}), identity gap {gap:.3e}",
            res.on_support, res.off_support
        ),
    )
}

/// Mass-coupling transfer: E at mass 1/2 and coupling tau equals half the
/// energy at mass 1 and coupling (1/2)^(2/3) tau; reported as the ratio
/// alpha, which must be 1/2 to 1e-4 relative.
fn mass_coupling_transfer(ctx: &SolveContext, cfg: &RunConfig) -> PropertyResult {
    let tau = 0.5 * ctx.tau_c;
    let scfg = cfg.solve_config();
    let half = match minimize(&ctx.grid, &ctx.params, &ctx.profile, tau, None, 0.5, &scfg) {
        Ok(s) => s,
        Err(e) => return property("mass-coupling-transfer", false, e.to_string()),
    };
    let unit_tau = 0.5f64.powf(2.0 / 3.0) * tau;
    let unit = match minimize(&ctx.grid, &ctx.params, &ctx.profile, unit_tau, None, 1.0, &scfg) {
        Ok(s) => s,
        Err(e) => return property("mass-coupling-transfer", false, e.to_string()),
    };
    if !(half.converged && unit.converged) {
        return property("mass-coupling-transfer", false, "solves did not converge".into());
    }
    let alpha = half.energy.total / unit.energy.total;
    let dev = (alpha / 0.5 - 1.0).abs();
    property(
        "mass-coupling-transfer",
        dev <= 1e-4,
        format!("alpha = {alpha:.8} (target 0.5, relative deviation {dev:.3e})"),
    )
}

/// At 1.05 tau_c the dilation trial energies must eventually decrease
/// without bound; the probe tail is required to be strictly decreasing.
fn supercritical_descent(ctx: &SolveContext) -> PropertyResult {
    let ells: Vec<f64> = (0..10).map(|k| 2f64.powi(k)).collect();
    let rows = match instability_probe(
        &ctx.profile,
        &ctx.params,
        1.05 * ctx.tau_c,
        None,
        &ells,
    ) {
        Ok(r) => r,
        Err(e) => return property("supercritical-descent", false, e.to_string()),
    };
    let tail = &rows[rows.len() - 5..];
    let decreasing = tail.windows(2).all(|w| w[1].1 < w[0].1);
    property(
        "supercritical-descent",
        decreasing && tail[4].1 < 0.0,
        format!(
            "E(l) tail at l = {:.0}..{:.0}: {:+.4e} -> {:+.4e}",
            tail[0].0, tail[4].0, tail[0].1, tail[4].1
        ),
    )
}

#[derive(Serialize)]
struct CheckRecord {
    all_pass: bool,
    properties: Vec<PropertyResult>,
}

pub fn cmd_check(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), Failure> {
    let ctx = SolveContext::build(cfg)?;
    let mut results = kinetic_bounds();
    results.push(kinetic_derivative());
    results.push(kinetic_convexity());
    results.push(coulomb_closed_forms(cfg.grid_n, cfg.rmax));
    results.push(profile_normalization(&ctx.profile));
    results.push(multiplier_identity(&ctx, cfg));
    results.push(mass_coupling_transfer(&ctx, cfg));
    results.push(supercritical_descent(&ctx));

    for r in &results {
        println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    let record = CheckRecord {
        all_pass: failed.is_empty(),
        properties: results,
    };
    let mut writer = ArtifactWriter::new(resolve_out_dir(out, "check"), "check", cfg)?;
    writer.write_json("check.json", &record)?;
    writer.finish()?;

    if !failed.is_empty() {
        return Err(Failure::Gate(format!(
            "failed invariants: {}",
            failed.join(", ")
        )));
    }
    println!("all {} properties pass", record.properties.len());
    Ok(())
}
