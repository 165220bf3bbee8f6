//! Cross-checks of production numerics against independent oracles:
//! a second ODE integrator for the density-profile frontier, brute-force
//! double quadrature for the direct energy, momentum-space quadrature for
//! the kinetic densities, and exact closed forms where they exist.

use chandra_core::coulomb::direct_energy;
use chandra_core::grid::{lp_distance, RadialDensity, RadialGrid};
use chandra_core::kinetic::{j_m, j_tilde_m, kinetic_energy, PhysicalParams};
use chandra_core::lane_emden::{solve_theta, LaneEmdenProfile};

const PI: f64 = std::f64::consts::PI;

/// SplitMix64: deterministic, dependency-free test RNG.
struct SplitMix(u64);

impl SplitMix {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

/// Midpoint (RK2) integration of theta'' + 2 theta'/xi = -theta^3 from a
/// series launch, returning (xi1, omega, i4) where xi1 is the first zero,
/// omega = -xi1^2 theta'(xi1), and i4 = int_0^xi1 theta^4 xi^2 dxi
/// (trapezoid along the march). Pure O(h^2), so a Richardson pair is exact
/// to O(h^3); entirely independent of the production RK4 integrator.
fn theta_frontier_rk2(h: f64) -> (f64, f64, f64) {
    let xi0: f64 = 1e-2;
    // theta = 1 - xi^2/6 + xi^4/40 - 19 xi^6/5040 + O(xi^8).
    let mut xi = xi0;
    let mut t = 1.0 - xi0 * xi0 / 6.0 + xi0.powi(4) / 40.0 - 19.0 * xi0.powi(6) / 5040.0;
    let mut p = -xi0 / 3.0 + xi0.powi(3) / 10.0 - 19.0 * xi0.powi(5) / 840.0;
    // int_0^xi0 theta^4 xi^2 = xi0^3/3 - 2 xi0^5/15 + 4 xi0^7/105 + ...
    let mut i4 = xi0.powi(3) / 3.0 - 2.0 * xi0.powi(5) / 15.0 + 4.0 * xi0.powi(7) / 105.0;

    let deriv = |xi: f64, t: f64, p: f64| -> (f64, f64) { (p, -t * t * t - 2.0 * p / xi) };
    loop {
        let f_prev = t.powi(4) * xi * xi;
        let (k1t, k1p) = deriv(xi, t, p);
        let (k2t, k2p) = deriv(xi + 0.5 * h, t + 0.5 * h * k1t, p + 0.5 * h * k1p);
        let (t_new, p_new, xi_new) = (t + h * k2t, p + h * k2p, xi + h);
        if t_new <= 0.0 {
            let alpha = t / (t - t_new);
            let xi1 = xi + alpha * h;
            let p_cross = p + alpha * (p_new - p);
            i4 += 0.5 * alpha * h * f_prev; // theta^4 vanishes quartically
            return (xi1, -xi1 * xi1 * p_cross, i4);
        }
        i4 += 0.5 * h * (f_prev + t_new.powi(4) * xi_new * xi_new);
        t = t_new;
        p = p_new;
        xi = xi_new;
    }
}

#[test]
fn profile_frontier_against_midpoint_richardson() {
    let (x1, o1, i1) = theta_frontier_rk2(1e-3);
    let (x2, o2, i2) = theta_frontier_rk2(5e-4);
    let xi1_o = (4.0 * x2 - x1) / 3.0;
    let omega_o = (4.0 * o2 - o1) / 3.0;
    let i4_o = (4.0 * i2 - i1) / 3.0;
    // Oracle self-consistency: the pair must already agree to ~h^2.
    assert!((x2 - x1).abs() < 1e-5, "oracle not in asymptotic regime");

    let sol = solve_theta(1e-13).unwrap();
    assert!(
        (sol.xi1() - xi1_o).abs() < 1e-6,
        "xi1: {} vs oracle {xi1_o}",
        sol.xi1()
    );
    assert!(
        (sol.omega() - omega_o).abs() < 1e-6 * omega_o,
        "omega: {} vs oracle {omega_o}",
        sol.omega()
    );

    // Sharp-constant closed form in terms of the frontier data alone.
    let sigma_o = 3.0 * (4.0 * PI).powf(1.0 / 3.0) / (4.0 * omega_o.powf(2.0 / 3.0));
    let grid = RadialGrid::default_grid();
    let profile = LaneEmdenProfile::build(&grid).unwrap();
    assert!(
        (profile.sigma_f() - sigma_o).abs() < 1e-6 * sigma_o,
        "sigma_f: {} vs oracle {sigma_o}",
        profile.sigma_f()
    );

    // 4/3-moment of the normalized profile: 4 pi amplitude^{4/3} a^3 i4.
    let l43_o =
        4.0 * PI * profile.amplitude().powf(4.0 / 3.0) * profile.length_scale().powi(3) * i4_o;
    assert!(
        (profile.l43_moment() - l43_o).abs() < 1e-6 * l43_o,
        "l43: {} vs oracle {l43_o}",
        profile.l43_moment()
    );
}

/// Brute-force direct energy of an analytic radial density by nested
/// trapezoid sums on a uniform grid:
/// D = (4 pi)^2 int_0^R r rho(r) [int_0^r s^2 rho(s) ds] dr.
fn direct_brute_force(rho: &dyn Fn(f64) -> f64, r_max: f64, n: usize) -> f64 {
    let h = r_max / n as f64;
    let mut cum = 0.0; // int_0^r s^2 rho(s) ds
    let mut outer = 0.0;
    let mut f_prev = 0.0; // r rho(r) cum at r = 0
    let mut g_prev = 0.0; // s^2 rho(s) at s = 0
    for i in 1..=n {
        let r = i as f64 * h;
        let g = r * r * rho(r);
        cum += 0.5 * h * (g_prev + g);
        g_prev = g;
        let f = r * rho(r) * cum;
        outer += 0.5 * h * (f_prev + f);
        f_prev = f;
    }
    (4.0 * PI).powi(2) * outer
}

#[test]
fn direct_energy_against_double_quadrature() {
    let grid = RadialGrid::default_grid();
    let mut rng = SplitMix(0x5EED_0001);
    for trial in 0..5 {
        // Positive analytic mixture of three off-center Gaussians.
        let mut comps = [[0.0_f64; 3]; 3];
        for c in comps.iter_mut() {
            *c = [
                rng.in_range(0.1, 1.0),
                rng.in_range(0.5, 4.0),
                rng.in_range(0.0, 1.5),
            ];
        }
        let f = move |r: f64| -> f64 {
            comps
                .iter()
                .map(|&[a, b, c]| a * (-b * (r - c) * (r - c)).exp())
                .sum()
        };
        let d1 = direct_brute_force(&f, grid.r_max(), 20_000);
        let d2 = direct_brute_force(&f, grid.r_max(), 40_000);
        let d_oracle = (4.0 * d2 - d1) / 3.0; // trapezoid Richardson: O(h^4)
        assert!((d2 - d1).abs() < 1e-6 * d_oracle, "oracle pair disagrees");

        let rho = RadialDensity::from_fn(grid.clone(), f).unwrap();
        let d = direct_energy(&rho).unwrap();
        assert!(
            (d - d_oracle).abs() < 1e-6 * d_oracle,
            "trial {trial}: {d} vs oracle {d_oracle}"
        );
    }
}

/// Composite-Simpson momentum integral (q / 2 pi^2) int_0^eta p^2 f(p) dp.
fn momentum_integral(eta: f64, q: f64, n: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let h = eta / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let a = i as f64 * h;
        let m = a + 0.5 * h;
        let b = a + h;
        acc += h / 6.0 * (a * a * f(a) + 4.0 * m * m * f(m) + b * b * f(b));
    }
    q / (2.0 * PI * PI) * acc
}

#[test]
fn kinetic_densities_against_momentum_quadrature() {
    let mut rng = SplitMix(0x5EED_0002);
    for _ in 0..200 {
        let q = 1 + (rng.next_u64() % 4) as u32;
        let m = rng.in_range(1e-3, 3.0);
        let rho = 10f64.powf(rng.in_range(-8.0, 3.0));
        let p = PhysicalParams::new(q, m).unwrap();
        let eta = p.eta(rho);

        let sqrt_f = |x: f64| (x * x + m * m).sqrt();
        let inv_f = |x: f64| 1.0 / (x * x + m * m).sqrt();
        // The pair gate sits above the sequential-summation roundoff of
        // ~n eps, not at the (far smaller) Simpson truncation error.
        let refine = |f: &dyn Fn(f64) -> f64| -> f64 {
            let a = momentum_integral(eta, q as f64, 2_000, f);
            let b = momentum_integral(eta, q as f64, 4_000, f);
            assert!((b - a).abs() <= 1e-11 * b.abs().max(1e-300), "Simpson pair");
            (16.0 * b - a) / 15.0
        };

        let j = j_m(rho, &p).unwrap();
        let j_o = refine(&sqrt_f);
        assert!(
            (j - j_o).abs() < 5e-11 * j_o,
            "j(q={q}, m={m}, rho={rho:e}): {j} vs {j_o}"
        );
        let jt = j_tilde_m(rho, &p).unwrap();
        let jt_o = refine(&inv_f);
        assert!(
            (jt - jt_o).abs() < 5e-11 * jt_o,
            "j~(q={q}, m={m}, rho={rho:e}): {jt} vs {jt_o}"
        );
    }
}

#[test]
fn unit_mass_closed_forms() {
    // Unit-mass ball of radius 1 on a grid ending at the edge: the density
    // is constant on the whole grid, so the quadrature sees a polynomial
    // and both energies are exact.
    let ball_grid = RadialGrid::uniform(512, 1.0).unwrap();
    let c = 3.0 / (4.0 * PI);
    let ball = RadialDensity::from_fn(ball_grid, |_| c).unwrap();
    assert!((ball.mass() - 1.0).abs() < 1e-12);
    let d_ball = direct_energy(&ball).unwrap();
    assert!((d_ball - 0.6).abs() < 1e-11, "ball direct: {d_ball}");
    let p = PhysicalParams::new(2, 1.0).unwrap();
    let k_ball = kinetic_energy(&ball, &p).unwrap();
    let k_exact = 4.0 * PI / 3.0 * j_m(c, &p).unwrap();
    assert!((k_ball - k_exact).abs() < 1e-12 * k_exact, "ball kinetic: {k_ball}");

    // Standard normal density: D = 1 / (2 sqrt(pi)). The default graded
    // grid carries the O(h^4) quadrature error of a smooth integrand,
    // measured at ~2e-8 relative.
    let grid = RadialGrid::default_grid();
    let norm = (2.0 * PI).powf(-1.5);
    let gauss = RadialDensity::from_fn(grid, move |r| norm * (-0.5 * r * r).exp()).unwrap();
    assert!((gauss.mass() - 1.0).abs() < 1e-7);
    let d_gauss = direct_energy(&gauss).unwrap();
    let d_exact = 1.0 / (2.0 * PI.sqrt());
    assert!(
        (d_gauss - d_exact).abs() < 1e-7 * d_exact,
        "gaussian direct: {d_gauss} vs {d_exact}"
    );
}

#[test]
fn two_ball_l1_distance() {
    // Unit-mass balls of radii 1 and 2: int |rho_1 - rho_2| = 7/4. The
    // integrand is an indicator, so the interior jump at r = 1 costs O(h)
    // in the edge cells; the outer edge coincides with the grid end.
    let grid = RadialGrid::uniform(16_385, 2.0).unwrap();
    let c1 = 3.0 / (4.0 * PI);
    let c2 = c1 / 8.0;
    let b1 = RadialDensity::from_fn(grid.clone(), |r| if r <= 1.0 { c1 } else { 0.0 }).unwrap();
    let b2 = RadialDensity::from_fn(grid, |_| c2).unwrap();
    let l1 = lp_distance(&b1, &b2, 1.0).unwrap();
    assert!((l1 - 1.75).abs() < 1e-3, "two-ball L1: {l1}");
}

#[test]
fn massless_limit_is_continuous() {
    // j at m = 1e-5 differs from the massless form by O(m^2/eta^2)
    // relative; for j~ the deviation is log-enhanced, (m^2/eta^2) ln(eta/m),
    // which reaches ~1e-8 at rho = 1e-3.
    let p0 = PhysicalParams::new(2, 0.0).unwrap();
    let pm = PhysicalParams::new(2, 1e-5).unwrap();
    for &rho in &[1e-3, 1.0, 100.0] {
        let j0 = j_m(rho, &p0).unwrap();
        let jm = j_m(rho, &pm).unwrap();
        assert!((jm - j0).abs() < 1e-8 * j0, "rho={rho}: {jm} vs {j0}");
        let jt0 = j_tilde_m(rho, &p0).unwrap();
        let jtm = j_tilde_m(rho, &pm).unwrap();
        assert!((jtm - jt0).abs() < 1e-7 * jt0, "rho={rho}: {jtm} vs {jt0}");
    }
}

#[test]
fn theta_moments_are_resolution_independent() {
    // l23 has no closed form and is computed by theta-grid quadrature;
    // doubling the theta resolution must not move it.
    let grid = RadialGrid::default_grid();
    let sol = std::sync::Arc::new(solve_theta(1e-13).unwrap());
    let p1 = LaneEmdenProfile::build_with(sol.clone(), &grid, 4_096).unwrap();
    let p2 = LaneEmdenProfile::build_with(sol, &grid, 8_192).unwrap();
    let (a, b) = (p1.l23_moment(), p2.l23_moment());
    assert!((a - b).abs() < 1e-9 * b, "l23 moved under refinement: {a} vs {b}");
    let (da, db) = (p1.direct(), p2.direct());
    assert!((da - db).abs() < 1e-9 * db, "direct moved under refinement");
}
