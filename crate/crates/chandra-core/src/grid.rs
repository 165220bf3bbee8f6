//! Radial discretization of R^3 for spherically symmetric densities.
//!
//! A grid is a strictly increasing node set {r_i} on [0, r_max] with
//! quadrature weights for the measure 4 pi r^2 dr. Weights are assembled
//! per interval from the cubic Lagrange basis on a four-node stencil,
//! integrated against the exact measure (Gauss-Legendre of sufficient
//! order, so polynomial integrands are exact). Stencils are left-aligned,
//! which keeps every assembled node weight nonnegative; centered stencils
//! do not.
//!
//! The grid also caches per-interval weight tables for the measures
//! s^2 ds and s ds, from which the Newton potential is built by prefix
//! and suffix sums, and can produce weights for the singular measure
//! 4 pi r^{2-s} dr (analytic moments on the first cell).

use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{ChandraError, Result};
use crate::interp::MonotoneCubic;

/// 8-point Gauss-Legendre rule on [-1, 1]; exact for degree <= 15.
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_29,
    0.362_683_783_378_361_98,
    0.362_683_783_378_361_98,
    0.313_706_645_877_887_29,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Relative tolerance for the total-volume check sum(w) = 4/3 pi r_max^3.
const VOLUME_CHECK_TOL: f64 = 1e-10;

/// Values below `SUPPORT_REL_TOL * max(rho)` count as zero when flagging
/// compact support.
pub const SUPPORT_REL_TOL: f64 = 1e-14;

/// Radial quadrature grid with cached interval tables.
#[derive(Debug)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per interval i: integral of the four stencil cubics against s^2 ds.
    cell_w2: Vec<[f64; 4]>,
    /// Per interval i: integral of the four stencil cubics against s ds.
    cell_w1: Vec<[f64; 4]>,
    r_max: f64,
    descriptor: String,
}

/// First node of the four-node stencil serving interval `i` of `n` nodes.
/// Left-aligned: interval i uses nodes {j0 .. j0+3} with j0 = min(i, n-4).
#[inline]
fn stencil_start(i: usize, n: usize) -> usize {
    i.min(n - 4)
}

/// Cubic Lagrange basis values at local coordinate `t` for stencil node
/// offsets `ts` (local coordinates, strictly increasing).
#[inline]
fn lagrange4(ts: &[f64; 4], t: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        let mut v = 1.0;
        for j in 0..4 {
            if j != k {
                v *= (t - ts[j]) / (ts[k] - ts[j]);
            }
        }
        *o = v;
    }
    out
}

/// Monomial coefficients c of L_k(t) = c0 + c1 t + c2 t^2 + c3 t^3 on the
/// stencil with local node offsets `ts`.
fn lagrange4_coeffs(ts: &[f64; 4], k: usize) -> [f64; 4] {
    let mut num = [1.0, 0.0, 0.0, 0.0];
    let mut den = 1.0;
    for j in 0..4 {
        if j == k {
            continue;
        }
        den *= ts[k] - ts[j];
        // Multiply num by (t - ts[j]).
        let mut next = [0.0; 4];
        for (d, &c) in num.iter().enumerate() {
            next[d] -= c * ts[j];
            if d + 1 < 4 {
                next[d + 1] += c;
            }
        }
        num = next;
    }
    [num[0] / den, num[1] / den, num[2] / den, num[3] / den]
}

/// Assembles node weights for the measure `w(r) dr` on `nodes`, integrating
/// each interval's stencil cubics with Gauss-Legendre in interval-local
/// coordinates. Exact whenever L_k(t) w(r_i + t) is a polynomial of degree
/// <= 15 on each interval.
fn assemble_weights(nodes: &[f64], w: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let j0 = stencil_start(i, n);
        let base = nodes[j0];
        let ts = [
            nodes[j0] - base,
            nodes[j0 + 1] - base,
            nodes[j0 + 2] - base,
            nodes[j0 + 3] - base,
        ];
        let a = nodes[i] - base;
        let b = nodes[i + 1] - base;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for g in 0..8 {
            let t = mid + half * GL_X[g];
            let lk = lagrange4(&ts, t);
            let wt = GL_W[g] * half * w(base + t);
            for k in 0..4 {
                out[j0 + k] += lk[k] * wt;
            }
        }
    }
    out
}

/// Per-interval stencil weights (not accumulated to nodes) for `w(r) dr`.
fn cell_tables(nodes: &[f64], w: impl Fn(f64) -> f64) -> Vec<[f64; 4]> {
    let n = nodes.len();
    let mut out = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let j0 = stencil_start(i, n);
        let base = nodes[j0];
        let ts = [
            nodes[j0] - base,
            nodes[j0 + 1] - base,
            nodes[j0 + 2] - base,
            nodes[j0 + 3] - base,
        ];
        let a = nodes[i] - base;
        let b = nodes[i + 1] - base;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut cw = [0.0; 4];
        for g in 0..8 {
            let t = mid + half * GL_X[g];
            let lk = lagrange4(&ts, t);
            let wt = GL_W[g] * half * w(base + t);
            for k in 0..4 {
                cw[k] += lk[k] * wt;
            }
        }
        out.push(cw);
    }
    out
}

impl RadialGrid {
    /// Graded grid: the first (n-1)/2 interval widths grow geometrically
    /// from `r_first`, the remainder are uniform at the last geometric
    /// width. Captures both the r ~ 1e-5 scale of singular potentials and
    /// an O(10) support radius with n ~ 2e3 nodes.
    pub fn graded(n: usize, r_max: f64, r_first: f64) -> Result<Arc<Self>> {
        if n < 8 {
            return Err(ChandraError::GridConstruction(format!(
                "need at least 8 nodes, got {n}"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(ChandraError::GridConstruction(format!(
                "r_max must be positive and finite, got {r_max}"
            )));
        }
        let m = n - 1;
        if !(r_first > 0.0 && r_first * m as f64 <= r_max) {
            return Err(ChandraError::GridConstruction(format!(
                "r_first must satisfy 0 < r_first <= r_max/(n-1), got {r_first}"
            )));
        }
        let g = m / 2;
        let u = (m - g) as f64;

        // Total span as a function of the geometric ratio gamma.
        let span = |gamma: f64| -> f64 {
            let geo = if (gamma - 1.0).abs() < 1e-14 {
                g as f64
            } else {
                (gamma.powi(g as i32) - 1.0) / (gamma - 1.0)
            };
            r_first * (geo + u * gamma.powi(g as i32 - 1))
        };

        // span is increasing in gamma; bracket then bisect.
        let mut lo = 1.0;
        let mut hi = 1.0 + 1e-6;
        let mut expansions = 0;
        while span(hi) < r_max {
            hi = 1.0 + 2.0 * (hi - 1.0);
            expansions += 1;
            if expansions > 200 {
                return Err(ChandraError::GridConstruction(
                    "geometric ratio bracket failed to expand".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if span(mid) < r_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let gamma = 0.5 * (lo + hi);

        let mut nodes = Vec::with_capacity(n);
        nodes.push(0.0);
        let mut width = r_first;
        for k in 0..m {
            if k > 0 && k < g {
                width *= gamma;
            }
            nodes.push(nodes[k] + width);
        }
        // Pin the endpoint exactly; the bisection residual is O(1e-14 r_max).
        let scale = r_max / nodes[m];
        for r in nodes.iter_mut() {
            *r *= scale;
        }
        nodes[m] = r_max;

        let descriptor = format!("graded n={n} r_max={r_max} r_first={r_first} gamma={gamma:.12}");
        Self::from_nodes(nodes, descriptor)
    }

    /// Uniformly spaced grid on [0, r_max].
    pub fn uniform(n: usize, r_max: f64) -> Result<Arc<Self>> {
        if n < 8 {
            return Err(ChandraError::GridConstruction(format!(
                "need at least 8 nodes, got {n}"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(ChandraError::GridConstruction(format!(
                "r_max must be positive and finite, got {r_max}"
            )));
        }
        let h = r_max / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        nodes[n - 1] = r_max;
        let descriptor = format!("uniform n={n} r_max={r_max}");
        Self::from_nodes(nodes, descriptor)
    }

    /// Default production grid: n = 2048, r_max = 20, r_first = 1e-5.
    pub fn default_grid() -> Arc<Self> {
        Self::graded(2048, 20.0, 1e-5).expect("default grid parameters are valid")
    }

    fn from_nodes(nodes: Vec<f64>, descriptor: String) -> Result<Arc<Self>> {
        let n = nodes.len();
        let r_max = nodes[n - 1];
        let mut weights = assemble_weights(&nodes, |r| 4.0 * std::f64::consts::PI * r * r);

        // Invariants: total volume and weight nonnegativity.
        let total: f64 = weights.iter().sum();
        let volume = 4.0 / 3.0 * std::f64::consts::PI * r_max.powi(3);
        if (total - volume).abs() > VOLUME_CHECK_TOL * volume {
            return Err(ChandraError::GridConstruction(format!(
                "quadrature volume check failed: sum(w) = {total:.17e}, expected {volume:.17e}"
            )));
        }
        let wmax = weights.iter().fold(0.0_f64, |a, &b| a.max(b));
        for w in weights.iter_mut() {
            if *w < -1e-12 * wmax {
                return Err(ChandraError::GridConstruction(format!(
                    "negative quadrature weight {w:.3e}"
                )));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }

        let cell_w2 = cell_tables(&nodes, |r| r * r);
        let cell_w1 = cell_tables(&nodes, |r| r);

        Ok(Arc::new(Self {
            nodes,
            weights,
            cell_w2,
            cell_w1,
            r_max,
            descriptor,
        }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub(crate) fn cell_w2(&self) -> &[[f64; 4]] {
        &self.cell_w2
    }

    pub(crate) fn cell_w1(&self) -> &[[f64; 4]] {
        &self.cell_w1
    }

    /// 4 pi int f(r) r^2 dr over [0, r_max] for nodal values `f`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(ChandraError::Structure(format!(
                "value array length {} does not match grid size {}",
                values.len(),
                self.nodes.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Node weights for the singular measure 4 pi r^{2-s} dr, 0 < s < 3.
    /// The first interval starts at r = 0, where the integrand is not
    /// polynomial, so its stencil moments are computed analytically.
    pub fn power_weights(&self, s: f64) -> Result<Vec<f64>> {
        if !(s > 0.0 && s < 3.0) {
            return Err(ChandraError::Domain(format!(
                "power weight exponent must lie in (0, 3), got {s}"
            )));
        }
        let four_pi = 4.0 * std::f64::consts::PI;
        let mut out = assemble_weights(&self.nodes, |r| {
            if r <= 0.0 {
                0.0
            } else {
                four_pi * r.powf(2.0 - s)
            }
        });

        // Replace the first interval's contribution with analytic moments:
        // int_0^{r_1} L_k(t) t^{2-s} dt = sum_j c_{kj} r_1^{j+3-s} / (j+3-s).
        // The stencil for interval 0 starts at node 0, so local t = r.
        let ts = [self.nodes[0], self.nodes[1], self.nodes[2], self.nodes[3]];
        let r1 = self.nodes[1];
        // Subtract the Gauss-Legendre contribution of interval 0.
        {
            let half = 0.5 * r1;
            for g in 0..8 {
                let t = half + half * GL_X[g];
                let lk = lagrange4(&ts, t);
                let wt = GL_W[g] * half * four_pi * t.powf(2.0 - s);
                for k in 0..4 {
                    out[k] -= lk[k] * wt;
                }
            }
        }
        for k in 0..4 {
            let c = lagrange4_coeffs(&ts, k);
            let mut v = 0.0;
            for (j, &cj) in c.iter().enumerate() {
                let p = j as f64 + 3.0 - s;
                v += cj * r1.powf(p) / p;
            }
            out[k] += four_pi * v;
        }
        Ok(out)
    }
}

/// Returns true when the two grids share the same node set.
pub fn same_grid(a: &Arc<RadialGrid>, b: &Arc<RadialGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.nodes == b.nodes
}

/// Nonnegative spherically symmetric density sampled on a radial grid.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    support_radius: Option<f64>,
}

impl RadialDensity {
    /// Wraps nodal values; every value must be finite and >= 0.
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(ChandraError::Structure(format!(
                "density length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ChandraError::Structure(format!(
                "density values must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            grid,
            values,
            support_radius: None,
        })
    }

    /// Samples `f(r)` at the grid nodes, clamping tiny negative values to 0.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.nodes().iter().map(|&r| f(r).max(0.0)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, &b| a.max(b))
    }

    /// Total mass 4 pi int rho r^2 dr.
    pub fn mass(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Multiplies all values by `c >= 0` (used for exact mass renormalization).
    pub fn scale_values(&mut self, c: f64) -> Result<()> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(ChandraError::Domain(format!(
                "density scaling factor must be finite and >= 0, got {c}"
            )));
        }
        for v in self.values.iter_mut() {
            *v *= c;
        }
        Ok(())
    }

    /// Declared support radius, if the density has been flagged compact.
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// Records a support radius computed by a caller (e.g. the sub-cell
    /// boundary located by the Euler-Lagrange solver).
    pub fn set_support_radius(&mut self, r: f64) {
        self.support_radius = Some(r.min(self.grid.r_max()));
    }

    /// Flags compact support: zeroes every value at or beyond the last node
    /// whose value exceeds `SUPPORT_REL_TOL * max`, records the radius of
    /// that last substantive node, and returns it. Returns `None` (and
    /// leaves the density untouched) when the tail reaches the boundary.
    pub fn flag_compact_support(&mut self) -> Option<f64> {
        let n = self.values.len();
        let cutoff = SUPPORT_REL_TOL * self.max_value();
        let mut last = None;
        for (i, &v) in self.values.iter().enumerate() {
            if v > cutoff {
                last = Some(i);
            }
        }
        let last = last?;
        if last + 1 >= n {
            return None;
        }
        for v in self.values.iter_mut().skip(last + 1) {
            *v = 0.0;
        }
        let r = self.grid.nodes()[last];
        self.support_radius = Some(r);
        Some(r)
    }

    /// CSV serialization: two comment headers (grid descriptor, sha256 of
    /// the canonical bytes) then `r,rho` rows at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.grid.descriptor().as_bytes());
        for (&r, &v) in self.grid.nodes().iter().zip(&self.values) {
            hasher.update(r.to_le_bytes());
            hasher.update(v.to_le_bytes());
        }
        let hash = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in hash {
            let _ = write!(hex, "{byte:02x}");
        }

        let mut out = String::new();
        let _ = writeln!(out, "# grid: {}", self.grid.descriptor());
        let _ = writeln!(out, "# sha256: {hex}");
        let _ = writeln!(out, "r,rho");
        for (&r, &v) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{r:.16e},{v:.16e}");
        }
        out
    }
}

/// (int rho^p dV) for p > 0; the integrand is evaluated pointwise.
pub fn moment(rho: &RadialDensity, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "moment exponent must be positive and finite, got {p}"
        )));
    }
    let vals: Vec<f64> = rho.values().iter().map(|&v| v.powf(p)).collect();
    rho.grid().integrate(&vals)
}

/// L^p norm for p >= 1; for the quasi-norm exponent p = 2/3 returns the raw
/// integral int rho^{2/3} dV (no outer power), as used by the kinetic lower
/// bound and the collapse coefficient.
pub fn lp_norm(rho: &RadialDensity, p: f64) -> Result<f64> {
    if (p - 2.0 / 3.0).abs() < 1e-12 {
        return moment(rho, 2.0 / 3.0);
    }
    if p < 1.0 {
        return Err(ChandraError::Domain(format!(
            "lp_norm requires p >= 1 (or the 2/3 quasi-norm), got {p}"
        )));
    }
    if p == 1.0 {
        return Ok(rho.mass());
    }
    Ok(moment(rho, p)?.powf(1.0 / p))
}

/// L^p distance between densities on the same grid, p in {1, 4/3}.
pub fn lp_distance(a: &RadialDensity, b: &RadialDensity, p: f64) -> Result<f64> {
    if !same_grid(a.grid(), b.grid()) {
        return Err(ChandraError::Structure(
            "lp_distance requires densities on a common grid".into(),
        ));
    }
    if !(p == 1.0 || (p - 4.0 / 3.0).abs() < 1e-12) {
        return Err(ChandraError::Domain(format!(
            "lp_distance supports p in {{1, 4/3}}, got {p}"
        )));
    }
    let diff: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs().powf(p))
        .collect();
    Ok(a.grid().integrate(&diff)?.powf(1.0 / p))
}

/// Dilation resampling: returns ell^3 rho(ell r) sampled on `target`.
///
/// Interpolates rho^{1/3} (whose edge behavior at a free boundary is
/// Lipschitz) with a monotone cubic and cubes the result, so the output is
/// nonnegative and mass drifts only at the interpolation-error level.
/// Points with ell*r beyond the source support or source r_max map to 0.
pub fn rescale(rho: &RadialDensity, ell: f64, target: &Arc<RadialGrid>) -> Result<RadialDensity> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(ChandraError::Domain(format!(
            "rescale factor must be positive and finite, got {ell}"
        )));
    }
    if ell == 1.0 && same_grid(rho.grid(), target) {
        let mut out = rho.clone();
        out.grid = target.clone();
        return Ok(out);
    }

    let cbrt: Vec<f64> = rho.values().iter().map(|&v| v.cbrt()).collect();
    let interp = MonotoneCubic::fit(rho.grid().nodes(), &cbrt)?;
    let src_edge = rho
        .support_radius()
        .unwrap_or(f64::INFINITY)
        .min(rho.grid().r_max());
    let ell3 = ell * ell * ell;

    let values: Vec<f64> = target
        .nodes()
        .iter()
        .map(|&r| {
            let x = ell * r;
            if x > src_edge {
                0.0
            } else {
                let u = interp.eval(x).max(0.0);
                ell3 * u * u * u
            }
        })
        .collect();
    let mut out = RadialDensity::new(target.clone(), values)?;
    let edge = src_edge / ell;
    if edge < target.r_max() {
        out.set_support_radius(edge);
    }
    Ok(out)
}
