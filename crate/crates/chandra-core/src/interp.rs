//! Monotone cubic interpolation on a nondecreasing abscissa.
//!
//! Node slopes come from the derivative of the local quartic interpolant
//! (fourth-order accurate on smooth data) and are then passed through a
//! Hyman-style limiter: a slope is zeroed where the adjacent secants change
//! sign and clipped to three times the smaller adjacent secant otherwise.
//! The limited Hermite cubic stays inside the local data range on every
//! cell, so nonnegative data interpolates to nonnegative values.

use crate::error::{ChandraError, Result};

/// Piecewise-cubic Hermite interpolant with limited slopes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

/// Derivative at `xs[k]` of the polynomial interpolating `(xs[j], ys[j])`.
fn lagrange_derivative(xs: &[f64], ys: &[f64], k: usize) -> f64 {
    let n = xs.len();
    let mut d = 0.0;
    for j in 0..n {
        if j == k {
            // d/dx L_k(x_k) = sum over i != k of 1/(x_k - x_i).
            let mut s = 0.0;
            for i in 0..n {
                if i != k {
                    s += 1.0 / (xs[k] - xs[i]);
                }
            }
            d += ys[k] * s;
        } else {
            // d/dx L_j(x_k) = prod_{i != j,k} (x_k - x_i) / prod_{i != j} (x_j - x_i).
            let mut num = 1.0;
            let mut den = 1.0;
            for i in 0..n {
                if i != j {
                    den *= xs[j] - xs[i];
                    if i != k {
                        num *= xs[k] - xs[i];
                    }
                }
            }
            d += ys[j] * num / den;
        }
    }
    d
}

impl MonotoneCubic {
    /// Fits the interpolant. Requires at least two strictly increasing nodes
    /// and finite ordinates.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(ChandraError::Structure(
                "interpolation needs matching node/value arrays with >= 2 entries".into(),
            ));
        }
        for i in 1..n {
            if !(xs[i] > xs[i - 1]) {
                return Err(ChandraError::Structure(
                    "interpolation abscissa must be strictly increasing".into(),
                ));
            }
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(ChandraError::Structure(
                "interpolation ordinates must be finite".into(),
            ));
        }

        let secant = |i: usize| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);

        // Raw fourth-order slopes from a five-point (or shorter) stencil.
        let mut ds = vec![0.0; n];
        for k in 0..n {
            if n < 5 {
                let lo = 0;
                let hi = n;
                ds[k] = lagrange_derivative(&xs[lo..hi], &ys[lo..hi], k - lo);
            } else {
                let lo = k.saturating_sub(2).min(n - 5);
                ds[k] = lagrange_derivative(&xs[lo..lo + 5], &ys[lo..lo + 5], k - lo);
            }
        }

        // Hyman limiter: keeps each cell's Hermite cubic inside the local
        // data range (slope ratios land in the monotone box [0, 3]).
        for k in 0..n {
            let sl = if k > 0 { Some(secant(k - 1)) } else { None };
            let sr = if k + 1 < n { Some(secant(k)) } else { None };
            ds[k] = match (sl, sr) {
                (Some(a), Some(b)) => {
                    if a * b <= 0.0 {
                        0.0
                    } else {
                        let cap = 3.0 * a.abs().min(b.abs());
                        if ds[k] * a <= 0.0 {
                            0.0
                        } else {
                            ds[k].signum() * ds[k].abs().min(cap)
                        }
                    }
                }
                (None, Some(b)) | (Some(b), None) => {
                    if ds[k] * b <= 0.0 {
                        0.0
                    } else {
                        ds[k].signum() * ds[k].abs().min(3.0 * b.abs())
                    }
                }
                (None, None) => 0.0,
            };
        }

        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            ds,
        })
    }

    /// Evaluates the interpolant; clamps to the endpoint values outside the
    /// fitted range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // Cell index: largest i with xs[i] <= x.
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }
}
