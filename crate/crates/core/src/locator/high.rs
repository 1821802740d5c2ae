//! High-concentration self-energy: the sum of non-recurring loop diagrams,
//! written through the Fourier transform of the truncated dipolar potential.

use crate::error::{invalid, Result};
use crate::quad::{gauss_legendre_on, integrate_pieces, Tolerance};
use crate::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Spherical Bessel function `j₁(x)`, with its series near the origin.
pub fn j1(x: f64) -> f64 {
    if x.abs() < 0.1 {
        return x / 3.0 * series(x * x);
    }
    (x.sin() / x - x.cos()) / x
}

/// `3 j₁(x)/x` as a power series in `x²`, good to 1e-15 for `|x| < 0.1`.
fn series(x2: f64) -> f64 {
    1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0 * (1.0 - x2 / 88.0)))
}

/// `3 j₁(x)/x`, equal to one at the origin.
fn envelope(x: f64) -> f64 {
    if x.abs() < 0.1 {
        return series(x * x);
    }
    3.0 * j1(x) / x
}

/// Fourier transform of `V` restricted to `|R| > r_b`, at `|K| = k` and
/// `u = K_z/K`.
pub fn fourier_w(k: f64, u: f64, rb: f64) -> f64 {
    4.5 * 3f64.sqrt() * (1.0 / 3.0 - u * u) * envelope(k * rb)
}

/// First positive zero of `j₁` (`tan x = x`), by bisection on `[π, 3π/2)`.
pub fn j1_first_root() -> f64 {
    let (mut lo, mut hi) = (PI, 1.5 * PI - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if j1(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighSettings {
    /// Truncation `x_max = K_max r_b` of the radial integral.
    pub x_max: f64,
    /// Gauss-Legendre nodes for `u ∈ [0, 1]`, split at `u = 1/√3`.
    pub u_nodes: usize,
    pub tolerance: f64,
}

impl Default for HighSettings {
    fn default() -> Self {
        Self {
            x_max: 200.0,
            u_nodes: 64,
            tolerance: 1e-11,
        }
    }
}

impl HighSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 10.0) {
            return Err(invalid("high.x_max", "must exceed 10"));
        }
        if self.u_nodes < 4 {
            return Err(invalid("high.u_nodes", "need at least 4 nodes"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("high.tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// Self-energy and the size of the analytic tail that was added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergy {
    pub value: Complex64,
    pub tail: Complex64,
    pub quadrature_error: f64,
}

/// `Σ(G)` with `zG = 1 + G Σ(G)`:
///
/// `Σ(G) = (1/(2π² r_b³)) ∫₀¹ du ∫₀^∞ x² G W²/(1 − G W) dx`, `x = K r_b`.
///
/// Beyond `x_max = X` the integrand is `G·9c_u² j₁(x)²` to leading order (with
/// `W = c_u·3j₁(x)/x`, `∫₀¹ c_u² du = 5.4`), and
/// `∫_X^∞ j₁² dx = 1/(2X) − sin(2X)/(4X²) + O(X⁻³)`; this is added as the tail.
pub fn self_energy(g: Complex64, rb: f64, settings: &HighSettings) -> Result<SelfEnergy> {
    if !(rb > 0.0) {
        return Err(invalid("blockade_radius", "the high-concentration equation needs r_b > 0"));
    }
    settings.validate()?;
    let u0 = 1.0 / 3f64.sqrt();
    let half = settings.u_nodes / 2;
    let (mut nodes, mut weights) = gauss_legendre_on(half, 0.0, u0);
    let (n2, w2) = gauss_legendre_on(settings.u_nodes - half, u0, 1.0);
    nodes.extend(n2);
    weights.extend(w2);
    // break points at every half period of the oscillation
    let mut pts = vec![0.0];
    let mut x = 0.5 * PI;
    while x < settings.x_max {
        pts.push(x);
        x += 0.5 * PI;
    }
    pts.push(settings.x_max);
    let tol = Tolerance {
        abs: settings.tolerance,
        rel: settings.tolerance,
        max_intervals: 20 * pts.len(),
    };
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for (&u, &wu) in nodes.iter().zip(&weights) {
        let est = integrate_pieces(
            &mut |x: f64| {
                let w = fourier_w(x, u, 1.0);
                x * x * g * w * w / (1.0 - g * w)
            },
            &pts,
            tol,
        );
        total += wu * est.value;
        err += wu * est.error;
    }
    let xm = settings.x_max;
    let tail = g * 48.6 * (0.5 / xm - (2.0 * xm).sin() / (4.0 * xm * xm));
    let scale = 1.0 / (2.0 * PI * PI * rb.powi(3));
    Ok(SelfEnergy {
        value: scale * (total + tail),
        tail: scale * tail,
        quadrature_error: scale * err,
    })
}
