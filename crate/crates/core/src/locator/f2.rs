//! Three-center generator `F₂(G) = ∬ P₂ dR₁ dR₂` over the blockade-free
//! domain.
//!
//! The six-dimensional integral is split into a shape part and a scale part.
//! A configuration is `(R₁, R₂) = ρ·(shape)`; the couplings scale as `ρ⁻³`,
//! so with `t = ρ⁻³` the measure becomes `(1/3) t⁻³ dt dΩ_shape` and the
//! `t`-integral along each ray is one-dimensional and done adaptively. The
//! shape integral uses scrambled Sobol points.
//!
//! The integrand peaks where any of the three separations `|R₁|`, `|R₂|`,
//! `|R₁ − R₂|` is small. A partition of unity `w_k = e_k⁻ᵖ / Σ e_j⁻ᵖ` splits
//! it into three charts; chart `k` uses hyperspherical coordinates in which
//! `e_k` is the small radius, so each peak sits at a coordinate boundary where
//! the Jacobian damps it.

use super::f1::p1;
use crate::analytic::anisotropy;
use crate::error::{invalid, Result};
use crate::quad::{integrate, Estimate, Tolerance};
use crate::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Reference value of `F₂(G)/G²` at `r_b = 0`.
pub const F2_CONSTANT: Complex64 = Complex64::new(-1.22338, 1.63759);

/// Ray integrals span `τ = t·max|c| ∈ [e^{-LOG_TAU_LO}, e^{LOG_TAU_HI}]`.
const LOG_TAU_LO: f64 = 32.0;
const LOG_TAU_HI: f64 = 24.0;

/// Second-order kernel `P₂(A₁, A₁₂, A₂, A₁₂₃)`: all three-center journeys
/// minus those already generated by `F₁`.
pub fn p2(a1: Complex64, a12: Complex64, a2: Complex64, a123: Complex64) -> Complex64 {
    let s = a1 + a12 + a2 + 2.0 * a123;
    let (q1, q12, q2) = (p1(a1), p1(a12), p1(a2));
    0.5 * ((a1 + a2 + 2.0 * a123) / (1.0 - s) - q1 - q1 / (1.0 - a1) * (q12 + q2) - (q1 + q12) * q2 / (1.0 - a2) - q2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F2Settings {
    /// Sobol points per replicate and chart (at most 2¹⁶).
    pub points: u32,
    /// Independently scrambled replicates; their spread gives the error.
    pub replicates: u32,
    pub seed: u32,
    /// Exponent of the partition of unity.
    pub partition_power: i32,
    /// Relative tolerance of each ray integral.
    pub ray_tolerance: f64,
}

impl Default for F2Settings {
    fn default() -> Self {
        Self {
            points: 4096,
            replicates: 4,
            seed: 1,
            partition_power: 4,
            ray_tolerance: 1e-8,
        }
    }
}

impl F2Settings {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || self.points > 1 << 16 {
            return Err(invalid("f2.points", "must be in 1..=65536"));
        }
        if self.replicates < 2 {
            return Err(invalid("f2.replicates", "need at least 2 for an error estimate"));
        }
        if self.partition_power < 1 {
            return Err(invalid("f2.partition_power", "must be positive"));
        }
        if !(self.ray_tolerance > 0.0) {
            return Err(invalid("f2.ray_tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// One shape: couplings at unit scale, the smallest separation and the
/// quadrature weight (partition weight times Jacobian over point count).
#[derive(Debug, Clone, Copy)]
struct Shape {
    c1: f64,
    c2: f64,
    c12: f64,
    e_min: f64,
    weight: f64,
}

fn coupling(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (anisotropy((v[2] / r).clamp(-1.0, 1.0)).unwrap() / r.powi(3), r)
}

fn shapes(settings: &F2Settings, replicate: u32) -> Vec<Shape> {
    let m = settings.points;
    let p = settings.partition_power;
    // β ∈ (0, π/2), u_B, u_S ∈ (−1, 1), φ ∈ (0, 2π); the azimuth of B is
    // integrated trivially
    let volume = (PI / 2.0) * 2.0 * 2.0 * (2.0 * PI) * (2.0 * PI);
    let mut out = Vec::with_capacity(3 * m as usize);
    for chart in 0..3u32 {
        let seed = crate::rng::stream_seed(settings.seed as u64, (replicate * 3 + chart) as u64) as u32;
        for i in 0..m {
            let x = sobol_burley::sample_4d(i, 0, seed).map(|v| v as f64 + 0.5 / (1u64 << 24) as f64);
            let beta = 0.5 * PI * x[0];
            let (ub, us) = (2.0 * x[1] - 1.0, 2.0 * x[2] - 1.0);
            let phi = 2.0 * PI * x[3];
            let (cb, sb) = (beta.cos(), beta.sin());
            let (rb_, rs) = ((1.0 - ub * ub).sqrt(), (1.0 - us * us).sqrt());
            let big = [cb * rb_, 0.0, cb * ub];
            let small = [sb * rs * phi.cos(), sb * rs * phi.sin(), sb * us];
            let (r1, r2) = match chart {
                0 => (small, big),
                1 => (big, small),
                _ => (big, [big[0] + small[0], big[1] + small[1], big[2] + small[2]]),
            };
            let d = [r2[0] - r1[0], r2[1] - r1[1], r2[2] - r1[2]];
            let (c1, e1) = coupling(r1);
            let (c2, e2) = coupling(r2);
            let (c12, e12) = coupling(d);
            let e = [e1, e2, e12];
            let part = e[chart as usize].powi(-p) / e.iter().map(|v| v.powi(-p)).sum::<f64>();
            let jac = cb * cb * sb * sb;
            out.push(Shape {
                c1,
                c2,
                c12,
                e_min: e1.min(e2).min(e12),
                weight: part * jac * volume / m as f64,
            });
        }
    }
    out
}

/// Evaluates `F₂(G)` on a fixed point set, so repeated calls inside a
/// self-consistency loop see a deterministic function of `G`.
#[derive(Debug, Clone)]
pub struct F2Integrator {
    rb: f64,
    settings: F2Settings,
    replicates: Vec<Vec<Shape>>,
}

impl F2Integrator {
    pub fn new(rb: f64, settings: F2Settings) -> Result<Self> {
        settings.validate()?;
        if !(rb >= 0.0) || !rb.is_finite() {
            return Err(invalid("blockade_radius", "must be a finite nonnegative number"));
        }
        let replicates = (0..settings.replicates).map(|r| shapes(&settings, r)).collect();
        Ok(Self { rb, settings, replicates })
    }

    fn ray(&self, s: &Shape, g: Complex64) -> Complex64 {
        let cm = s.c1.abs().max(s.c2.abs()).max(s.c12.abs());
        if cm == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let y_lo = -LOG_TAU_LO - cm.ln();
        let mut y_hi = LOG_TAU_HI - cm.ln();
        if self.rb > 0.0 {
            // |R| = ρ·e > r_b ⇔ t < (e/r_b)³
            y_hi = y_hi.min(3.0 * (s.e_min / self.rb).ln());
        }
        if y_hi <= y_lo {
            return Complex64::new(0.0, 0.0);
        }
        let g2 = g * g;
        let g3 = g2 * g;
        let f = |y: f64| {
            let t = y.exp();
            let t2 = t * t;
            let a1 = g2 * (s.c1 * s.c1 * t2);
            let a2 = g2 * (s.c2 * s.c2 * t2);
            let a12 = g2 * (s.c12 * s.c12 * t2);
            let a123 = g3 * (s.c1 * s.c12 * s.c2 * t2 * t);
            p2(a1, a12, a2, a123) / (3.0 * t2)
        };
        let tol = Tolerance {
            abs: 0.0,
            rel: self.settings.ray_tolerance,
            max_intervals: 400,
        };
        integrate(f, y_lo, y_hi, tol).value
    }

    /// `F₂(G)` with the replicate standard error as `error`.
    pub fn eval(&self, g: Complex64) -> Estimate<Complex64> {
        let means: Vec<Complex64> = self
            .replicates
            .iter()
            .map(|shapes| shapes.par_iter().map(|s| s.weight * self.ray(s, g)).sum::<Complex64>())
            .collect();
        let k = means.len() as f64;
        let mean = means.iter().sum::<Complex64>() / k;
        let var = means.iter().map(|m| (m - mean).norm_sqr()).sum::<f64>() / (k - 1.0);
        let error = (var / k).sqrt();
        Estimate {
            value: mean,
            error,
            converged: error <= 0.01 * mean.norm(),
            evaluations: self.replicates.iter().map(Vec::len).sum(),
        }
    }

    pub fn blockade_radius(&self) -> f64 {
        self.rb
    }
}

/// `F₂(G)`: the reference constant times `G²` for `r_b = 0`, otherwise the
/// quasi-Monte-Carlo integral. Builds a fresh point set on each call; use
/// [`F2Integrator`] in loops.
pub fn f2(g: Complex64, rb: f64, settings: &F2Settings) -> Result<Estimate<Complex64>> {
    if rb == 0.0 {
        return Ok(Estimate {
            value: F2_CONSTANT * g * g,
            error: 0.0,
            converged: true,
            evaluations: 0,
        });
    }
    Ok(F2Integrator::new(rb, *settings)?.eval(g))
}

/// Numerical estimate of `F₂(G)/G²` at `r_b = 0`, evaluated at `G = g`.
pub fn f2_constant(g: Complex64, settings: &F2Settings) -> Result<Estimate<Complex64>> {
    let est = F2Integrator::new(0.0, *settings)?.eval(g);
    let g2 = g * g;
    Ok(Estimate {
        value: est.value / g2,
        error: est.error / g2.norm(),
        ..est
    })
}
