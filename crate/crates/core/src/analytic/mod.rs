//! Closed-form reference densities, moments and spacing laws.

mod coupling;
mod hyp2f1;

pub use coupling::{coupling_pdf, coupling_pdf_quadrature, coupling_support};
pub use hyp2f1::{hyp2f1_special, Hyp2f1Case};

use crate::error::{invalid, Error, Result};
use crate::A_COEF;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Normalization of the Δ distance: `ξ = ‖f_P − f_WD‖₂`, computed once by
/// adaptive quadrature of the two closed-form spacing laws (see tests).
pub const XI: f64 = 0.473_043_724_670_902;

/// Geometry of an `N`-atom cloud with blockade radius `r_b` (units ρ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub n_atoms: usize,
    pub blockade_radius: f64,
    /// Cloud diameter `d = 2(3N/4π)^{1/3}`.
    pub d: f64,
    /// `b = d / r_b`; infinite for `r_b = 0`.
    pub b: f64,
    /// Probability that two uniform points in the ball are farther apart
    /// than `r_b`.
    pub chi: f64,
}

impl GeometryParams {
    pub fn new(n_atoms: usize, blockade_radius: f64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("n_atoms", "must be at least 1"));
        }
        if !(blockade_radius >= 0.0) || !blockade_radius.is_finite() {
            return Err(invalid("blockade_radius", "must be a finite nonnegative number"));
        }
        let d = (6.0 * n_atoms as f64 / PI).cbrt();
        if blockade_radius >= d {
            return Err(invalid("blockade_radius", "exceeds the cloud diameter"));
        }
        let s = blockade_radius / d;
        let chi = 1.0 - s.powi(3) * (8.0 - 9.0 * s + 2.0 * s.powi(3));
        let b = if blockade_radius > 0.0 { d / blockade_radius } else { f64::INFINITY };
        Ok(Self { n_atoms, blockade_radius, d, b, chi })
    }

    pub fn cloud_radius(&self) -> f64 {
        0.5 * self.d
    }
}

/// `(9√3/8π)(3u² − 1)`, the angular factor of the dipolar coupling.
pub fn anisotropy(u: f64) -> Result<f64> {
    if !(u.abs() <= 1.0) {
        return Err(Error::Domain(format!("anisotropy needs |u| <= 1, got {u}")));
    }
    Ok(A_COEF / 3.0 * (3.0 * u * u - 1.0))
}

fn radial_poly(s: f64) -> f64 {
    s.powi(3) * (8.0 - 9.0 * s + 2.0 * s.powi(3))
}

/// Density of the distance between two independent uniform points of the
/// cloud, conditioned on exceeding `r_b`.
pub fn pair_distance_pdf(r: f64, p: &GeometryParams) -> f64 {
    if r <= p.blockade_radius || r > p.d {
        return 0.0;
    }
    let s = r / p.d;
    12.0 * s * s * (1.0 - s).powi(2) * (2.0 + s) / (p.chi * p.d)
}

pub fn pair_distance_cdf(r: f64, p: &GeometryParams) -> f64 {
    if r <= p.blockade_radius {
        return 0.0;
    }
    if r >= p.d {
        return 1.0;
    }
    let sb = p.blockade_radius / p.d;
    ((radial_poly(r / p.d) - radial_poly(sb)) / p.chi).clamp(0.0, 1.0)
}

/// Inverse of [`pair_distance_cdf`] to 1e-12 absolute in `r`: Newton steps
/// on the cdf, falling back to bisection whenever a step leaves the bracket.
pub fn pair_distance_quantile(x: f64, p: &GeometryParams) -> f64 {
    if x <= 0.0 {
        return p.blockade_radius;
    }
    if x >= 1.0 {
        return p.d;
    }
    let mut lo = p.blockade_radius;
    let mut hi = p.d;
    let mut r = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = pair_distance_cdf(r, p) - x;
        if f < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let slope = pair_distance_pdf(r, p);
        let mut next = r - f / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() < 1e-13 || hi - lo < 1e-12 {
            return next;
        }
        r = next;
    }
    r
}

/// Variance of an off-diagonal coupling. Diverges like `r_b^{-3}` as the
/// blockade vanishes, so `r_b = 0` is a domain error.
pub fn coupling_variance(p: &GeometryParams) -> Result<f64> {
    if p.blockade_radius <= 0.0 {
        return Err(Error::Domain("coupling variance diverges for r_b = 0".into()));
    }
    let b = p.b;
    let n = p.n_atoms as f64;
    let num = 27.0 * b.powi(6) * (5.0 + b * b * (-9.0 + 4.0 * b) + 6.0 * b.ln());
    let den = 160.0 * n * n * (-2.0 + b * b * (9.0 - 8.0 * b + b.powi(4)));
    Ok(num / den)
}

pub fn poisson_spacing(s: f64) -> f64 {
    if s < 0.0 { 0.0 } else { (-s).exp() }
}

pub fn wigner_spacing(s: f64) -> f64 {
    if s < 0.0 { 0.0 } else { 0.5 * PI * s * (-0.25 * PI * s * s).exp() }
}

/// Semicircle law of half-width `lambda_w`.
pub fn semicircle(lambda: f64, lambda_w: f64) -> Result<f64> {
    if !(lambda_w > 0.0) {
        return Err(Error::Domain("semicircle needs a positive radius".into()));
    }
    if lambda.abs() >= lambda_w {
        return Ok(0.0);
    }
    Ok(2.0 / (PI * lambda_w * lambda_w) * (lambda_w * lambda_w - lambda * lambda).sqrt())
}

pub fn semicircle_cdf(lambda: f64, lambda_w: f64) -> f64 {
    let x = (lambda / lambda_w).clamp(-1.0, 1.0);
    0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / PI
}

/// Semicircle radius obtained by matching the GOE variance to the coupling
/// variance: `Λ_W = √(2N) σ` with `σ²/2 = var(H_ij)`.
pub fn lambda_w(p: &GeometryParams) -> Result<f64> {
    let b = p.b;
    if p.blockade_radius <= 0.0 {
        return Err(Error::Domain("the semicircle radius diverges for r_b = 0".into()));
    }
    let n = p.n_atoms as f64;
    let inner = 3.0 * b.powi(6) * (5.0 + b * b * (-9.0 + 4.0 * b) + 6.0 * b.ln())
        / (10.0 * n * (-2.0 + b * b * (9.0 - 8.0 * b + b.powi(4))));
    Ok(1.5 * inner.sqrt())
}

/// GOE scale whose off-diagonal variance equals the coupling variance.
pub fn goe_sigma(p: &GeometryParams) -> Result<f64> {
    Ok((2.0 * coupling_variance(p)?).sqrt())
}
