//! Two-center generator `F₁(G) = ∫ P₁(G² V²(R)) dR` over `|R| > r_b`.

use crate::analytic::anisotropy;
use crate::quad::{integrate_pieces, Tolerance};
use crate::{Complex64, A_COEF};
use std::f64::consts::PI;

/// `P₁(A) = A/(1 − A)`, the sum of all back-and-forth hops on one pair.
pub fn p1(a: Complex64) -> Complex64 {
    a / (1.0 - a)
}

fn arcoth(w: Complex64) -> Complex64 {
    0.5 * ((w + 1.0) / (w - 1.0)).ln()
}

/// Closed form of `F₁` with principal square roots and `arcoth`. For
/// `r_b = 0` it is `−iπG`.
pub fn f1(g: Complex64, rb: f64) -> Complex64 {
    if rb == 0.0 {
        return -Complex64::i() * PI * g;
    }
    let rb3 = rb.powi(3);
    let ratio = rb3 / (A_COEF * g);
    let mut sum = Complex64::new(0.0, 0.0);
    for sign in [1.0, -1.0] {
        let w = (1.0 / 3.0 + sign * ratio).sqrt();
        sum += (0.5 * ratio - sign / 3.0) * w * arcoth(w);
    }
    8.0 * PI * rb3 / 9.0 - 3.0 * 3f64.sqrt() * g * sum
}

/// `F₁` from its defining integral. The radial part is done in closed form,
/// `∫ P₁ R² dR = (GA/3) artanh(GA/r_b³)`, which leaves a smooth integral over
/// `u = cos θ`. Used to validate the branch choices of [`f1`].
pub fn f1_quadrature(g: Complex64, rb: f64) -> Complex64 {
    let rb3 = rb.powi(3);
    let u0 = 1.0 / 3f64.sqrt();
    let tol = Tolerance::new(1e-14, 1e-12);
    let est = integrate_pieces(
        &mut |u: f64| {
            let c = g * anisotropy(u).unwrap();
            if c == Complex64::new(0.0, 0.0) {
                return c;
            }
            if rb3 == 0.0 {
                // artanh(c·∞) = ±iπ/2 with the sign of Im c
                return c * Complex64::new(0.0, 0.5 * PI * c.im.signum());
            }
            c * (c / rb3).atanh()
        },
        &[0.0, u0, 1.0],
        tol,
    );
    4.0 * PI / 3.0 * est.value
}

/// Largest relative deviation `|f1(g; r_b) + iπg| / |g|` over a set of test
/// resolvents. Small `r_b` must give a small value; a branch jump would show
/// up as a deviation of order one.
pub fn rb_continuity_deviation(rb: f64, grid: &[Complex64]) -> f64 {
    grid.iter()
        .map(|&g| (f1(g, rb) + Complex64::i() * PI * g).norm() / g.norm())
        .fold(0.0, f64::max)
}

/// Test resolvents with `Im g ≤ −0.1` on a compact set.
pub fn validation_grid() -> Vec<Complex64> {
    let mut out = Vec::new();
    for i in 0..21 {
        for j in 0..10 {
            out.push(Complex64::new(-3.0 + 0.3 * i as f64, -0.1 - 0.3 * j as f64));
        }
    }
    out
}
