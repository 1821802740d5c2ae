//! Density of a single off-diagonal coupling `H_ij = A(u) r⁻³`.
//!
//! The closed form is a sum of terms that cancel strongly near `h = 0` (the
//! bracket vanishes like `u³` while its terms stay of order `b²`). When the
//! cancellation would cost more than about six digits the density is computed
//! from its one-dimensional integral representation instead.

use super::hyp2f1::{hyp2f1_special, Hyp2f1Case};
use super::GeometryParams;
use crate::quad::{integrate, Tolerance};
use crate::A_COEF;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Largest tolerated ratio between the biggest bracket term and the bracket.
const MAX_CONDITION: f64 = 1e6;

/// Support of the coupling density: `[-a/(3 r_b³), 2a/(3 r_b³)]`, unbounded
/// for `r_b = 0`.
pub fn coupling_support(p: &GeometryParams) -> (f64, f64) {
    if p.blockade_radius == 0.0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let rb3 = p.blockade_radius.powi(3);
    (-A_COEF / (3.0 * rb3), 2.0 * A_COEF / (3.0 * rb3))
}

fn f_sixth(x: f64) -> f64 {
    hyp2f1_special(Hyp2f1Case::SixthOneThird, x).expect("argument inside the branch domain")
}

fn f_twothirds(x: f64) -> f64 {
    hyp2f1_special(Hyp2f1Case::TwoThirdsHalfThird, x).expect("argument inside the branch domain")
}

/// `√π Γ(4/3) / Γ(5/6)`
fn gamma_ratio() -> f64 {
    PI.sqrt() * gamma(4.0 / 3.0) / gamma(5.0 / 6.0)
}

/// Sum of terms together with the sum of their magnitudes.
#[derive(Default)]
struct Bracket {
    value: f64,
    scale: f64,
}

impl Bracket {
    fn add(&mut self, t: f64) {
        self.value += t;
        self.scale += t.abs();
    }
    fn condition(&self) -> f64 {
        self.scale / self.value.abs()
    }
}

/// Density of `h`. Uses the closed form (or its `r_b → 0` limit) where it is
/// well conditioned and the integral representation elsewhere.
pub fn coupling_pdf(h: f64, p: &GeometryParams) -> f64 {
    if p.blockade_radius == 0.0 {
        return limit_pdf(h, p).unwrap_or_else(|| coupling_pdf_quadrature(h, p));
    }
    closed_pdf(h, p).unwrap_or_else(|| coupling_pdf_quadrature(h, p))
}

fn closed_pdf(h: f64, p: &GeometryParams) -> Option<f64> {
    let n = p.n_atoms as f64;
    let b = p.b;
    let b3 = b.powi(3);
    let u = 3.0 * p.blockade_radius.powi(3) * h / A_COEF;
    if u <= -1.0 || u >= 2.0 {
        return Some(0.0);
    }
    let pre = 64.0 * n / (1485.0 * b3 * (2.0 - b * b * (9.0 - 8.0 * b + b.powi(4))));
    if u == 0.0 {
        return Some(-pre * 55.0 / 14.0 * (-7.0 + b * b * (27.0 - 21.0 * b + b.powi(7))));
    }
    let sq = (1.0 + u).sqrt();
    let mut br = Bracket::default();
    br.add(sq * 11.0 * (8.0 + u * (-4.0 + 3.0 * u + 10.0 * b3 * (-2.0 + u))));
    br.add(sq * 27.0 * b * b * (16.0 + (8.0 - 5.0 * u) * u));
    if u <= -1.0 / b3 {
        br.add(-216.0 * gamma_ratio() * b * b * (-u).powf(2.0 / 3.0));
        br.add(-sq * 27.0 * b * b * 16.0 * f_sixth(-u));
    } else if u < 2.0 / b3 {
        br.add(-8.0 * (1.0 + b3 * u).sqrt() * (65.0 + b3 * u * (-6.0 + b3 * u)));
        br.add(-432.0 * b * b * f_twothirds(-u));
        br.add(432.0 * f_twothirds(-b3 * u));
    } else {
        br.add(-132.0 * 3f64.sqrt());
        br.add(54.0 * 2f64.cbrt() * 3f64.sqrt() * b * b * u.powf(2.0 / 3.0) * (-3.0 + 4.0 * f_sixth(-2.0)));
        br.add(-sq * 27.0 * b * b * 16.0 * f_sixth(-u));
    }
    if br.condition() > MAX_CONDITION {
        return None;
    }
    Some(pre * br.value / u.powi(3))
}

/// `r_b → 0` limit of the closed form, in `q = h d³ / a`.
fn limit_pdf(h: f64, p: &GeometryParams) -> Option<f64> {
    let n = p.n_atoms as f64;
    let q = h * p.d.powi(3) / A_COEF;
    if q == 0.0 {
        return Some(288.0 * n / 1701.0);
    }
    let mut br = Bracket::default();
    br.add(88.0);
    br.add(-660.0 * q);
    if q <= -1.0 / 3.0 {
        br.add(-216.0 * gamma_ratio() * (3.0 * q.abs()).powf(2.0 / 3.0));
    } else if q < 2.0 / 3.0 {
        br.add(-8.0 * (1.0 + 3.0 * q).sqrt() * (65.0 - 18.0 * q + 9.0 * q * q));
        br.add(432.0 * f_twothirds(-3.0 * q));
    } else {
        br.add(-132.0 * 3f64.sqrt());
        br.add(54.0 * 2f64.cbrt() * 3f64.sqrt() * (3.0 * q).powf(2.0 / 3.0) * (-3.0 + 4.0 * f_sixth(-2.0)));
    }
    if br.condition() > MAX_CONDITION {
        return None;
    }
    Some(-64.0 * n / (1485.0 * 27.0 * q.powi(3)) * br.value)
}

/// Density of `h` from its integral representation
/// `f(h) = 6d³/(aχ) ∫ s⁵(1−s)²(2+s) / √(1/3 + q s³) ds`, with `s = r/d`,
/// `q = h d³ / a`, over the radii where `|u| ≤ 1` is reachable.
pub fn coupling_pdf_quadrature(h: f64, p: &GeometryParams) -> f64 {
    let q = h * p.d.powi(3) / A_COEF;
    let sb = p.blockade_radius / p.d;
    let pre = 6.0 * p.d.powi(3) / (A_COEF * p.chi);
    let poly = |s: f64| s.powi(5) * (1.0 - s).powi(2) * (2.0 + s);
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-13,
        max_intervals: 4000,
    };
    if q < 0.0 {
        let top = (-1.0 / (3.0 * q)).cbrt();
        if top <= sb {
            return 0.0;
        }
        if top < 1.0 {
            // s = top − τ² removes the inverse-square-root endpoint
            let tau_max = (top - sb).sqrt();
            let g = |t: f64| {
                let s = top - t * t;
                let quad_form = top * top + top * s + s * s;
                2.0 * poly(s) / (-q * quad_form).sqrt()
            };
            return pre * integrate(g, 0.0, tau_max, tol).value;
        }
    }
    let top = if q > 0.0 { (2.0 / (3.0 * q)).cbrt().min(1.0) } else { 1.0 };
    if top <= sb {
        return 0.0;
    }
    let g = |s: f64| poly(s) / (1.0 / 3.0 + q * s.powi(3)).abs().sqrt();
    pre * integrate(g, sb, top, tol).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_pieces;

    fn geometries() -> Vec<GeometryParams> {
        [(10, 0.5), (1000, 0.5), (10_000, 0.75), (100, 0.25)]
            .iter()
            .map(|&(n, rb)| GeometryParams::new(n, rb).unwrap())
            .collect()
    }

    fn u_to_h(u: f64, p: &GeometryParams) -> f64 {
        u * A_COEF / (3.0 * p.blockade_radius.powi(3))
    }

    #[test]
    fn closed_form_matches_integral() {
        for p in geometries() {
            let b3 = p.b.powi(3);
            for u in [-0.9, -0.5, -1.5 / b3, -0.5 / b3, 0.5 / b3, 1.5 / b3, 3.0 / b3, 0.1, 1.0, 1.9] {
                let h = u_to_h(u, &p);
                let quad = coupling_pdf_quadrature(h, &p);
                let val = coupling_pdf(h, &p);
                assert!((val / quad - 1.0).abs() < 1e-8, "N={} u={u}: {val} vs {quad}", p.n_atoms);
            }
        }
    }

    #[test]
    fn origin_value_matches_integral() {
        for p in geometries() {
            let closed = closed_pdf(0.0, &p).unwrap();
            let quad = coupling_pdf_quadrature(0.0, &p);
            assert!((closed / quad - 1.0).abs() < 1e-9, "{closed} {quad}");
            assert!(closed > 0.0);
        }
    }

    #[test]
    fn branch_seams_are_continuous() {
        for p in geometries() {
            let b3 = p.b.powi(3);
            for u0 in [-1.0 / b3, 2.0 / b3, 0.0] {
                let h0 = u_to_h(u0, &p);
                let dh = 1e-9 * u_to_h(1.0 / b3, &p);
                let l = coupling_pdf(h0 - dh, &p);
                let r = coupling_pdf(h0 + dh, &p);
                assert!((l / r - 1.0).abs() < 1e-6, "seam {u0}: {l} {r}");
            }
        }
    }

    #[test]
    fn limit_matches_integral() {
        let p = GeometryParams::new(1000, 0.0).unwrap();
        for q in [-5.0, -1.0, -0.34, -1.0 / 3.0, -0.3, -0.01, 0.01, 0.3, 0.66, 2.0 / 3.0, 0.7, 2.0, 50.0] {
            let h = q * A_COEF / p.d.powi(3);
            let quad = coupling_pdf_quadrature(h, &p);
            let val = coupling_pdf(h, &p);
            assert!((val / quad - 1.0).abs() < 1e-8, "q={q}: {val} vs {quad}");
        }
        let zero = coupling_pdf(0.0, &p);
        assert!((zero / coupling_pdf_quadrature(0.0, &p) - 1.0).abs() < 1e-10);
    }

    /// Far tail: `N h² f → 1`, with the leading `|h|^{-1/3}` deficit coming
    /// from the `−3r/(2d)` term of the pair density. Its coefficient is
    /// `(3/2) E[|A|^{4/3}] / (E[|A|] d)` over the matching sign of `A`.
    #[test]
    fn limit_tail_law() {
        let p = GeometryParams::new(1000, 0.0).unwrap();
        let n = p.n_atoms as f64;
        let moment = |k: f64, positive: bool| {
            let u0 = 1.0 / 3f64.sqrt();
            let (lo, hi) = if positive { (u0, 1.0) } else { (0.0, u0) };
            integrate(|u| super::super::anisotropy(u).unwrap().abs().powf(k), lo, hi, Tolerance::default()).value
        };
        for h in [1e3f64, -1e3, 1e6, -1e6, 1e9, -1e9] {
            let c = 1.5 * moment(4.0 / 3.0, h > 0.0) / (moment(1.0, h > 0.0) * p.d);
            let deficit = 1.0 - coupling_pdf(h, &p) * n * h * h;
            let expected = c * h.abs().powf(-1.0 / 3.0);
            assert!((deficit / expected - 1.0).abs() < 0.05, "{h}: {deficit} vs {expected}");
        }
    }

    #[test]
    fn lopsided_near_origin() {
        let p = GeometryParams::new(1000, 0.0).unwrap();
        let h = 0.5 * A_COEF / p.d.powi(3);
        assert!((coupling_pdf(h, &p) / coupling_pdf(-h, &p) - 1.0).abs() > 1e-3);
    }

    #[test]
    fn support_is_exact() {
        for p in geometries() {
            let (lo, hi) = coupling_support(&p);
            assert_eq!(coupling_pdf(lo * 1.000_001, &p), 0.0);
            assert_eq!(coupling_pdf(hi * 1.000_001, &p), 0.0);
            assert!(coupling_pdf(lo * 0.999, &p) > 0.0);
            assert!(coupling_pdf(hi * 0.999, &p) > 0.0);
        }
    }

    /// ∫ w(h) f(h) dh over the whole support, with log-mapped outer pieces.
    fn moment(p: &GeometryParams, w: impl Fn(f64) -> f64) -> f64 {
        let (lo, hi) = coupling_support(p);
        let scale = A_COEF / p.d.powi(3);
        let tol = Tolerance { abs: 1e-14, rel: 1e-12, max_intervals: 20_000 };
        let mut inner = |h: f64| w(h) * coupling_pdf(h, p);
        let mut mid = integrate_pieces(
            &mut inner,
            &[-scale / 3.0, -scale / 6.0, 0.0, scale / 3.0, 2.0 * scale / 3.0],
            tol,
        )
        .value;
        // log-mapped tails: h = ±scale·e^y
        for (sign, edge, end) in [(-1.0, scale / 3.0, -lo), (1.0, 2.0 * scale / 3.0, hi)] {
            let g = |y: f64| {
                let h = sign * y.exp();
                y.exp() * w(h) * coupling_pdf(h, p)
            };
            mid += integrate(g, edge.ln(), end.ln(), tol).value;
        }
        mid
    }

    #[test]
    fn normalized_with_zero_mean() {
        for p in geometries() {
            let norm = moment(&p, |_| 1.0);
            assert!((norm - 1.0).abs() < 1e-6, "N={}: {norm}", p.n_atoms);
            let mean = moment(&p, |h| h);
            assert!(mean.abs() < 1e-8, "N={}: mean {mean}", p.n_atoms);
            let var = moment(&p, |h| h * h);
            let exact = super::super::coupling_variance(&p).unwrap();
            assert!((var / exact - 1.0).abs() < 1e-6, "{var} {exact}");
        }
    }

    #[test]
    fn limit_normalized() {
        let p = GeometryParams::new(1000, 0.0).unwrap();
        let scale = A_COEF / p.d.powi(3);
        let n = p.n_atoms as f64;
        let tol = Tolerance { abs: 1e-13, rel: 1e-12, max_intervals: 20_000 };
        let mut f = |h: f64| coupling_pdf(h, &p);
        let mut total =
            integrate_pieces(&mut f, &[-scale / 3.0, 0.0, 2.0 * scale / 3.0], tol).value;
        let cut = 1e6;
        for (sign, edge) in [(-1.0, scale / 3.0), (1.0, 2.0 * scale / 3.0)] {
            let g = |y: f64| y.exp() * coupling_pdf(sign * y.exp(), &p);
            total += integrate(g, edge.ln(), f64::ln(cut), tol).value;
        }
        // both tails beyond |h| = cut carry 1/(N cut) each
        total += 2.0 / (n * cut);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }
}
