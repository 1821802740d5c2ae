//! Gauss hypergeometric function for the two parameter triples that occur in
//! the coupling-element density.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hyp2f1Case {
    /// ₂F₁(−1/6, 1; 1/3; x)
    SixthOneThird,
    /// ₂F₁(−2/3, 1/2; 1/3; x)
    TwoThirdsHalfThird,
}

impl Hyp2f1Case {
    pub fn params(self) -> (f64, f64, f64) {
        match self {
            Hyp2f1Case::SixthOneThird => (-1.0 / 6.0, 1.0, 1.0 / 3.0),
            Hyp2f1Case::TwoThirdsHalfThird => (-2.0 / 3.0, 0.5, 1.0 / 3.0),
        }
    }
}

const MAX_TERMS: usize = 5000;

/// Power series, valid for |x| < 1.
pub(crate) fn series(a: f64, b: f64, c: f64, x: f64) -> Option<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..MAX_TERMS {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            return Some(sum);
        }
    }
    None
}

/// Pfaff transformation in the first parameter.
pub(crate) fn pfaff_a(a: f64, b: f64, c: f64, x: f64) -> Option<f64> {
    let z = x / (x - 1.0);
    Some((1.0 - x).powf(-a) * series(a, c - b, c, z)?)
}

/// Pfaff transformation in the second parameter; an independent route used
/// to cross-check `pfaff_a`.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn pfaff_b(a: f64, b: f64, c: f64, x: f64) -> Option<f64> {
    let z = x / (x - 1.0);
    Some((1.0 - x).powf(-b) * series(c - a, b, c, z)?)
}

/// Connection formula to argument 1 − x (requires c − a − b non-integer).
fn reflect_one(a: f64, b: f64, c: f64, x: f64) -> Option<f64> {
    let y = 1.0 - x;
    let s = c - a - b;
    let t1 = gamma(c) * gamma(s) / (gamma(c - a) * gamma(c - b)) * series(a, b, 1.0 - s, y)?;
    let t2 = y.powf(s) * gamma(c) * gamma(-s) / (gamma(a) * gamma(b)) * series(c - a, c - b, 1.0 + s, y)?;
    Some(t1 + t2)
}

/// ₂F₁ for one of the supported triples. Accepts `-9 ≤ x < 1`
/// (and `x = 1` where the series converges there).
pub fn hyp2f1_special(case: Hyp2f1Case, x: f64) -> Result<f64> {
    let (a, b, c) = case.params();
    let fail = || Error::Hyp2f1Convergence { x };
    if !(-9.0..=1.0).contains(&x) {
        return Err(fail());
    }
    if x == 1.0 {
        let s = c - a - b;
        if s <= 0.0 {
            return Err(fail());
        }
        return Ok(gamma(c) * gamma(s) / (gamma(c - a) * gamma(c - b)));
    }
    let v = if x.abs() < 0.9 {
        series(a, b, c, x)
    } else if x < 0.0 {
        pfaff_a(a, b, c, x)
    } else {
        reflect_one(a, b, c, x)
    };
    v.ok_or_else(fail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Hyp2f1Case::*;

    // reference values from an independent 30-digit evaluation
    const F16_M2: f64 = 1.493_124_014_126_242_2;
    const F23_M2: f64 = 2.586_166_654_467_841_6;
    const F23_0999: f64 = -0.658_464_564_976_622_3;

    #[test]
    fn origin() {
        assert_eq!(hyp2f1_special(SixthOneThird, 0.0).unwrap(), 1.0);
        assert_eq!(hyp2f1_special(TwoThirdsHalfThird, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn reference_values() {
        let v = hyp2f1_special(SixthOneThird, -2.0).unwrap();
        assert!((v / F16_M2 - 1.0).abs() < 1e-13, "{v}");
        let v = hyp2f1_special(TwoThirdsHalfThird, -2.0).unwrap();
        assert!((v / F23_M2 - 1.0).abs() < 1e-13, "{v}");
        let v = hyp2f1_special(TwoThirdsHalfThird, 0.999).unwrap();
        assert!((v / F23_0999 - 1.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn two_transformations_agree() {
        for case in [SixthOneThird, TwoThirdsHalfThird] {
            let (a, b, c) = case.params();
            for x in [-2.0, -1.5, -0.95, -0.5] {
                let p = pfaff_a(a, b, c, x).unwrap();
                let q = pfaff_b(a, b, c, x).unwrap();
                assert!((p - q).abs() <= 1e-10 * p.abs(), "{case:?} {x}: {p} {q}");
            }
        }
    }

    #[test]
    fn seam_continuity() {
        for case in [SixthOneThird, TwoThirdsHalfThird] {
            for x0 in [-0.9, 0.9] {
                let l = hyp2f1_special(case, x0 - 1e-12).unwrap();
                let r = hyp2f1_special(case, x0 + 1e-12).unwrap();
                assert!((l - r).abs() < 1e-10 * l.abs(), "{case:?} {x0}: {l} {r}");
            }
        }
    }

    #[test]
    fn divergent_point_is_reported() {
        assert!(hyp2f1_special(SixthOneThird, 1.0).is_err());
        assert!(hyp2f1_special(SixthOneThird, -20.0).is_err());
        // Gauss summation where it exists
        let g = hyp2f1_special(TwoThirdsHalfThird, 1.0).unwrap();
        let near = hyp2f1_special(TwoThirdsHalfThird, 1.0 - 1e-12).unwrap();
        assert!((g - near).abs() < 1e-5);
    }
}
