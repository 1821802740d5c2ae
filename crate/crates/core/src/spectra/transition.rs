//! Energies where the RMS deviations from the Poisson and Wigner-Dyson laws
//! cross.

use super::spacing::SpacingAccumulator;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionSettings {
    /// Degree of the least-squares polynomial in `ln|λ|`.
    pub degree: usize,
    /// Windows with fewer spacings are ignored.
    pub min_spacings: u64,
    pub min_windows: usize,
}

impl Default for TransitionSettings {
    fn default() -> Self {
        Self {
            degree: 3,
            min_spacings: 200,
            min_windows: 6,
        }
    }
}

/// Which law a side's statistics stay closer to when no crossing exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dominant {
    Poisson,
    WignerDyson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideResult {
    /// Crossing closest to the spectrum center, if any.
    pub lambda: Option<f64>,
    /// Set when no crossing is found.
    pub dominant: Option<Dominant>,
    pub centers: Vec<f64>,
    pub delta_p: Vec<f64>,
    pub delta_wd: Vec<f64>,
    pub counts: Vec<u64>,
    /// Polynomial coefficients (ascending powers of `ln|λ|`).
    pub coef_p: Vec<f64>,
    pub coef_wd: Vec<f64>,
    /// All crossings inside the scanned range.
    pub roots: Vec<f64>,
    pub rms_residual_p: f64,
    pub rms_residual_wd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionResult {
    pub minus: SideResult,
    pub plus: SideResult,
    pub degree: usize,
}

impl TransitionResult {
    pub fn lambda_minus(&self) -> Option<f64> {
        self.minus.lambda
    }
    pub fn lambda_plus(&self) -> Option<f64> {
        self.plus.lambda
    }
}

fn polyval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

/// Least-squares polynomial fit by normal equations on centered, scaled
/// abscissae; returns coefficients in the original variable.
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    let n = x.len();
    let m = degree + 1;
    let mx = x.iter().sum::<f64>() / n as f64;
    let sx = x.iter().map(|v| (v - mx).abs()).fold(0.0, f64::max).max(1e-300);
    let t: Vec<f64> = x.iter().map(|v| (v - mx) / sx).collect();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (ti, yi) in t.iter().zip(y) {
        let pows: Vec<f64> = (0..m).map(|k| ti.powi(k as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pows[r] * pows[c];
            }
            a[r][m] += pows[r] * yi;
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut b = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * b[c]).sum();
        b[r] = (a[r][m] - s) / a[r][r];
    }
    // expand p(t) with t = (x − mx)/sx into powers of x
    let mut out = vec![0.0; m];
    let mut binom = vec![vec![0.0; m]; m];
    for i in 0..m {
        binom[i][0] = 1.0;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + if j < i { binom[i - 1][j] } else { 0.0 };
        }
    }
    for (k, &bk) in b.iter().enumerate() {
        let scale = bk / sx.powi(k as i32);
        for j in 0..=k {
            out[j] += scale * binom[k][j] * (-mx).powi((k - j) as i32);
        }
    }
    out
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn side(acc: &SpacingAccumulator, sign: i8, s: &TransitionSettings) -> Result<SideResult> {
    let mut centers = Vec::new();
    let mut dp = Vec::new();
    let mut dw = Vec::new();
    let mut counts = Vec::new();
    for (i, w) in acc.windows.windows.iter().enumerate() {
        if w.intervals.len() != 1 || w.sign() != Some(sign) || acc.count(i) < s.min_spacings {
            continue;
        }
        let (p, q) = acc.deviations(i);
        centers.push(w.center());
        dp.push(p);
        dw.push(q);
        counts.push(acc.count(i));
    }
    if centers.len() < s.min_windows.max(s.degree + 1) {
        return Err(Error::InsufficientWindows(format!(
            "{} populated windows on the {} side, need {}",
            centers.len(),
            if sign > 0 { "positive" } else { "negative" },
            s.min_windows.max(s.degree + 1)
        )));
    }
    let x: Vec<f64> = centers.iter().map(|c| c.abs().ln()).collect();
    let coef_p = polyfit(&x, &dp, s.degree);
    let coef_wd = polyfit(&x, &dw, s.degree);
    let rms = |c: &[f64], y: &[f64]| {
        (x.iter().zip(y).map(|(xi, yi)| (polyval(c, *xi) - yi).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
    };
    let diff = |t: f64| polyval(&coef_p, t) - polyval(&coef_wd, t);
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let steps = 4000;
    let mut roots = Vec::new();
    let mut prev = diff(xmin);
    for k in 1..=steps {
        let t = xmin + (xmax - xmin) * k as f64 / steps as f64;
        let cur = diff(t);
        if cur == 0.0 || (cur > 0.0) != (prev > 0.0) {
            let t0 = xmin + (xmax - xmin) * (k - 1) as f64 / steps as f64;
            roots.push(sign as f64 * bisect(diff, t0, t).exp());
        }
        prev = cur;
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * b.abs());
    let lambda = roots.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs()));
    let dominant = if lambda.is_some() {
        None
    } else if diff(0.5 * (xmin + xmax)) > 0.0 {
        Some(Dominant::WignerDyson)
    } else {
        Some(Dominant::Poisson)
    };
    Ok(SideResult {
        lambda,
        dominant,
        centers,
        rms_residual_p: rms(&coef_p, &dp),
        rms_residual_wd: rms(&coef_wd, &dw),
        delta_p: dp,
        delta_wd: dw,
        counts,
        coef_p,
        coef_wd,
        roots,
    })
}

/// Fits the per-window `Δ_P` and `Δ_WD` on each side of zero with
/// polynomials in `ln|λ|` and reports where they cross. With several
/// crossings the one closest to zero energy is kept.
pub fn transition_energies(acc: &SpacingAccumulator, settings: &TransitionSettings) -> Result<TransitionResult> {
    Ok(TransitionResult {
        minus: side(acc, -1, settings)?,
        plus: side(acc, 1, settings)?,
        degree: settings.degree,
    })
}
