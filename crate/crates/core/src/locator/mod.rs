//! Self-consistent locator-expansion approximations for the averaged
//! resolvent `G(z)`, `z = λ + iε`, and the DOS `−Im G/π` they imply.
//!
//! Low concentration: `zG = 1 + F₁(G) [+ F₂(G)]`. High concentration:
//! `zG = 1 + G Σ(G)` with the loop self-energy of [`high::self_energy`].
//!
//! Each grid point is solved along a descending ε schedule, warm-starting from
//! the previous ε, followed by one solve at a tiny `limit_epsilon` that stands
//! in for `ε → 0⁺`. Per solve the stages are: damped fixed-point iteration
//! `G ← 1/(z − F(G)/G)`, complex secant on the residual, and CMA-ES on
//! `|residual|²` restricted to `Im G ≤ 0`, polished by secant.

pub mod cmaes;
pub mod f1;
pub mod f2;
pub mod high;

pub use cmaes::CmaesSettings;
pub use f1::{f1, f1_quadrature, p1};
pub use f2::{f2, f2_constant, p2, F2Integrator, F2Settings, F2_CONSTANT};
pub use high::{fourier_w, j1, j1_first_root, self_energy, HighSettings};

use crate::error::{invalid, Error, Result};
use crate::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Low { order: u8 },
    High,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Low { order } => format!("low{order}"),
            Method::High => "high".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Strictly descending, all positive.
    pub epsilon_schedule: Vec<f64>,
    /// Final solve standing in for `ε → 0⁺`; must lie below the schedule.
    pub limit_epsilon: Option<f64>,
    pub residual_tolerance: f64,
    /// Largest relative DOS change between the last two ε values. With a
    /// limit solve, the limit DOS is compared with the straight-line
    /// extrapolation of the last two scheduled values.
    pub stability_tolerance: f64,
    /// DOS values below this are compared in absolute terms.
    pub stability_floor: f64,
    pub fixed_point_iterations: usize,
    pub damping: f64,
    pub secant_iterations: usize,
    pub cmaes: CmaesSettings,
    pub seed: u64,
    pub f2: F2Settings,
    pub high: HighSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon_schedule: vec![0.2, 0.1, 0.05, 0.02],
            limit_epsilon: Some(1e-9),
            residual_tolerance: 1e-8,
            stability_tolerance: 0.01,
            stability_floor: 1e-4,
            fixed_point_iterations: 400,
            damping: 0.7,
            secant_iterations: 80,
            cmaes: CmaesSettings {
                population: 12,
                max_generations: 600,
                target: 1e-24,
                min_step: 1e-14,
            },
            seed: 0,
            f2: F2Settings::default(),
            high: HighSettings::default(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let s = &self.epsilon_schedule;
        if s.is_empty() || s.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(invalid("epsilon_schedule", "needs at least one positive finite value"));
        }
        if s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilon_schedule", "must be strictly descending"));
        }
        if let Some(l) = self.limit_epsilon {
            if !(l > 0.0) || l >= *s.last().unwrap() {
                return Err(invalid("limit_epsilon", "must be positive and below the schedule"));
            }
        }
        if !(self.residual_tolerance > 0.0) || !(self.stability_tolerance > 0.0) {
            return Err(invalid("residual_tolerance", "tolerances must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping", "must lie in (0, 1]"));
        }
        self.f2.validate()?;
        self.high.validate()
    }

    /// The ε values solved in order, the limit last.
    pub fn epsilons(&self) -> Vec<f64> {
        let mut e = self.epsilon_schedule.clone();
        e.extend(self.limit_epsilon);
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    FixedPoint,
    Secant,
    Cmaes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    /// `|zG − 1 − F(G)|` at the final ε.
    pub residual: f64,
    /// Iterations summed over all ε values.
    pub iterations: usize,
    /// Stage that produced the final root.
    pub stage: Stage,
    pub converged: bool,
    /// Converged, Herglotz and ε-stable.
    pub accepted: bool,
    /// Relative DOS change measured by the ε-stability gate (see
    /// [`SolverSettings::stability_tolerance`]).
    pub dos_change: f64,
    /// A second root met during the search, if any.
    pub alternate: Option<Complex64>,
    /// Set when an integral behind `F` missed its accuracy target (F₂
    /// replicate error above 1 %, or a high-concentration tail above 1 %).
    pub flagged: bool,
    /// The closed-form `F₁` was replaced by its defining integral.
    pub branch_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSolution {
    pub method: Method,
    pub blockade_radius: f64,
    pub lambda_grid: Vec<f64>,
    /// Final continuation value.
    pub epsilon: f64,
    pub epsilon_schedule: Vec<f64>,
    pub g_values: Vec<Complex64>,
    pub dos: Vec<f64>,
    pub diagnostics: Vec<PointDiagnostics>,
}

impl ResolventSolution {
    pub fn accepted_fraction(&self) -> f64 {
        self.diagnostics.iter().filter(|d| d.accepted).count() as f64 / self.diagnostics.len().max(1) as f64
    }

    /// Trapezoid integral of the DOS over the grid.
    pub fn normalization(&self) -> f64 {
        self.lambda_grid
            .windows(2)
            .zip(self.dos.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

/// `F(G)` of one self-consistent equation and whether its evaluation was
/// flagged as inaccurate.
trait Generator: Sync {
    fn eval(&self, g: Complex64) -> (Complex64, bool);
}

struct Low<'a> {
    rb: f64,
    f2: Option<&'a F2Integrator>,
    exact_f1: bool,
}

impl Generator for Low<'_> {
    fn eval(&self, g: Complex64) -> (Complex64, bool) {
        let mut v = if self.exact_f1 { f1_quadrature(g, self.rb) } else { f1(g, self.rb) };
        let mut flagged = false;
        if let Some(int) = self.f2 {
            let e = int.eval(g);
            v += e.value;
            flagged = !e.converged;
        }
        (v, flagged)
    }
}

struct LowZero {
    order: u8,
}

impl Generator for LowZero {
    fn eval(&self, g: Complex64) -> (Complex64, bool) {
        let mut v = f1(g, 0.0);
        if self.order == 2 {
            v += F2_CONSTANT * g * g;
        }
        (v, false)
    }
}

struct High<'a> {
    rb: f64,
    settings: &'a HighSettings,
}

impl Generator for High<'_> {
    fn eval(&self, g: Complex64) -> (Complex64, bool) {
        match self_energy(g, self.rb, self.settings) {
            Ok(s) => (g * s.value, s.tail.norm() > 0.01 * s.value.norm()),
            Err(_) => (Complex64::new(f64::NAN, f64::NAN), true),
        }
    }
}

struct Root {
    g: Complex64,
    residual: f64,
    iterations: usize,
    stage: Stage,
    converged: bool,
    flagged: bool,
    alternate: Option<Complex64>,
}

fn herglotz(g: Complex64) -> bool {
    g.im <= 1e-12 * g.norm().max(1.0)
}

fn residual(gen: &dyn Generator, z: Complex64, g: Complex64) -> (Complex64, bool) {
    let (f, flagged) = gen.eval(g);
    (z * g - 1.0 - f, flagged)
}

fn fixed_point(gen: &dyn Generator, z: Complex64, g0: Complex64, s: &SolverSettings) -> (Complex64, f64, usize) {
    let mut g = g0;
    let mut theta = s.damping;
    let (mut r, _) = residual(gen, z, g);
    let mut best = (g, r.norm());
    for it in 1..=s.fixed_point_iterations {
        let (f, _) = gen.eval(g);
        let next = 1.0 / (z - f / g);
        let cand = (1.0 - theta) * g + theta * next;
        let (rc, _) = residual(gen, z, cand);
        if !rc.norm().is_finite() {
            return (best.0, best.1, it);
        }
        if rc.norm() > r.norm() {
            theta = (theta * 0.5).max(0.02);
        } else {
            theta = (theta * 1.2).min(s.damping);
        }
        g = cand;
        r = rc;
        if r.norm() < best.1 && herglotz(g) {
            best = (g, r.norm());
        }
        if best.1 < s.residual_tolerance {
            return (best.0, best.1, it);
        }
    }
    (best.0, best.1, s.fixed_point_iterations)
}

fn secant(gen: &dyn Generator, z: Complex64, g0: Complex64, s: &SolverSettings) -> (Complex64, f64, usize) {
    let mut a = g0;
    let mut b = g0 * (1.0 + 1e-4) + Complex64::new(0.0, -1e-6);
    let (mut ra, _) = residual(gen, z, a);
    let (mut rb, _) = residual(gen, z, b);
    let mut best = if ra.norm() < rb.norm() { (a, ra.norm()) } else { (b, rb.norm()) };
    for it in 1..=s.secant_iterations {
        let denom = rb - ra;
        if denom.norm() == 0.0 {
            return (best.0, best.1, it);
        }
        let mut c = b - rb * (b - a) / denom;
        if c.im > 0.0 {
            // stay in the Herglotz half plane
            c.im = -0.5 * c.im.abs().min(b.im.abs().max(1e-12));
        }
        let (rc, _) = residual(gen, z, c);
        if !rc.norm().is_finite() {
            return (best.0, best.1, it);
        }
        a = b;
        ra = rb;
        b = c;
        rb = rc;
        if rb.norm() < best.1 && herglotz(b) {
            best = (b, rb.norm());
        }
        if best.1 < s.residual_tolerance {
            return (best.0, best.1, it);
        }
    }
    (best.0, best.1, s.secant_iterations)
}

fn solve_point(gen: &dyn Generator, z: Complex64, g0: Complex64, s: &SolverSettings, seed: u64) -> Root {
    let tol = s.residual_tolerance;
    let finish = |g: Complex64, iterations: usize, stage: Stage, alternate: Option<Complex64>| {
        let (r, flagged) = residual(gen, z, g);
        Root {
            g,
            residual: r.norm(),
            iterations,
            stage,
            converged: r.norm() < tol && herglotz(g),
            flagged,
            alternate,
        }
    };
    let (g, r, it_fp) = fixed_point(gen, z, g0, s);
    if r < tol {
        return finish(g, it_fp, Stage::FixedPoint, None);
    }
    let start = if r.is_finite() { g } else { g0 };
    let (g2, r2, it_sec) = secant(gen, z, start, s);
    if r2 < tol && herglotz(g2) {
        return finish(g2, it_fp + it_sec, Stage::Secant, None);
    }
    let mut rng = crate::rng::stream(s.seed, seed);
    let scale = 0.3 * start.norm() + 0.05;
    let res = cmaes::minimize(
        |x| {
            let g = Complex64::new(x[0], x[1]);
            if g.im > 0.0 {
                return 1e6 * (1.0 + g.im);
            }
            let v = residual(gen, z, g).0.norm_sqr();
            if v.is_finite() {
                v
            } else {
                f64::MAX
            }
        },
        &[start.re, start.im.min(0.0)],
        scale,
        &s.cmaes,
        &mut rng,
    );
    let gc = Complex64::new(res.x[0], res.x[1]);
    let (g3, _, it_pol) = secant(gen, z, gc, s);
    let alternate = if r2 < tol && (g2 - g3).norm() > 1e-6 * g3.norm() { Some(g2) } else { None };
    finish(g3, it_fp + it_sec + res.evaluations + it_pol, Stage::Cmaes, alternate)
}

/// Runs the ε schedule at one grid point.
fn continuation(gen: &dyn Generator, lambda: f64, s: &SolverSettings, index: u64) -> (Complex64, PointDiagnostics, Vec<f64>) {
    let eps = s.epsilons();
    let mut g = 1.0 / Complex64::new(lambda, eps[0] + PI);
    let mut dos = Vec::with_capacity(eps.len());
    let mut iterations = 0;
    let mut last = None;
    let mut flagged = false;
    let mut alternate = None;
    for (k, &e) in eps.iter().enumerate() {
        let root = solve_point(gen, Complex64::new(lambda, e), g, s, index * 64 + k as u64);
        iterations += root.iterations;
        flagged |= root.flagged;
        alternate = alternate.or(root.alternate);
        if root.converged {
            g = root.g;
        }
        dos.push(-root.g.im / PI);
        last = Some(root);
    }
    let root = last.unwrap();
    let n = dos.len();
    let reference = if s.limit_epsilon.is_some() && n >= 3 {
        // linear extrapolation of the last two scheduled values to the limit ε
        let slope = (dos[n - 2] - dos[n - 3]) / (eps[n - 2] - eps[n - 3]);
        Some(dos[n - 2] + slope * (eps[n - 1] - eps[n - 2]))
    } else if n >= 2 {
        Some(dos[n - 2])
    } else {
        None
    };
    let dos_change = reference.map_or(0.0, |r| (dos[n - 1] - r).abs() / dos[n - 1].abs().max(s.stability_floor));
    let diag = PointDiagnostics {
        residual: root.residual,
        iterations,
        stage: root.stage,
        converged: root.converged,
        accepted: root.converged && dos_change <= s.stability_tolerance,
        dos_change,
        alternate,
        flagged,
        branch_fallback: false,
    };
    (root.g, diag, dos)
}

fn assemble(method: Method, rb: f64, grid: &[f64], s: &SolverSettings, results: Vec<(Complex64, PointDiagnostics)>) -> ResolventSolution {
    let (g_values, diagnostics): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    ResolventSolution {
        method,
        blockade_radius: rb,
        lambda_grid: grid.to_vec(),
        epsilon: *s.epsilons().last().unwrap(),
        epsilon_schedule: s.epsilons(),
        dos: g_values.iter().map(|g: &Complex64| (-g.im / PI).max(0.0)).collect(),
        g_values,
        diagnostics,
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(invalid("lambda_grid", "needs at least one finite value"));
    }
    Ok(())
}

/// Low-concentration approximation of order 1 or 2.
pub fn solve_low(order: u8, rb: f64, grid: &[f64], s: &SolverSettings) -> Result<ResolventSolution> {
    if order != 1 && order != 2 {
        return Err(invalid("order", "must be 1 or 2"));
    }
    if !(rb >= 0.0) || !rb.is_finite() {
        return Err(invalid("blockade_radius", "must be a finite nonnegative number"));
    }
    check_grid(grid)?;
    s.validate()?;
    let integrator = if order == 2 && rb > 0.0 { Some(F2Integrator::new(rb, s.f2)?) } else { None };
    let results: Vec<(Complex64, PointDiagnostics)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            if rb == 0.0 {
                let (g, d, _) = continuation(&LowZero { order }, lambda, s, i as u64);
                return (g, d);
            }
            let gen = Low {
                rb,
                f2: integrator.as_ref(),
                exact_f1: false,
            };
            let (g, d, _) = continuation(&gen, lambda, s, i as u64);
            // the closed form's branches must agree with the defining integral
            let exact = Low { exact_f1: true, ..gen };
            let z = Complex64::new(lambda, *s.epsilons().last().unwrap());
            let (r, _) = residual(&exact, z, g);
            if d.converged && r.norm() < 100.0 * s.residual_tolerance {
                return (g, d);
            }
            let (g2, mut d2, _) = continuation(&exact, lambda, s, i as u64);
            d2.branch_fallback = true;
            (g2, d2)
        })
        .collect();
    Ok(assemble(Method::Low { order }, rb, grid, s, results))
}

/// High-concentration approximation; needs `r_b > 0`.
pub fn solve_high(rb: f64, grid: &[f64], s: &SolverSettings) -> Result<ResolventSolution> {
    if !(rb > 0.0) || !rb.is_finite() {
        return Err(invalid("blockade_radius", "the high-concentration equation needs r_b > 0"));
    }
    check_grid(grid)?;
    s.validate()?;
    let gen = High { rb, settings: &s.high };
    let results: Vec<(Complex64, PointDiagnostics)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let (g, d, _) = continuation(&gen, lambda, s, i as u64);
            (g, d)
        })
        .collect();
    Ok(assemble(Method::High, rb, grid, s, results))
}

/// `(λ, −Im G/π)` at the accepted grid points.
pub fn dos_from_resolvent(solution: &ResolventSolution) -> Result<Vec<(f64, f64)>> {
    let out: Vec<(f64, f64)> = solution
        .lambda_grid
        .iter()
        .zip(&solution.dos)
        .zip(&solution.diagnostics)
        .filter(|(_, d)| d.accepted)
        .map(|((&l, &v), _)| (l, v.max(0.0)))
        .collect();
    if out.is_empty() {
        return Err(Error::NonConvergence {
            lambda: solution.lambda_grid[0],
        });
    }
    Ok(out)
}

/// Grid with spacing `step` on `[core.0, core.1]` and `per_decade`
/// log-spaced points out to `extent` on either side.
pub fn mixed_grid(core: (f64, f64), step: f64, extent: (f64, f64), per_decade: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let n = ((core.1 - core.0) / step).round() as usize;
    for k in 0..=n {
        out.push(core.0 + k as f64 * step);
    }
    let factor = 10f64.powf(1.0 / per_decade as f64);
    if core.1 > 0.0 {
        let mut x = core.1 * factor;
        while x <= extent.1 * (1.0 + 1e-12) {
            out.push(x);
            x *= factor;
        }
    }
    if core.0 < 0.0 {
        let mut x = core.0 * factor;
        while x >= extent.0 * (1.0 + 1e-12) {
            out.push(x);
            x *= factor;
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
