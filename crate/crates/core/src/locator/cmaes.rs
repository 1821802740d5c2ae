//! Covariance-matrix-adaptation evolution strategy for small dimensions.
//!
//! Standard `(μ/μ_w, λ)` update with cumulative step-size adaptation. The
//! covariance is factored by Cholesky, and the conjugate evolution path uses
//! `L⁻¹` in place of `C^{-1/2}`; both whiten the sampling distribution.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaesSettings {
    /// Offspring per generation; `0` selects `4 + ⌊3 ln n⌋`.
    pub population: usize,
    pub max_generations: usize,
    /// Stop once the best objective value drops below this.
    pub target: f64,
    /// Stop once `σ·√max(diag C)` drops below this.
    pub min_step: f64,
}

impl Default for CmaesSettings {
    fn default() -> Self {
        Self {
            population: 0,
            max_generations: 2000,
            target: 1e-20,
            min_step: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub generations: usize,
    pub evaluations: usize,
}

fn cholesky(c: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = c.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = c[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (c[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward_solve(l: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; y.len()];
    for i in 0..y.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Minimizes `f` from `x0` with initial step `sigma0`.
pub fn minimize<R: Rng + ?Sized>(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    sigma0: f64,
    settings: &CmaesSettings,
    rng: &mut R,
) -> CmaesResult {
    let n = x0.len();
    let nf = n as f64;
    let lambda = if settings.population == 0 {
        4 + (3.0 * nf.ln()).floor() as usize
    } else {
        settings.population.max(2)
    };
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let mueff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (0.0f64).max(((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = x0.to_vec();
    let mut sigma = sigma0;
    let mut c: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut pc = vec![0.0; n];
    let mut ps = vec![0.0; n];
    let mut best = CmaesResult {
        x: mean.clone(),
        value: f(&mean),
        generations: 0,
        evaluations: 1,
    };
    for gen in 1..=settings.max_generations {
        let l = match cholesky(&c) {
            Some(l) => l,
            None => break,
        };
        let mut pop: Vec<(f64, Vec<f64>)> = (0..lambda)
            .map(|_| {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let y: Vec<f64> = (0..n).map(|i| (0..=i).map(|k| l[i][k] * z[k]).sum()).collect();
                let x: Vec<f64> = (0..n).map(|i| mean[i] + sigma * y[i]).collect();
                (f(&x), x)
            })
            .collect();
        best.evaluations += lambda;
        pop.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pop[0].0 < best.value {
            best.value = pop[0].0;
            best.x = pop[0].1.clone();
        }
        best.generations = gen;
        let old = mean.clone();
        mean = (0..n).map(|i| (0..mu).map(|k| w[k] * pop[k].1[i]).sum()).collect();
        let step: Vec<f64> = (0..n).map(|i| (mean[i] - old[i]) / sigma).collect();
        let white = forward_solve(&l, &step);
        for i in 0..n {
            ps[i] = (1.0 - cs) * ps[i] + (cs * (2.0 - cs) * mueff).sqrt() * white[i];
        }
        let ps_norm = ps.iter().map(|v| v * v).sum::<f64>().sqrt();
        let hsig = ps_norm / (1.0 - (1.0 - cs).powi(2 * gen as i32)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let h = if hsig { 1.0 } else { 0.0 };
        for i in 0..n {
            pc[i] = (1.0 - cc) * pc[i] + h * (cc * (2.0 - cc) * mueff).sqrt() * step[i];
        }
        for i in 0..n {
            for j in 0..n {
                let rank_mu: f64 = (0..mu)
                    .map(|k| w[k] * (pop[k].1[i] - old[i]) * (pop[k].1[j] - old[j]) / (sigma * sigma))
                    .sum();
                c[i][j] = (1.0 - c1 - cmu) * c[i][j]
                    + c1 * (pc[i] * pc[j] + (1.0 - h) * cc * (2.0 - cc) * c[i][j])
                    + cmu * rank_mu;
            }
        }
        sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();
        let spread = sigma * (0..n).map(|i| c[i][i]).fold(0.0, f64::max).sqrt();
        if best.value < settings.target || spread < settings.min_step || !sigma.is_finite() {
            break;
        }
    }
    best
}
