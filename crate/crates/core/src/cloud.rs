//! Random atom clouds: uniform in a ball of unit density, with an optional
//! hard-sphere blockade radius.

use crate::error::{invalid, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Name of the sampling scheme, recorded in run metadata.
pub const SAMPLING_SCHEME: &str = "random-sequential-addition";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudConfig {
    pub n_atoms: usize,
    pub blockade_radius: f64,
    pub seed: u64,
    /// Rejected candidates tolerated per atom before the cloud is restarted.
    pub max_attempts: u64,
    pub packing_cap: f64,
}

impl CloudConfig {
    pub fn new(n_atoms: usize, blockade_radius: f64, seed: u64) -> Self {
        Self {
            n_atoms,
            blockade_radius,
            seed,
            max_attempts: 10_000,
            packing_cap: 0.3,
        }
    }

    pub fn cloud_radius(&self) -> f64 {
        (3.0 * self.n_atoms as f64 / (4.0 * PI)).cbrt()
    }

    /// Volume fraction taken by spheres of diameter `r_b` around each atom.
    pub fn packing_fraction(&self) -> f64 {
        self.n_atoms as f64 * (0.5 * self.blockade_radius).powi(3) / self.cloud_radius().powi(3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(invalid("n_atoms", "must be at least 1"));
        }
        if !(self.blockade_radius >= 0.0) || !self.blockade_radius.is_finite() {
            return Err(invalid("blockade_radius", "must be a finite nonnegative number"));
        }
        if self.max_attempts == 0 {
            return Err(invalid("max_attempts", "must be positive"));
        }
        let fraction = self.packing_fraction();
        if fraction > self.packing_cap {
            return Err(Error::Feasibility {
                fraction,
                cap: self.packing_cap,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomCloud {
    pub positions: Vec<[f64; 3]>,
    pub cloud_radius: f64,
    pub blockade_radius: f64,
}

impl AtomCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_pair_distance(&self) -> f64 {
        pair_distances(self).into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Uniform point in the ball: a normalized Gaussian direction scaled by
/// `U^{1/3} R`.
pub fn ball_point<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [f64; 3] {
    loop {
        let g: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if norm == 0.0 {
            continue;
        }
        let scale = radius * rng.random::<f64>().cbrt() / norm;
        return [g[0] * scale, g[1] * scale, g[2] * scale];
    }
}

/// Spatial hash with cells of side `r_b`, so a blockade check touches 27 cells.
struct Grid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl Grid {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: &[f64; 3]) -> [i64; 3] {
        [
            (p[0] / self.cell).floor() as i64,
            (p[1] / self.cell).floor() as i64,
            (p[2] / self.cell).floor() as i64,
        ]
    }

    fn blocked(&self, p: &[f64; 3], points: &[[f64; 3]], rb2: f64) -> bool {
        let k = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &j in list {
                            if dist2(p, &points[j]) <= rb2 {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }

    fn insert(&mut self, p: &[f64; 3], idx: usize) {
        self.cells.entry(self.key(p)).or_default().push(idx);
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Draws atoms one at a time, rejecting candidates that fall within `r_b` of
/// an accepted atom. An atom that exhausts its attempt budget restarts the
/// whole cloud; the total number of rejections is capped at
/// `N · max_attempts`.
pub fn sample_cloud<R: Rng + ?Sized>(config: &CloudConfig, rng: &mut R) -> Result<AtomCloud> {
    config.validate()?;
    let n = config.n_atoms;
    let radius = config.cloud_radius();
    let rb = config.blockade_radius;
    let rb2 = rb * rb;
    let budget = (n as u64).saturating_mul(config.max_attempts);
    let mut rejected_total: u64 = 0;
    'restart: loop {
        let mut points: Vec<[f64; 3]> = Vec::with_capacity(n);
        let mut grid = Grid::new(rb.max(1e-300));
        while points.len() < n {
            let mut attempts = 0;
            loop {
                let p = ball_point(radius, rng);
                if rb == 0.0 || !grid.blocked(&p, &points, rb2) {
                    if rb > 0.0 {
                        grid.insert(&p, points.len());
                    }
                    points.push(p);
                    break;
                }
                attempts += 1;
                rejected_total += 1;
                if rejected_total >= budget {
                    return Err(Error::SamplingExhausted {
                        atom: points.len(),
                        attempts: rejected_total,
                    });
                }
                if attempts >= config.max_attempts {
                    log::debug!("atom {} exhausted its attempts; restarting cloud", points.len());
                    continue 'restart;
                }
            }
        }
        return Ok(AtomCloud {
            positions: points,
            cloud_radius: radius,
            blockade_radius: rb,
        });
    }
}

/// Samples with a generator seeded from `config.seed`.
pub fn sample_cloud_seeded(config: &CloudConfig) -> Result<AtomCloud> {
    sample_cloud(config, &mut crate::rng::from_seed(config.seed))
}

/// All `N(N−1)/2` pairwise distances, ordered by `(i, j)` with `i < j`.
pub fn pair_distances(cloud: &AtomCloud) -> Vec<f64> {
    let p = &cloud.positions;
    let mut out = Vec::with_capacity(p.len() * p.len().saturating_sub(1) / 2);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            out.push(dist2(&p[i], &p[j]).sqrt());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{pair_distance_cdf, GeometryParams};
    use proptest::prelude::*;

    #[test]
    fn single_atom() {
        let c = sample_cloud_seeded(&CloudConfig::new(1, 0.0, 3)).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c.cloud_radius - 0.620_350_490_9).abs() < 1e-9);
        let p = c.positions[0];
        assert!((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= c.cloud_radius);
        assert!(pair_distances(&c).is_empty());
    }

    #[test]
    fn pair_distance_examples() {
        let c = AtomCloud {
            positions: vec![[0.0; 3], [0.0, 0.0, 1.0]],
            cloud_radius: 1.0,
            blockade_radius: 0.0,
        };
        assert_eq!(pair_distances(&c), vec![1.0]);
        let c = sample_cloud_seeded(&CloudConfig::new(3, 0.0, 5)).unwrap();
        let d = pair_distances(&c);
        assert_eq!(d.len(), 3);
        // (0,1), (0,2), (1,2)
        assert!(d[0] <= d[1] + d[2] && d[1] <= d[0] + d[2] && d[2] <= d[0] + d[1]);
    }

    #[test]
    fn infeasible_packing_rejected() {
        let err = sample_cloud_seeded(&CloudConfig::new(100, 1.0, 1)).unwrap_err();
        assert!(matches!(err, Error::Feasibility { .. }));
        assert!(CloudConfig::new(10_000, 0.75, 0).validate().is_ok());
    }

    #[test]
    fn exhausted_budget_reported() {
        let mut cfg = CloudConfig::new(200, 0.8, 1);
        cfg.max_attempts = 1;
        let err = sample_cloud_seeded(&cfg).unwrap_err();
        assert!(matches!(err, Error::SamplingExhausted { .. }));
    }

    #[test]
    fn deterministic() {
        let cfg = CloudConfig::new(300, 0.5, 99);
        assert_eq!(sample_cloud_seeded(&cfg).unwrap(), sample_cloud_seeded(&cfg).unwrap());
    }

    /// χ² test of the x-marginal of a uniform ball point against
    /// `3(R² − x²)/(4R³)`.
    #[test]
    fn coordinate_marginal_uniform() {
        let cfg = CloudConfig::new(1000, 0.0, 11);
        let mut rng = crate::rng::from_seed(cfg.seed);
        let bins = 20;
        let r = cfg.cloud_radius();
        let mut counts = vec![0usize; bins];
        let mut total = 0;
        for _ in 0..200 {
            let c = sample_cloud(&cfg, &mut rng).unwrap();
            for p in &c.positions {
                let k = (((p[0] + r) / (2.0 * r)) * bins as f64) as usize;
                counts[k.min(bins - 1)] += 1;
                total += 1;
            }
        }
        let cdf = |x: f64| {
            let t = x / r;
            0.5 + 0.75 * t - 0.25 * t.powi(3)
        };
        let mut chi2 = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let lo = -r + 2.0 * r * k as f64 / bins as f64;
            let hi = lo + 2.0 * r / bins as f64;
            let e = total as f64 * (cdf(hi) - cdf(lo));
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // 99th percentile of χ² with 19 degrees of freedom
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn pair_distances_follow_closed_form() {
        let cfg = CloudConfig::new(1000, 0.0, 21);
        let mut rng = crate::rng::from_seed(cfg.seed);
        let p = GeometryParams::new(1000, 0.0).unwrap();
        let bins = 2000;
        let mut hist = vec![0u64; bins];
        for _ in 0..1000 {
            for r in pair_distances(&sample_cloud(&cfg, &mut rng).unwrap()) {
                hist[((r / p.d * bins as f64) as usize).min(bins - 1)] += 1;
            }
        }
        let n: u64 = hist.iter().sum();
        let mut acc = 0;
        let mut ks: f64 = 0.0;
        for (k, c) in hist.iter().enumerate() {
            acc += c;
            let edge = p.d * (k + 1) as f64 / bins as f64;
            ks = ks.max((acc as f64 / n as f64 - pair_distance_cdf(edge, &p)).abs());
        }
        assert!(ks < 0.01, "KS = {ks}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hard_core_and_ball(n in 2usize..300, rb in 0.0f64..0.8, seed in any::<u64>()) {
            let cfg = CloudConfig::new(n, rb, seed);
            prop_assume!(cfg.validate().is_ok());
            let c = sample_cloud_seeded(&cfg).unwrap();
            prop_assert_eq!(c.len(), n);
            for p in &c.positions {
                prop_assert!((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= c.cloud_radius);
            }
            prop_assert!(c.min_pair_distance() > rb);
        }
    }
}
