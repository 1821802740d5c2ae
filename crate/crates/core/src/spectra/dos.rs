//! Pooled-eigenvalue histograms.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Histogram layout: linear bins on `[lin_min, lin_max)` and, per sign,
/// logarithmic bins in `|λ|` anchored at the linear range's edge and covering
/// `[log_min, log_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosBinning {
    pub lin_min: f64,
    pub lin_max: f64,
    pub lin_bins: usize,
    pub log_per_decade: usize,
    pub log_min: f64,
    pub log_max: f64,
}

impl Default for DosBinning {
    fn default() -> Self {
        Self {
            lin_min: -25.0,
            lin_max: 25.0,
            lin_bins: 1000,
            log_per_decade: 40,
            log_min: 1e-3,
            log_max: 1e7,
        }
    }
}

impl DosBinning {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lin_min < 0.0
            && self.lin_max > 0.0
            && self.lin_bins > 0
            && self.log_per_decade > 0
            && self.log_min > 0.0
            && self.log_min < self.lin_max.min(-self.lin_min)
            && self.log_max > self.lin_max.max(-self.lin_min);
        if ok {
            Ok(())
        } else {
            Err(Error::BinningMismatch(format!("inconsistent binning {self:?}")))
        }
    }

    fn lin_width(&self) -> f64 {
        (self.lin_max - self.lin_min) / self.lin_bins as f64
    }

    /// Log-bin edges in `|λ|` for one sign, anchored at `anchor`.
    fn log_edges(&self, anchor: f64) -> Vec<f64> {
        let pd = self.log_per_decade as f64;
        let k_lo = -(pd * (anchor / self.log_min).log10()).ceil() as i64;
        let k_hi = (pd * (self.log_max / anchor).log10()).ceil() as i64;
        (k_lo..=k_hi).map(|k| anchor * 10f64.powf(k as f64 / pd)).collect()
    }

    pub fn positive_edges(&self) -> Vec<f64> {
        self.log_edges(self.lin_max)
    }

    pub fn negative_edges(&self) -> Vec<f64> {
        self.log_edges(-self.lin_min)
    }
}

/// Pooled central moments, merged with the parallel update formulas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let t = delta * dn * n1;
        self.mean += dn;
        self.m3 += t * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t;
    }

    pub fn merge(&self, o: &Moments) -> Moments {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let d = o.mean - self.mean;
        Moments {
            n: self.n + o.n,
            mean: self.mean + d * nb / n,
            m2: self.m2 + o.m2 + d * d * na * nb / n,
            m3: self.m3
                + o.m3
                + d * d * d * na * nb * (na - nb) / (n * n)
                + 3.0 * d * (na * o.m2 - nb * self.m2) / n,
        }
    }

    pub fn variance(&self) -> f64 {
        self.m2 / self.n as f64
    }

    pub fn skewness(&self) -> f64 {
        let n = self.n as f64;
        (self.m3 / n) / (self.m2 / n).powf(1.5)
    }
}

/// Mergeable histograms of pooled eigenvalues.
///
/// Counts are integers, so merging is exactly associative and commutative.
/// `lin_sq` holds, per linear bin, the sum over realizations of the squared
/// per-realization count, which gives bin standard errors that account for
/// correlations between levels of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAccumulator {
    pub binning: DosBinning,
    pub lin: Vec<u64>,
    pub lin_sq: Vec<u64>,
    pub pos_log: Vec<u64>,
    pub neg_log: Vec<u64>,
    /// Levels with `|λ| < log_min` (per sign) and `|λ| ≥ log_max` (per sign).
    pub pos_under: u64,
    pub neg_under: u64,
    pub pos_over: u64,
    pub neg_over: u64,
    pub realizations: u64,
    pub eigenvalues: u64,
    pub moments: Moments,
}

impl SpectrumAccumulator {
    pub fn new(binning: DosBinning) -> Result<Self> {
        binning.validate()?;
        let np = binning.positive_edges().len() - 1;
        let nn = binning.negative_edges().len() - 1;
        Ok(Self {
            lin: vec![0; binning.lin_bins],
            lin_sq: vec![0; binning.lin_bins],
            pos_log: vec![0; np],
            neg_log: vec![0; nn],
            binning,
            pos_under: 0,
            neg_under: 0,
            pos_over: 0,
            neg_over: 0,
            realizations: 0,
            eigenvalues: 0,
            moments: Moments::default(),
        })
    }

    fn log_index(&self, x: f64, anchor: f64, len: usize) -> Option<usize> {
        let pd = self.binning.log_per_decade as f64;
        let k_lo = (pd * (anchor / self.binning.log_min).log10()).ceil();
        let k = (pd * (x / anchor).log10()).floor() + k_lo;
        if k < 0.0 || k as usize >= len {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Adds one realization's spectrum.
    pub fn accumulate(&mut self, eigs: &[f64]) {
        let b = &self.binning;
        let w = b.lin_width();
        let (lin_min, lin_max, log_min, log_max) = (b.lin_min, b.lin_max, b.log_min, b.log_max);
        let mut local: Vec<(usize, u64)> = Vec::new();
        for &x in eigs {
            self.moments.push(x);
            if x > lin_min && x < lin_max {
                let k = (((x - lin_min) / w) as usize).min(self.lin.len() - 1);
                self.lin[k] += 1;
                match local.last_mut() {
                    Some((j, c)) if *j == k => *c += 1,
                    _ => local.push((k, 1)),
                }
            }
            let a = x.abs();
            let positive = x >= 0.0;
            if a < log_min {
                if positive { self.pos_under += 1 } else { self.neg_under += 1 }
            } else if a >= log_max {
                if positive { self.pos_over += 1 } else { self.neg_over += 1 }
            } else if positive {
                let len = self.pos_log.len();
                if let Some(k) = self.log_index(a, lin_max, len) {
                    self.pos_log[k] += 1;
                }
            } else {
                let len = self.neg_log.len();
                if let Some(k) = self.log_index(a, -lin_min, len) {
                    self.neg_log[k] += 1;
                }
            }
        }
        // sorted input keeps equal bins adjacent; otherwise merge duplicates
        local.sort_unstable_by_key(|e| e.0);
        let mut i = 0;
        while i < local.len() {
            let k = local[i].0;
            let mut c = 0;
            while i < local.len() && local[i].0 == k {
                c += local[i].1;
                i += 1;
            }
            self.lin_sq[k] += c * c;
        }
        self.realizations += 1;
        self.eigenvalues += eigs.len() as u64;
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.binning != other.binning {
            return Err(Error::BinningMismatch(format!(
                "{:?} vs {:?}",
                self.binning, other.binning
            )));
        }
        let add = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Ok(Self {
            binning: self.binning.clone(),
            lin: add(&self.lin, &other.lin),
            lin_sq: add(&self.lin_sq, &other.lin_sq),
            pos_log: add(&self.pos_log, &other.pos_log),
            neg_log: add(&self.neg_log, &other.neg_log),
            pos_under: self.pos_under + other.pos_under,
            neg_under: self.neg_under + other.neg_under,
            pos_over: self.pos_over + other.pos_over,
            neg_over: self.neg_over + other.neg_over,
            realizations: self.realizations + other.realizations,
            eigenvalues: self.eigenvalues + other.eigenvalues,
            moments: self.moments.merge(&other.moments),
        })
    }

    /// Integer state only, for exact comparisons that ignore floating-point
    /// moments.
    pub fn same_counts(&self, other: &Self) -> bool {
        self.binning == other.binning
            && self.lin == other.lin
            && self.lin_sq == other.lin_sq
            && self.pos_log == other.pos_log
            && self.neg_log == other.neg_log
            && (self.pos_under, self.neg_under, self.pos_over, self.neg_over)
                == (other.pos_under, other.neg_under, other.pos_over, other.neg_over)
            && self.realizations == other.realizations
            && self.eigenvalues == other.eigenvalues
    }

    pub fn lin_edges(&self) -> Vec<f64> {
        let b = &self.binning;
        (0..=b.lin_bins).map(|k| b.lin_min + k as f64 * b.lin_width()).collect()
    }

    /// Standard error of the density in each linear bin, from the spread of
    /// per-realization counts.
    pub fn lin_standard_errors(&self) -> Vec<f64> {
        let r = self.realizations as f64;
        let w = self.binning.lin_width();
        let per = self.eigenvalues as f64 / r;
        self.lin
            .iter()
            .zip(&self.lin_sq)
            .map(|(&c, &s)| {
                let mean = c as f64 / r;
                let var = (s as f64 / r - mean * mean).max(0.0) * r / (r - 1.0).max(1.0);
                (var / r).sqrt() / (per * w)
            })
            .collect()
    }

    /// Cumulative fraction of levels below `x`, exact at every edge of the
    /// [`dos_density`] bins. Returns `(knots, fractions, counts)` with knots
    /// strictly increasing; `counts` are the raw cumulative counts.
    pub fn cumulative_knots(&self) -> (Vec<f64>, Vec<f64>, Vec<u64>) {
        let curve = dos_density(self);
        let total = self.eigenvalues.max(1) as f64;
        let mut xs = Vec::with_capacity(curve.bins.len() + 1);
        let mut cs = Vec::with_capacity(curve.bins.len() + 1);
        let mut acc = self.neg_over;
        if let Some(first) = curve.bins.first() {
            xs.push(first.left);
            cs.push(acc);
        }
        for b in &curve.bins {
            acc += b.count;
            xs.push(b.right);
            cs.push(acc);
        }
        let fr = cs.iter().map(|&c| c as f64 / total).collect();
        (xs, fr, cs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub left: f64,
    pub right: f64,
    pub density: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub bins: Vec<DensityBin>,
    /// Probability mass beyond the binned range.
    pub tail_mass: f64,
}

impl DensityCurve {
    /// Interpolated quantile of the binned distribution (tail mass split
    /// equally between both ends).
    pub fn quantile(&self, p: f64) -> f64 {
        let mut acc = 0.5 * self.tail_mass;
        for b in &self.bins {
            let m = b.density * (b.right - b.left);
            if acc + m >= p && m > 0.0 {
                return b.left + (p - acc) / m * (b.right - b.left);
            }
            acc += m;
        }
        self.bins.last().map_or(f64::NAN, |b| b.right)
    }
}

/// Normalized density: linear bins inside the linear range and log bins
/// outside it, so that `Σ density·width + tail_mass = 1`.
pub fn dos_density(acc: &SpectrumAccumulator) -> DensityCurve {
    let total = acc.eigenvalues.max(1) as f64;
    let b = &acc.binning;
    let mut bins = Vec::new();
    let neg = b.negative_edges();
    let pos = b.positive_edges();
    // negative log bins beyond the linear range, outermost first
    for k in (0..acc.neg_log.len()).rev() {
        if neg[k] >= -b.lin_min {
            let (l, r) = (-neg[k + 1].min(b.log_max), -neg[k]);
            bins.push(DensityBin {
                left: l,
                right: r,
                density: acc.neg_log[k] as f64 / (total * (r - l)),
                count: acc.neg_log[k],
            });
        }
    }
    let edges = acc.lin_edges();
    for (k, &c) in acc.lin.iter().enumerate() {
        bins.push(DensityBin {
            left: edges[k],
            right: edges[k + 1],
            density: c as f64 / (total * (edges[k + 1] - edges[k])),
            count: c,
        });
    }
    for k in 0..acc.pos_log.len() {
        if pos[k] >= b.lin_max {
            let (l, r) = (pos[k], pos[k + 1].min(b.log_max));
            bins.push(DensityBin {
                left: l,
                right: r,
                density: acc.pos_log[k] as f64 / (total * (r - l)),
                count: acc.pos_log[k],
            });
        }
    }
    let binned: u64 = bins.iter().map(|b| b.count).sum();
    DensityCurve {
        bins,
        tail_mass: acc.eigenvalues.saturating_sub(binned) as f64 / total,
    }
}

/// Width of the interval holding the central `1 − mass` of the levels.
pub fn support_width(acc: &SpectrumAccumulator, mass: f64) -> f64 {
    let c = dos_density(acc);
    c.quantile(1.0 - 0.5 * mass) - c.quantile(0.5 * mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub positive: SlopeFit,
    pub negative: SlopeFit,
}

fn fit_side(edges: &[f64], counts: &[u64], total: f64, lo: f64, hi: f64) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        let (l, r) = (edges[k], edges[k + 1]);
        if l >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12) && c > 0 {
            xs.push((l * r).sqrt().log10());
            ys.push((c as f64 / (total * (r - l))).log10());
        }
    }
    let n = xs.len();
    if n < 10 {
        return Err(Error::InsufficientTailData(format!(
            "{n} populated log bins in [{lo}, {hi}]"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        stderr: (rss / (nf - 2.0) / sxx).sqrt(),
        bins: n,
    })
}

/// Least-squares slope of `log f` against `log |λ|` over `|λ| ∈ [lo, hi]`,
/// separately per sign.
pub fn tail_exponent(acc: &SpectrumAccumulator, lo: f64, hi: f64) -> Result<TailFit> {
    let total = acc.eigenvalues as f64;
    Ok(TailFit {
        positive: fit_side(&acc.binning.positive_edges(), &acc.pos_log, total, lo, hi)?,
        negative: fit_side(&acc.binning.negative_edges(), &acc.neg_log, total, lo, hi)?,
    })
}
