//! Unfolding and nearest-neighbor spacing statistics in energy windows.

use super::dos::SpectrumAccumulator;
use super::pchip::Pchip;
use crate::analytic::XI;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SPACING_MAX: f64 = 5.0;
pub const SPACING_BINS: usize = 100;

/// Union of half-open intervals `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub label: String,
    #[serde(with = "bounds")]
    pub intervals: Vec<(f64, f64)>,
}

/// Interval bounds with `±inf` written as strings, since JSON has no
/// infinite numbers.
mod bounds {
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Bound {
        Finite(f64),
        Text(String),
    }

    fn wrap(x: f64) -> Bound {
        match x {
            f64::INFINITY => Bound::Text("inf".into()),
            f64::NEG_INFINITY => Bound::Text("-inf".into()),
            _ => Bound::Finite(x),
        }
    }

    fn unwrap<E: Error>(b: Bound) -> Result<f64, E> {
        match b {
            Bound::Finite(x) => Ok(x),
            Bound::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Bound::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Bound::Text(t) => Err(E::custom(format!("bad interval bound `{t}`"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
        let w: Vec<(Bound, Bound)> = v.iter().map(|&(a, b)| (wrap(a), wrap(b))).collect();
        w.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
        Vec::<(Bound, Bound)>::deserialize(d)?
            .into_iter()
            .map(|(a, b)| Ok((unwrap(a)?, unwrap(b)?)))
            .collect()
    }
}

impl Window {
    pub fn interval(label: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            label: label.into(),
            intervals: vec![(lo, hi)],
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| x >= lo && x < hi)
    }

    /// Representative energy: the signed geometric mean of a one-signed
    /// interval, the midpoint otherwise.
    pub fn center(&self) -> f64 {
        let (lo, hi) = self.intervals[0];
        if self.intervals.len() == 1 && lo > 0.0 {
            (lo * hi).sqrt()
        } else if self.intervals.len() == 1 && hi <= 0.0 {
            -(lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        }
    }

    /// `Some(+1)` or `Some(-1)` when the window lies on one side of zero.
    pub fn sign(&self) -> Option<i8> {
        if self.intervals.iter().all(|&(lo, _)| lo >= 0.0) {
            Some(1)
        } else if self.intervals.iter().all(|&(_, hi)| hi <= 0.0) {
            Some(-1)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub windows: Vec<Window>,
}

impl WindowSet {
    pub fn new(windows: Vec<Window>) -> Result<Self> {
        let set = Self { windows };
        set.validate()?;
        Ok(set)
    }

    /// `per_sign` logarithmically spaced windows in `|λ| ∈ [min, max]` on
    /// each side of zero, negative side first, ordered by energy.
    pub fn log_grid(min: f64, max: f64, per_sign: usize) -> Result<Self> {
        if !(min > 0.0 && max > min && per_sign > 0) {
            return Err(Error::InsufficientWindows("invalid log window grid".into()));
        }
        let edges: Vec<f64> = (0..=per_sign)
            .map(|k| min * (max / min).powf(k as f64 / per_sign as f64))
            .collect();
        let mut windows = Vec::with_capacity(2 * per_sign);
        for k in (0..per_sign).rev() {
            windows.push(Window::interval(format!("neg{k:02}"), -edges[k + 1], -edges[k]));
        }
        for k in 0..per_sign {
            windows.push(Window::interval(format!("pos{k:02}"), edges[k], edges[k + 1]));
        }
        Self::new(windows)
    }

    /// Default grid: 14 windows per sign over `|λ| ∈ [0.05, 1000]`.
    pub fn default_log_grid() -> Self {
        Self::log_grid(0.05, 1e3, 14).expect("valid defaults")
    }

    /// A center window `|λ| < center` and a wing window `|λ| ≥ wings`.
    pub fn center_and_wings(center: f64, wings: f64) -> Result<Self> {
        Self::new(vec![
            Window::interval("center", -center, center),
            Window {
                label: "wings".into(),
                intervals: vec![(f64::NEG_INFINITY, -wings + f64::EPSILON * wings), (wings, f64::INFINITY)],
            },
        ])
    }

    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<(f64, f64)> = self.windows.iter().flat_map(|w| w.intervals.iter().copied()).collect();
        if all.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::InsufficientWindows("empty interval".into()));
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        if all.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::InsufficientWindows("windows overlap".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Smoothed integrated density of states `N̄(λ)`, scaled to the number of
/// levels per realization.
#[derive(Debug, Clone)]
pub struct Unfolding {
    curve: Pchip,
    levels: f64,
}

impl Unfolding {
    /// Monotone cubic through the pooled cumulative distribution, with knots
    /// thinned so every knot interval holds at least
    /// `clamp(total / 400, 20, 100)` levels.
    pub fn from_accumulator(acc: &SpectrumAccumulator) -> Result<Self> {
        if acc.realizations == 0 || acc.eigenvalues == 0 {
            return Err(Error::InsufficientWindows("empty spectrum accumulator".into()));
        }
        let (x, f, c) = acc.cumulative_knots();
        let min_count = (acc.eigenvalues / 400).clamp(20, 100);
        let mut kx = vec![x[0]];
        let mut kf = vec![f[0]];
        let mut last = c[0];
        for i in 1..x.len() {
            let is_end = i == x.len() - 1;
            if c[i] - last >= min_count || is_end {
                if is_end && c[i] - last < min_count && kx.len() > 1 {
                    // fold a thin last interval into its predecessor
                    kx.pop();
                    kf.pop();
                }
                kx.push(x[i]);
                kf.push(f[i]);
                last = c[i];
            }
        }
        if kx.len() < 2 {
            return Err(Error::InsufficientWindows("too few knots to unfold".into()));
        }
        Ok(Self {
            curve: Pchip::new(kx, kf),
            levels: acc.eigenvalues as f64 / acc.realizations as f64,
        })
    }

    /// Unfolding with a known cumulative distribution `cdf`.
    pub fn from_cdf(cdf: impl Fn(f64) -> f64, lo: f64, hi: f64, knots: usize, levels: f64) -> Self {
        let x: Vec<f64> = (0..knots).map(|k| lo + (hi - lo) * k as f64 / (knots - 1) as f64).collect();
        let y = x.iter().map(|&t| cdf(t)).collect();
        Self {
            curve: Pchip::new(x, y),
            levels,
        }
    }

    pub fn map(&self, lambda: f64) -> f64 {
        self.levels * self.curve.eval(lambda)
    }
}

/// Per-window unfolded spacings rescaled to unit mean.
#[derive(Debug, Clone)]
pub struct UnfoldedSpacings {
    pub windows: WindowSet,
    pub spacings: Vec<Vec<f64>>,
    /// Mean spacing before the window rescaling.
    pub raw_means: Vec<f64>,
}

/// Maps every level through `unfolding`, collects differences of consecutive
/// levels that fall in the same window interval, and rescales each window's
/// spacings to unit mean. Realizations with fewer than two levels in a
/// window contribute nothing to it; a window with no spacing at all is an
/// error.
pub fn unfold(spectra: &[Vec<f64>], unfolding: &Unfolding, windows: &WindowSet) -> Result<UnfoldedSpacings> {
    let mut spacings = vec![Vec::new(); windows.len()];
    for levels in spectra {
        debug_assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        for (wi, w) in windows.windows.iter().enumerate() {
            for &(lo, hi) in &w.intervals {
                let a = levels.partition_point(|&x| x < lo);
                let b = levels.partition_point(|&x| x < hi);
                if b > a + 1 {
                    let mut prev = unfolding.map(levels[a]);
                    for &x in &levels[a + 1..b] {
                        let u = unfolding.map(x);
                        spacings[wi].push(u - prev);
                        prev = u;
                    }
                }
            }
        }
    }
    let mut raw_means = Vec::with_capacity(windows.len());
    for (wi, s) in spacings.iter_mut().enumerate() {
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        if s.is_empty() || !(mean > 0.0) {
            let (lo, hi) = windows.windows[wi].intervals[0];
            return Err(Error::EmptyWindow { lo, hi });
        }
        s.iter_mut().for_each(|v| *v /= mean);
        raw_means.push(mean);
    }
    Ok(UnfoldedSpacings {
        windows: windows.clone(),
        spacings,
        raw_means,
    })
}

/// Per-window spacing histograms on `[0, s_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingAccumulator {
    pub windows: WindowSet,
    pub s_max: f64,
    pub bins: usize,
    pub hist: Vec<Vec<u64>>,
    pub overflow: Vec<u64>,
}

impl SpacingAccumulator {
    pub fn new(windows: WindowSet, s_max: f64, bins: usize) -> Self {
        let n = windows.len();
        Self {
            windows,
            s_max,
            bins,
            hist: vec![vec![0; bins]; n],
            overflow: vec![0; n],
        }
    }

    pub fn from_spacings(u: &UnfoldedSpacings) -> Self {
        let mut acc = Self::new(u.windows.clone(), SPACING_MAX, SPACING_BINS);
        for (wi, s) in u.spacings.iter().enumerate() {
            acc.add(wi, s);
        }
        acc
    }

    pub fn add(&mut self, window: usize, spacings: &[f64]) {
        let ds = self.s_max / self.bins as f64;
        for &s in spacings {
            let k = (s / ds) as usize;
            if s >= 0.0 && k < self.bins {
                self.hist[window][k] += 1;
            } else {
                self.overflow[window] += 1;
            }
        }
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.windows != other.windows || self.s_max != other.s_max || self.bins != other.bins {
            return Err(Error::BinningMismatch("spacing windows or bins differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.hist.iter_mut().zip(&other.hist) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        out.overflow.iter_mut().zip(&other.overflow).for_each(|(x, y)| *x += y);
        Ok(out)
    }

    pub fn count(&self, window: usize) -> u64 {
        self.hist[window].iter().sum::<u64>() + self.overflow[window]
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|k| self.s_max * k as f64 / self.bins as f64).collect()
    }

    /// Density normalized by the total number of spacings (including those
    /// beyond `s_max`).
    pub fn density(&self, window: usize) -> Vec<f64> {
        let n = self.count(window).max(1) as f64;
        let ds = self.s_max / self.bins as f64;
        self.hist[window].iter().map(|&c| c as f64 / (n * ds)).collect()
    }

    /// `(Δ_P, Δ_WD)` of one window.
    pub fn deviations(&self, window: usize) -> (f64, f64) {
        let f = self.density(window);
        (
            rms_deviation(&f, self.s_max, SpacingLaw::Poisson),
            rms_deviation(&f, self.s_max, SpacingLaw::WignerDyson),
        )
    }
}

/// `(Δ_P, Δ_WD)` for every window.
pub fn window_deviations(acc: &SpacingAccumulator) -> Vec<(f64, f64)> {
    (0..acc.windows.len()).map(|w| acc.deviations(w)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpacingLaw {
    Poisson,
    WignerDyson,
}

impl SpacingLaw {
    pub fn density(self, s: f64) -> f64 {
        match self {
            SpacingLaw::Poisson => crate::analytic::poisson_spacing(s),
            SpacingLaw::WignerDyson => crate::analytic::wigner_spacing(s),
        }
    }

    pub fn cdf(self, s: f64) -> f64 {
        match self {
            SpacingLaw::Poisson => 1.0 - (-s).exp(),
            SpacingLaw::WignerDyson => 1.0 - (-0.25 * std::f64::consts::PI * s * s).exp(),
        }
    }
}

/// `Δ[f, g] = ‖f − g‖₂ / ξ` for a histogram density `f` on `[0, s_max)` with
/// equal bins, integrated over the grid only; `g` is averaged over each bin.
pub fn rms_deviation(f: &[f64], s_max: f64, law: SpacingLaw) -> f64 {
    let ds = s_max / f.len() as f64;
    let mut sum = 0.0;
    for (k, &fk) in f.iter().enumerate() {
        let g = (law.cdf((k + 1) as f64 * ds) - law.cdf(k as f64 * ds)) / ds;
        sum += (fk - g).powi(2) * ds;
    }
    sum.sqrt() / XI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::dos::DosBinning;
    use rand::Rng;

    fn binned(law: SpacingLaw) -> Vec<f64> {
        let ds = SPACING_MAX / SPACING_BINS as f64;
        (0..SPACING_BINS)
            .map(|k| (law.cdf((k + 1) as f64 * ds) - law.cdf(k as f64 * ds)) / ds)
            .collect()
    }

    #[test]
    fn deviation_scale() {
        let p = binned(SpacingLaw::Poisson);
        let w = binned(SpacingLaw::WignerDyson);
        assert!(rms_deviation(&p, SPACING_MAX, SpacingLaw::Poisson).abs() < 1e-6);
        let d = rms_deviation(&p, SPACING_MAX, SpacingLaw::WignerDyson);
        assert!((d - 1.0).abs() < 2e-3, "{d}");
        let d = rms_deviation(&w, SPACING_MAX, SpacingLaw::Poisson);
        assert!((d - 1.0).abs() < 2e-3, "{d}");
    }

    #[test]
    fn picket_fence() {
        let spectra: Vec<Vec<f64>> = (0..5).map(|_| (0..100).map(|i| i as f64 * 0.3 - 15.0).collect()).collect();
        let unf = Unfolding::from_cdf(|x| (x + 15.0) / 30.0, -15.0, 15.0, 11, 100.0);
        let w = WindowSet::new(vec![Window::interval("all", -10.0, 10.0)]).unwrap();
        let u = unfold(&spectra, &unf, &w).unwrap();
        assert!(u.spacings[0].iter().all(|s| (s - 1.0).abs() < 1e-9));
    }

    #[test]
    fn poisson_process() {
        // uniform levels on [0, 1): exponential spacings after unfolding
        let mut rng = crate::rng::from_seed(5);
        let mut acc = SpectrumAccumulator::new(DosBinning::default()).unwrap();
        let spectra: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let mut v: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
                v.sort_by(f64::total_cmp);
                acc.accumulate(&v);
                v
            })
            .collect();
        let unf = Unfolding::from_accumulator(&acc).unwrap();
        let w = WindowSet::new(vec![Window::interval("mid", 0.1, 0.9)]).unwrap();
        let u = unfold(&spectra, &unf, &w).unwrap();
        let mut s = u.spacings[0].clone();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.02);
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = SpacingLaw::Poisson.cdf(x);
                (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS {ks}");
        let hist = SpacingAccumulator::from_spacings(&u);
        let (dp, dw) = hist.deviations(0);
        assert!(dp < dw);
    }

    #[test]
    fn empty_window_is_reported() {
        let spectra = vec![vec![0.0, 1.0, 2.0]];
        let unf = Unfolding::from_cdf(|x| x / 2.0, 0.0, 2.0, 3, 3.0);
        let w = WindowSet::new(vec![Window::interval("far", 10.0, 20.0)]).unwrap();
        assert!(matches!(unfold(&spectra, &unf, &w), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn window_sets() {
        let g = WindowSet::default_log_grid();
        assert_eq!(g.len(), 28);
        assert!(g.windows[..14].iter().all(|w| w.sign() == Some(-1)));
        assert!(g.windows[14..].iter().all(|w| w.sign() == Some(1)));
        assert!((g.windows[14].intervals[0].0 - 0.05).abs() < 1e-15);
        assert!((g.windows[27].intervals[0].1 - 1e3).abs() < 1e-9);
        let cw = WindowSet::center_and_wings(0.2, 100.0).unwrap();
        assert!(cw.windows[1].contains(-150.0) && cw.windows[1].contains(100.0));
        assert!(!cw.windows[1].contains(50.0));
        assert!(WindowSet::new(vec![
            Window::interval("a", 0.0, 2.0),
            Window::interval("b", 1.0, 3.0)
        ])
        .is_err());
    }
}
