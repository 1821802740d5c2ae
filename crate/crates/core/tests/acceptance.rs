//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test --release -p rydspec --test acceptance`. The full
//! suite takes about fifty minutes on one core. Set
//! `RYDSPEC_FULL_SCALE=1` to add the N = 10⁴ transition-energy campaign
//! (hours).

use rydspec::analytic::{coupling_variance, goe_sigma, lambda_w, semicircle_cdf};
use rydspec::campaign::{coupling_moments, run, spacing_statistics, CampaignConfig, CampaignOutput};
use rydspec::locator::{
    dos_from_resolvent, f1, f2_constant, solve_high, solve_low,
    F2Settings, F2_CONSTANT,
};
use rydspec::spectra::{
    dos_density, support_width, tail_exponent, transition_energies, unfold, window_deviations,
    DensityCurve, SpectrumAccumulator, TransitionResult, TransitionSettings, Unfolding, Window,
    WindowSet,
};
use rydspec::{Complex64, EnsembleKind, EnsembleSpec, GeometryParams, SolverSettings};
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

const SEED: u64 = 20_240_917;

type Outcome = Result<(bool, String), String>;

fn campaign(kind: EnsembleKind, n: usize, rb: f64, reals: u64, seed: u64) -> CampaignOutput {
    let t = Instant::now();
    let mut cfg = CampaignConfig::new(EnsembleSpec::new(kind, n, rb), reals, seed);
    cfg.keep_spectra = true;
    let out = run(&cfg).expect("campaign");
    eprintln!(
        "  [campaign {} N={n} r_b={rb}: {reals} realizations, {} failed, {:.0?}]",
        kind.name(),
        out.failures.len(),
        t.elapsed()
    );
    out
}

fn rydberg_1k(rb: f64) -> &'static CampaignOutput {
    static C: [OnceLock<CampaignOutput>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let (slot, reals) = match rb {
        0.0 => (0, 2000),
        0.25 => (1, 400),
        0.5 => (2, 400),
        _ => (3, 400),
    };
    C[slot].get_or_init(|| campaign(EnsembleKind::Rydberg, 1000, rb, reals, SEED + slot as u64))
}

fn rydberg_2k() -> &'static CampaignOutput {
    static C: OnceLock<CampaignOutput> = OnceLock::new();
    C.get_or_init(|| campaign(EnsembleKind::Rydberg, 2000, 0.0, 300, SEED + 10))
}

fn quartile_shift(c: &DensityCurve) -> f64 {
    let (q1, q2, q3) = (c.quantile(0.25), c.quantile(0.5), c.quantile(0.75));
    (2.0 * q2 - q1 - q3) / (q3 - q1)
}

fn transition_windows(acc: &SpectrumAccumulator) -> WindowSet {
    let c = dos_density(acc);
    let top = c.quantile(0.9995).max(-c.quantile(0.0005));
    WindowSet::log_grid(0.05, top, 14).expect("window grid")
}

fn transitions(out: &CampaignOutput) -> Result<TransitionResult, String> {
    let windows = transition_windows(&out.spectrum);
    let sp = spacing_statistics(&out.levels(), &out.spectrum, &windows).map_err(|e| e.to_string())?;
    transition_energies(&sp, &TransitionSettings::default()).map_err(|e| e.to_string())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("none".into(), |v| format!("{v:.3}"))
}

/// Center- and wing-window deviations `(Δ_P, Δ_WD)`.
fn center_wings(out: &CampaignOutput, center: f64, wings: f64) -> Result<[(f64, f64); 2], String> {
    let windows = WindowSet::center_and_wings(center, wings).map_err(|e| e.to_string())?;
    let sp = spacing_statistics(&out.levels(), &out.spectrum, &windows).map_err(|e| e.to_string())?;
    let d = window_deviations(&sp);
    Ok([d[0], d[1]])
}

fn c1_cauchy() -> Outcome {
    let grid: Vec<f64> = (0..=400).map(|k| -50.0 + 0.25 * k as f64).collect();
    let sol = solve_low(1, 0.0, &grid, &SolverSettings::default()).map_err(|e| e.to_string())?;
    let worst = grid
        .iter()
        .zip(&sol.dos)
        .map(|(l, d)| (d - 1.0 / (l * l + PI * PI)).abs())
        .fold(0.0, f64::max);
    let accepted = sol.accepted_fraction();
    Ok((
        worst < 1e-6 && accepted == 1.0,
        format!("max |dos − 1/(λ²+π²)| = {worst:.2e} on 401 points (tol 1e-6), accepted {:.0}%", 100.0 * accepted),
    ))
}

fn c2_f2_constant() -> Outcome {
    let settings = F2Settings {
        points: 1 << 16,
        replicates: 16,
        seed: 7,
        ..F2Settings::default()
    };
    let g = Complex64::new(0.3, -0.8);
    let est = f2_constant(g, &settings).map_err(|e| e.to_string())?;
    let c = est.value;
    let target = Complex64::new(-1.223, 1.638);
    let half_unit = 0.005;
    let (dr, di) = ((c.re - F2_CONSTANT.re).abs(), (c.im - F2_CONSTANT.im).abs());
    let ok = (c.re - target.re).abs() <= half_unit && (c.im - target.im).abs() <= half_unit;
    Ok((
        ok,
        format!(
            "c = {:.4} {:+.4}i ± {:.4} vs reference {:.5} {:+.5}i; |Δre| = {dr:.4}, |Δim| = {di:.4} ({:.1}σ, {:.1}σ); 3 sig. digits = |Δ| ≤ 0.005",
            c.re, c.im, est.error, F2_CONSTANT.re, F2_CONSTANT.im, dr / est.error, di / est.error
        ),
    ))
}

fn c3_variance() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, rb, target, seed) in [(1000, 0.5, None, 1), (10_000, 0.75, Some(2.86e-4), 2)] {
        let p = GeometryParams::new(n, rb).map_err(|e| e.to_string())?;
        let formula = coupling_variance(&p).map_err(|e| e.to_string())?;
        let m = coupling_moments(&p, 10_000_000, SEED + seed);
        let v = m.variance();
        let dev = v / formula - 1.0;
        ok &= dev.abs() < 0.02;
        if let Some(t) = target {
            ok &= (formula / t - 1.0).abs() < 0.02;
            parts.push(format!("N={n} r_b={rb}: formula {formula:.4e} (reference {t:.2e}), sample {v:.4e} ({:+.2}%)", 100.0 * dev));
        } else {
            parts.push(format!("N={n} r_b={rb}: formula {formula:.4e}, sample {v:.4e} ({:+.2}%)", 100.0 * dev));
        }
    }
    Ok((ok, format!("{} (tol 2%, 10⁷ samples each)", parts.join("; "))))
}

fn c4_tail() -> Outcome {
    let out = rydberg_1k(0.0);
    let fit = tail_exponent(&out.spectrum, 10f64.powf(1.5), 1e3).map_err(|e| e.to_string())?;
    let ok = (fit.positive.slope + 2.0).abs() <= 0.15 && (fit.negative.slope + 2.0).abs() <= 0.15;
    Ok((
        ok,
        format!(
            "slopes +: {:.3} ± {:.3}, −: {:.3} ± {:.3} over |λ| ∈ [10^1.5, 10³], 2000 realizations N=10³ (tol −2 ± 0.15)",
            fit.positive.slope, fit.positive.stderr, fit.negative.slope, fit.negative.stderr
        ),
    ))
}

fn c5_dichotomy() -> Outcome {
    let out = rydberg_2k();
    let [center, wings] = center_wings(out, 0.2, 100.0)?;
    let ok = wings.0 < wings.1 && center.1 < center.0 && center.1 < 0.15;
    Ok((
        ok,
        format!(
            "|λ| ≥ 100: Δ_P = {:.3}, Δ_WD = {:.3}; |λ| ≤ 0.2: Δ_P = {:.3}, Δ_WD = {:.3} (need Δ_WD < 0.15); N=2×10³, 300 realizations",
            wings.0, wings.1, center.0, center.1
        ),
    ))
}

fn c6_transitions() -> Outcome {
    if std::env::var("RYDSPEC_FULL_SCALE").is_ok_and(|v| v == "1") {
        let big = campaign(EnsembleKind::Rydberg, 10_000, 0.0, 200, SEED + 20);
        let t = transitions(&big)?;
        let ok = matches!((t.lambda_minus(), t.lambda_plus()), (Some(m), Some(p)) if (m / -4.51 - 1.0).abs() <= 0.2 && (p / 2.14 - 1.0).abs() <= 0.2);
        println!(
            "{} #6a full-scale transitions: Λ⁻ = {}, Λ⁺ = {} (targets −4.51, 2.14 ± 20%)",
            if ok { "PASS" } else { "FAIL" },
            fmt_opt(t.lambda_minus()),
            fmt_opt(t.lambda_plus())
        );
    } else {
        println!("SKIP #6a full-scale transitions (N=10⁴, 200 realizations, hours): set RYDSPEC_FULL_SCALE=1 to run");
    }
    let r = transitions(rydberg_1k(0.0))?;
    let dec = campaign(EnsembleKind::Decorrelated, 1000, 0.0, 500, SEED + 30);
    let d = transitions(&dec)?;
    let asym = matches!((r.lambda_minus(), r.lambda_plus()), (Some(m), Some(p)) if m < 0.0 && p > 0.0 && m.abs() > p);
    let ratio = match (d.lambda_minus(), d.lambda_plus()) {
        (Some(m), Some(p)) => Some((m / p).abs()),
        _ => None,
    };
    let sym = ratio.is_some_and(|q| (q - 1.0).abs() < 0.1);
    Ok((
        asym && sym,
        format!(
            "desk scale N=10³: Rydberg Λ⁻ = {}, Λ⁺ = {} (need Λ⁻ < 0 < Λ⁺, |Λ⁻| > Λ⁺); decorrelated Λ⁻ = {}, Λ⁺ = {}, |Λ⁻/Λ⁺| = {} (need within 0.1 of 1)",
            fmt_opt(r.lambda_minus()),
            fmt_opt(r.lambda_plus()),
            fmt_opt(d.lambda_minus()),
            fmt_opt(d.lambda_plus()),
            fmt_opt(ratio)
        ),
    ))
}

fn c7_goe() -> Outcome {
    let p = GeometryParams::new(1000, 0.75).map_err(|e| e.to_string())?;
    let sigma = goe_sigma(&p).map_err(|e| e.to_string())?;
    let lw = lambda_w(&p).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let mut cfg = CampaignConfig::new(EnsembleSpec::goe(1000, sigma), 100, SEED + 40);
    cfg.keep_spectra = true;
    let out = run(&cfg).map_err(|e| e.to_string())?;
    eprintln!("  [campaign goe N=1000: 100 realizations, {:.0?}]", t.elapsed());
    let mut all: Vec<f64> = out.spectra.iter().flat_map(|s| s.1.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let n = all.len() as f64;
    let ks = all
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = semicircle_cdf(x, lw);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    let [center, _] = center_wings(&out, 0.25 * lw, 0.9 * lw)?;
    Ok((
        ks < 0.02 && center.1 < 0.1,
        format!(
            "Λ_W = {lw:.4} (σ from N=10³, r_b=0.75); KS = {ks:.4} (tol 0.02); center |λ| < Λ_W/4: Δ_WD = {:.3} (tol 0.1), Δ_P = {:.3}",
            center.1, center.0
        ),
    ))
}

/// Per-realization counts on unit bins over `[-20, 20]`, as densities with
/// standard errors from the realization spread.
fn unit_bins(out: &CampaignOutput) -> Vec<(f64, f64)> {
    let bins = 40;
    let r = out.spectra.len() as f64;
    let mut sum = vec![0.0; bins];
    let mut sq = vec![0.0; bins];
    for (_, levels) in &out.spectra {
        let mut c = vec![0.0; bins];
        for &x in levels {
            if (-20.0..20.0).contains(&x) {
                c[((x + 20.0).floor() as usize).min(bins - 1)] += 1.0;
            }
        }
        let per = levels.len() as f64;
        for k in 0..bins {
            sum[k] += c[k] / per;
            sq[k] += (c[k] / per).powi(2);
        }
    }
    (0..bins)
        .map(|k| {
            let mean = sum[k] / r;
            let var = (sq[k] / r - mean * mean).max(0.0) * r / (r - 1.0);
            (mean, (var / r).sqrt())
        })
        .collect()
}

fn c8_levy() -> Outcome {
    let levy = campaign(EnsembleKind::Levy1, 2000, 0.0, 150, SEED + 50);
    let dec = campaign(EnsembleKind::Decorrelated, 2000, 0.0, 150, SEED + 51);
    let (a, b) = (unit_bins(&levy), unit_bins(&dec));
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x.0 - y.0).abs() / (x.1 * x.1 + y.1 * y.1).sqrt().max(1e-300))
        .fold(0.0, f64::max);
    let ryd = rydberg_2k();
    let s = |o: &CampaignOutput| quartile_shift(&dos_density(&o.spectrum));
    let (sl, sd, sr) = (s(&levy), s(&dec), s(ryd));
    let ok = worst <= 3.0 && sl.abs() < 0.05 && sd.abs() < 0.05 && sr > 0.0;
    Ok((
        ok,
        format!(
            "max bin-wise |Δ|/SE = {worst:.2} over 40 unit bins |λ| ≤ 20 (tol 3); median-shift skewness Lévy {sl:+.4}, decorrelated {sd:+.4}, Rydberg {sr:+.4} (conventional moment skewness {:+.3}, {:+.3}, {:+.3})",
            levy.spectrum.moments.skewness(),
            dec.spectrum.moments.skewness(),
            ryd.spectrum.moments.skewness()
        ),
    ))
}

fn c9_blockade() -> Outcome {
    let radii = [0.0, 0.25, 0.5, 0.75];
    let widths: Vec<f64> = radii.iter().map(|&rb| support_width(&rydberg_1k(rb).spectrum, 0.01)).collect();
    let monotone = widths.windows(2).all(|w| w[1] < w[0]);
    let strong = rydberg_1k(0.75);
    let [center, _] = center_wings(strong, 0.2, 3.0)?;
    let t = transitions(strong)?;
    let ok = monotone && center.1 < center.0 && t.lambda_minus().is_none();
    Ok((
        ok,
        format!(
            "99% support widths {} for r_b = 0, 0.25, 0.5, 0.75 (N=10³); r_b=0.75 center |λ| ≤ 0.2: Δ_WD = {:.3}, Δ_P = {:.3}; negative-side transition: {}",
            widths.iter().map(|w| format!("{w:.2}")).collect::<Vec<_>>().join(", "),
            center.1,
            center.0,
            fmt_opt(t.lambda_minus())
        ),
    ))
}

/// Quantile of a sampled curve by trapezoidal cumulative integration.
fn curve_quantile(x: &[f64], f: &[f64], p: f64) -> f64 {
    let total: f64 = x.windows(2).zip(f.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum();
    let mut acc = 0.0;
    for i in 1..x.len() {
        let m = 0.5 * (x[i] - x[i - 1]) * (f[i - 1] + f[i]) / total;
        if acc + m >= p && m > 0.0 {
            return x[i - 1] + (p - acc) / m * (x[i] - x[i - 1]);
        }
        acc += m;
    }
    x[x.len() - 1]
}

fn c10_locator() -> Outcome {
    // order 1 at r_b = 0.5 against the ensemble on 0.25-wide bins
    let ens = dos_density(&rydberg_1k(0.5).spectrum);
    let (lo, hi) = (ens.quantile(0.1), ens.quantile(0.9));
    let width = 0.25;
    let first = (lo / width).ceil() as i64;
    let last = (hi / width).floor() as i64;
    let centers: Vec<f64> = (first..last).map(|k| (k as f64 + 0.5) * width).collect();
    let low = solve_low(1, 0.5, &centers, &SolverSettings::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (i, &c) in centers.iter().enumerate() {
        let (a, b) = (c - 0.5 * width, c + 0.5 * width);
        let mass: f64 = ens
            .bins
            .iter()
            .map(|bin| bin.density * (bin.right.min(b) - bin.left.max(a)).max(0.0))
            .sum();
        let e = mass / width;
        worst = worst.max((low.dos[i] - e).abs() / e);
    }
    let low_ok = worst <= 0.15 && low.accepted_fraction() == 1.0;

    // high concentration at r_b = 0.75
    let grid: Vec<f64> = (0..=300).map(|k| -9.0 + 0.05 * k as f64).collect();
    let high = solve_high(0.75, &grid, &SolverSettings::default()).map_err(|e| e.to_string())?;
    let norm = high.normalization();
    let asym = {
        let q = |p| curve_quantile(&grid, &high.dos, p);
        (2.0 * q(0.5) - q(0.25) - q(0.75)) / (q(0.75) - q(0.25))
    };
    let hw = curve_quantile(&grid, &high.dos, 0.995) - curve_quantile(&grid, &high.dos, 0.005);
    let ew = support_width(&rydberg_1k(0.75).spectrum, 0.01);
    let high_ok = (norm - 1.0).abs() <= 0.01 && asym.abs() > 0.01 && (hw / ew - 1.0).abs() <= 0.3;
    let mode = grid[high.dos.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
    Ok((
        low_ok && high_ok,
        format!(
            "order 1, r_b=0.5: max relative deviation {worst:.3} over {} bins in the central 80% [{lo:.2}, {hi:.2}] (tol 0.15); high, r_b=0.75: ∫dos = {norm:.4} (tol ±0.01), median-shift asymmetry {asym:+.3} (need |·| > 0.01), mode {mode:.2}, 99% width {hw:.2} vs ensemble {ew:.2} (ratio {:.2}, tol ±30%), accepted {:.0}%",
            centers.len(),
            hw / ew,
            100.0 * high.accepted_fraction()
        ),
    ))
}

fn c11_properties() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        ok &= pass;
        notes.push(format!("{name} {}", if pass { "ok" } else { "FAILED" }));
    };

    // matrix symmetry, zero diagonal and coupling bounds
    let mut sym = true;
    let mut bounded = true;
    for (i, spec) in [
        EnsembleSpec::new(EnsembleKind::Rydberg, 300, 0.5),
        EnsembleSpec::new(EnsembleKind::Decorrelated, 300, 0.5),
        EnsembleSpec::new(EnsembleKind::Levy1, 300, 0.0),
        EnsembleSpec::goe(300, 0.1),
    ]
    .iter()
    .enumerate()
    {
        let mut r = rydspec::rng::stream(SEED, 100 + i as u64);
        let m = spec.sample(&mut r).map_err(|e| e.to_string())?;
        sym &= m.is_symmetric_zero_diagonal();
        if spec.blockade_radius > 0.0 {
            let p = GeometryParams::new(spec.n_atoms, spec.blockade_radius).map_err(|e| e.to_string())?;
            let (lo, hi) = rydspec::analytic::coupling_support(&p);
            bounded &= m.upper().all(|(_, _, h)| h >= lo * (1.0 + 1e-12) && h <= hi * (1.0 + 1e-12));
        }
    }
    check("symmetry", sym);
    check("coupling-bounds", bounded);

    // merge associativity on real spectra
    let mut cfg = CampaignConfig::new(EnsembleSpec::new(EnsembleKind::Rydberg, 200, 0.0), 9, SEED);
    cfg.chunk = 2;
    let parts: Vec<SpectrumAccumulator> = (0..3)
        .map(|k| {
            let mut c = cfg.clone();
            c.first_index = 3 * k;
            c.realizations = 3;
            run(&c).map(|o| o.spectrum)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let left = parts[0].merge(&parts[1]).and_then(|x| x.merge(&parts[2])).map_err(|e| e.to_string())?;
    let right = parts[0].merge(&parts[1].merge(&parts[2]).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let whole = run(&cfg).map_err(|e| e.to_string())?.spectrum;
    check("merge-associativity", left.same_counts(&right) && left.same_counts(&whole));

    // Herglotz and branch continuity of the locator solutions
    let grid: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.5).collect();
    let mut herglotz = true;
    for rb in [0.0, 0.25, 0.5] {
        let s = solve_low(1, rb, &grid, &SolverSettings::default()).map_err(|e| e.to_string())?;
        herglotz &= s.g_values.iter().all(|g| g.im <= 0.0) && dos_from_resolvent(&s).map_err(|e| e.to_string())?.iter().all(|p| p.1 >= 0.0);
    }
    let mut rng = rydspec::rng::stream(SEED, 200);
    for _ in 0..200 {
        use rand::Rng;
        let g = Complex64::new(rng.random_range(-4.0..4.0), -rng.random_range(1e-3..3.0));
        herglotz &= (f1(g, rng.random_range(0.0..0.8)) / g).im <= 1e-12;
    }
    check("herglotz", herglotz);
    check("branch-continuity", rydspec::locator::f1::rb_continuity_deviation(1e-3, &rydspec::locator::f1::validation_grid()) < 1e-3);

    // ensemble-wide unfolding gives unit mean spacing in the bulk
    let out = rydberg_1k(0.75);
    let unfolding = Unfolding::from_accumulator(&out.spectrum).map_err(|e| e.to_string())?;
    let windows = WindowSet::new(vec![Window::interval("bulk", -1.5, 1.5)]).map_err(|e| e.to_string())?;
    let u = unfold(&out.levels(), &unfolding, &windows).map_err(|e| e.to_string())?;
    let raw = u.raw_means[0];
    check("unfolding-self-consistency", (raw - 1.0).abs() < 0.02);

    Ok((ok, format!("{}; unfolded raw mean spacing {raw:.4}; full proptest suites run under `cargo test`", notes.join(", "))))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("#1 cauchy-dos-oracle", c1_cauchy),
        ("#2 f2-constant", c2_f2_constant),
        ("#3 coupling-variance", c3_variance),
        ("#4 tail-law", c4_tail),
        ("#5 spacing-dichotomy", c5_dichotomy),
        ("#6 transition-energies", c6_transitions),
        ("#7 goe-limit", c7_goe),
        ("#8 levy-equivalence", c8_levy),
        ("#9 blockade-sweep", c9_blockade),
        ("#10 locator-vs-numerics", c10_locator),
        ("#11 property-suites", c11_properties),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|s| name.contains(s.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let (pass, detail) = match result {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} {name}: {detail} [{:.0?}]", if pass { "PASS" } else { "FAIL" }, t.elapsed());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
