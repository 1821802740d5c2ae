use crate::config::{Command, LocatorMethod, Quantity, RunConfig};
use crate::output::{
    num, read_csv, read_spectra, read_state, read_summary, write_failures, write_spectra, write_state, Csv,
    RunState, Shard, Summary,
};
use anyhow::{bail, Context, Result};
use rydspec::analytic::{
    coupling_pdf, coupling_support, lambda_w, pair_distance_cdf, pair_distance_pdf, poisson_spacing, semicircle,
    semicircle_cdf, wigner_spacing,
};
use rydspec::campaign::{run_with_progress, spacing_statistics, CampaignConfig, Failure};
use rydspec::locator::{solve_high, solve_low, ResolventSolution};
use rydspec::spectra::{
    dos_density, support_width, tail_exponent, transition_energies, window_deviations, SpacingAccumulator,
    SpectrumAccumulator, SPACING_MAX,
};
use rydspec::{EnsembleKind, GeometryParams};
use std::path::Path;
use std::time::Instant;

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Summary> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("out: cannot create {}", cfg.out.display()))?;
    let probe = cfg.out.join(".write-test");
    std::fs::write(&probe, b"").with_context(|| format!("out: {} is not writable", cfg.out.display()))?;
    std::fs::remove_file(&probe).ok();

    let hash = cfg.hash();
    let mut summary = Summary::default();
    summary.set("version", env!("CARGO_PKG_VERSION"));
    summary.set("schema_version", cfg.version);
    summary.set("command", command.name());
    summary.set("config_hash", &hash);
    summary.set("config", serde_json::to_string(cfg)?);
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    summary.set("workers", pool.current_num_threads());
    pool.install(|| match command {
        Command::Spectra | Command::Spacing | Command::Transition => ensemble(command, cfg, &hash, &mut summary),
        Command::Locator => locator(cfg, &hash, &mut summary),
        Command::TabulateAnalytic => analytic(cfg, &hash, &mut summary),
        Command::Compare => compare(cfg, &hash, &mut summary),
        Command::Merge => merge(cfg, &hash, &mut summary),
    })?;
    summary.set("wall_time_s", format!("{:.3}", start.elapsed().as_secs_f64()));
    summary.write(&cfg.out)?;
    Ok(summary)
}

fn ensemble(command: Command, cfg: &RunConfig, hash: &str, summary: &mut Summary) -> Result<()> {
    let spec = cfg.ensemble.expect("validated");
    let campaign = CampaignConfig {
        ensemble: spec,
        realizations: cfg.realizations,
        seed: cfg.seed,
        first_index: cfg.first_index,
        binning: cfg.binning.clone(),
        chunk: cfg.chunk,
        keep_spectra: command != Command::Spectra,
    };
    let total = cfg.realizations;
    let step = (total / 20).max(1);
    let out = run_with_progress(&campaign, |done| {
        if done % step < cfg.chunk as u64 || done == total {
            log::info!("{done}/{total} realizations");
        }
    })?;
    let shard = Shard {
        seed: cfg.seed,
        first_index: cfg.first_index,
        realizations: cfg.realizations,
    };
    describe_ensemble(summary, &spec, &[shard]);
    write_failures(&cfg.out, hash, &out.failures)?;
    let levels = (command != Command::Spectra).then(|| out.levels());
    let (windows, spacing) = products(command, cfg, hash, &out.spectrum, levels.as_deref(), None, &out.failures, summary)?;
    if command != Command::Spectra {
        write_spectra(&cfg.out, &out.spectra)?;
    }
    write_state(
        &cfg.out,
        &RunState {
            version: cfg.version,
            command: command.name().into(),
            config_hash: hash.into(),
            ensemble: spec,
            shards: vec![shard],
            spectrum: out.spectrum,
            windows,
            spacing,
            failures: out.failures,
            has_spectra: command != Command::Spectra,
        },
    )
}

fn describe_ensemble(summary: &mut Summary, spec: &rydspec::EnsembleSpec, shards: &[Shard]) {
    summary.set("ensemble", spec.kind.name());
    summary.set("n_atoms", spec.n_atoms);
    summary.set("blockade_radius", spec.blockade_radius);
    if spec.kind == EnsembleKind::Goe {
        summary.set("goe_sigma", spec.sigma().map_or("unavailable".into(), num));
    }
    if spec.kind == EnsembleKind::Rydberg {
        summary.set("sampling_scheme", rydspec::cloud::SAMPLING_SCHEME);
    }
    let shards: Vec<String> = shards
        .iter()
        .map(|s| format!("{}:{}+{}", s.seed, s.first_index, s.realizations))
        .collect();
    summary.set("shards", shards.join(" "));
}

/// DOS, spacing and transition outputs shared by fresh runs and merges.
#[allow(clippy::too_many_arguments)]
fn products(
    command: Command,
    cfg: &RunConfig,
    hash: &str,
    spectrum: &SpectrumAccumulator,
    levels: Option<&[Vec<f64>]>,
    spacing_in: Option<SpacingAccumulator>,
    failures: &[Failure],
    summary: &mut Summary,
) -> Result<(Option<rydspec::WindowSet>, Option<SpacingAccumulator>)> {
    summary.set("realizations_requested", spectrum.realizations + failures.len() as u64);
    summary.set("realizations_completed", spectrum.realizations);
    summary.set("realizations_failed", failures.len());
    summary.set("eigenvalues", spectrum.eigenvalues);

    let curve = dos_density(spectrum);
    let errors = spectrum.lin_standard_errors();
    let lin_start = curve.bins.iter().position(|b| b.left >= spectrum.binning.lin_min - 1e-12).unwrap_or(0);
    let mut csv = Csv::create(&cfg.out.join("dos.csv"), hash, &["left", "right", "center", "density", "stderr", "count"])?;
    for (i, b) in curve.bins.iter().enumerate() {
        let err = i
            .checked_sub(lin_start)
            .and_then(|k| errors.get(k))
            .map_or(String::new(), |&e| num(e));
        csv.row(&[num(b.left), num(b.right), num(0.5 * (b.left + b.right)), num(b.density), err, b.count.to_string()])?;
    }
    csv.finish()?;
    summary.set("dos_bins", curve.bins.len());
    summary.set("dos_tail_mass", num(curve.tail_mass));
    summary.set("mean", num(spectrum.moments.mean));
    summary.set("variance", num(spectrum.moments.variance()));
    summary.set("moment_skewness", num(spectrum.moments.skewness()));
    let (q1, q2, q3) = (curve.quantile(0.25), curve.quantile(0.5), curve.quantile(0.75));
    summary.set("median", num(q2));
    summary.set("median_shift_skewness", num((2.0 * q2 - q1 - q3) / (q3 - q1)));
    summary.set("support_width_99", num(support_width(spectrum, 0.01)));
    match tail_exponent(spectrum, cfg.tail.lo, cfg.tail.hi) {
        Ok(fit) => {
            summary.set("tail_slope_positive", format!("{} ± {}", num(fit.positive.slope), num(fit.positive.stderr)));
            summary.set("tail_slope_negative", format!("{} ± {}", num(fit.negative.slope), num(fit.negative.stderr)));
        }
        Err(e) => summary.set("tail_slope", format!("unavailable ({e})")),
    }
    if command == Command::Spectra {
        return Ok((None, None));
    }

    let spacing = match (levels, spacing_in) {
        (Some(levels), _) => {
            let windows = cfg
                .windows
                .build(|| curve.quantile(0.9995).max(-curve.quantile(0.0005)))
                .context("windows")?;
            spacing_statistics(levels, spectrum, &windows)?
        }
        (None, Some(sp)) => sp,
        (None, None) => bail!("no spectra or spacing histograms to analyze"),
    };
    let deviations = window_deviations(&spacing);
    let edges = spacing.edges();
    let mut hist = Csv::create(&cfg.out.join("spacing.csv"), hash, &["window", "label", "s_left", "s_right", "density", "poisson", "wigner_dyson"])?;
    for (w, win) in spacing.windows.windows.iter().enumerate() {
        for (k, f) in spacing.density(w).iter().enumerate() {
            let (l, r) = (edges[k], edges[k + 1]);
            let avg = |g: fn(f64) -> f64| (0..8).map(|j| g(l + (j as f64 + 0.5) * (r - l) / 8.0)).sum::<f64>() / 8.0;
            hist.row(&[w.to_string(), win.label.clone(), num(l), num(r), num(*f), num(avg(poisson_spacing)), num(avg(wigner_spacing))])?;
        }
    }
    hist.finish()?;
    let mut dev = Csv::create(&cfg.out.join("deviations.csv"), hash, &["window", "label", "lo", "hi", "center", "spacings", "overflow", "delta_p", "delta_wd"])?;
    for (w, win) in spacing.windows.windows.iter().enumerate() {
        let lo = win.intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
        let hi = win.intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max);
        dev.row(&[
            w.to_string(),
            win.label.clone(),
            num(lo),
            num(hi),
            num(win.center()),
            spacing.count(w).to_string(),
            spacing.overflow[w].to_string(),
            num(deviations[w].0),
            num(deviations[w].1),
        ])?;
    }
    dev.finish()?;
    summary.set("spacing_windows", spacing.windows.len());
    summary.set("spacing_range", format!("[0, {SPACING_MAX})"));

    if command == Command::Transition {
        match transition_energies(&spacing, &cfg.transition) {
            Ok(t) => {
                let mut csv = Csv::create(&cfg.out.join("transition.csv"), hash, &["side", "center", "spacings", "delta_p", "delta_wd"])?;
                for (name, side) in [("negative", &t.minus), ("positive", &t.plus)] {
                    for i in 0..side.centers.len() {
                        csv.row(&[name.into(), num(side.centers[i]), side.counts[i].to_string(), num(side.delta_p[i]), num(side.delta_wd[i])])?;
                    }
                }
                csv.finish()?;
                summary.set("lambda_tr_minus", t.lambda_minus().map_or("none".into(), num));
                summary.set("lambda_tr_plus", t.lambda_plus().map_or("none".into(), num));
                summary.set("dominant_minus", format!("{:?}", t.minus.dominant));
                summary.set("dominant_plus", format!("{:?}", t.plus.dominant));
                summary.set("fit_degree", t.degree);
            }
            Err(e) => summary.set("transition", format!("unavailable ({e})")),
        }
    }
    Ok((Some(spacing.windows.clone()), Some(spacing)))
}

fn locator(cfg: &RunConfig, hash: &str, summary: &mut Summary) -> Result<()> {
    let l = cfg.locator.as_ref().expect("validated");
    let grid = l.grid.build();
    summary.set("method", match l.method {
        LocatorMethod::Low => format!("low order {}", l.order),
        LocatorMethod::High => "high".into(),
    });
    summary.set("grid_points", grid.len());
    summary.set("epsilon_schedule", format!("{:?}", l.solver.epsilons()));
    for &rb in &l.blockade_radii {
        let t = Instant::now();
        let sol = match l.method {
            LocatorMethod::Low => solve_low(l.order, rb, &grid, &l.solver)?,
            LocatorMethod::High => solve_high(rb, &grid, &l.solver)?,
        };
        let name = format!("locator_{}_rb{rb}.csv", sol.method.label());
        write_curve(&cfg.out.join(&name), hash, &sol)?;
        let key = format!("rb{rb}");
        let max_res = sol
            .diagnostics
            .iter()
            .filter(|d| d.accepted)
            .map(|d| d.residual)
            .fold(0.0, f64::max);
        summary.set(&format!("{key}.file"), &name);
        summary.set(&format!("{key}.accepted_fraction"), num(sol.accepted_fraction()));
        summary.set(&format!("{key}.normalization"), num(sol.normalization()));
        summary.set(&format!("{key}.max_accepted_residual"), num(max_res));
        summary.set(&format!("{key}.flagged_points"), sol.diagnostics.iter().filter(|d| d.flagged).count());
        summary.set(&format!("{key}.branch_fallbacks"), sol.diagnostics.iter().filter(|d| d.branch_fallback).count());
        summary.set(&format!("{key}.ambiguous_points"), sol.diagnostics.iter().filter(|d| d.alternate.is_some()).count());
        if l.method == LocatorMethod::Low && l.order == 2 && rb >= 0.75 {
            summary.set(&format!("{key}.experimental"), "true (second order at strong blockade; trust λ < 5 only)");
        }
        summary.set(&format!("{key}.wall_time_s"), format!("{:.3}", t.elapsed().as_secs_f64()));
        log::info!("r_b = {rb}: {:.1}% of points accepted", 100.0 * sol.accepted_fraction());
    }
    Ok(())
}

fn write_curve(path: &Path, hash: &str, sol: &ResolventSolution) -> Result<()> {
    let mut csv = Csv::create(
        path,
        hash,
        &["lambda", "re_g", "im_g", "dos", "residual", "epsilon", "accepted", "dos_change", "stage", "flagged", "alt_re_g", "alt_im_g"],
    )?;
    for (i, &x) in sol.lambda_grid.iter().enumerate() {
        let d = &sol.diagnostics[i];
        let g = sol.g_values[i];
        let (ar, ai) = d.alternate.map_or((String::new(), String::new()), |a| (num(a.re), num(a.im)));
        csv.row(&[
            num(x),
            num(g.re),
            num(g.im),
            num(sol.dos[i]),
            num(d.residual),
            num(sol.epsilon),
            d.accepted.to_string(),
            num(d.dos_change),
            serde_json::to_value(d.stage)?.as_str().unwrap_or_default().to_owned(),
            d.flagged.to_string(),
            ar,
            ai,
        ])?;
    }
    csv.finish()
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

fn analytic(cfg: &RunConfig, hash: &str, summary: &mut Summary) -> Result<()> {
    let a = cfg.analytic.as_ref().expect("validated");
    let path = cfg.out.join("analytic.csv");
    summary.set("quantity", serde_json::to_value(a.quantity)?.as_str().unwrap_or_default());
    if a.quantity == Quantity::SpacingLaws {
        let [lo, hi] = a.range.unwrap_or([0.0, SPACING_MAX]);
        let mut csv = Csv::create(&path, hash, &["s", "poisson", "wigner_dyson"])?;
        for s in linspace(lo, hi, a.points) {
            csv.row(&[num(s), num(poisson_spacing(s)), num(wigner_spacing(s))])?;
        }
        return csv.finish();
    }
    let e = cfg.ensemble.expect("validated");
    let p = GeometryParams::new(e.n_atoms, e.blockade_radius)?;
    summary.set("n_atoms", e.n_atoms);
    summary.set("blockade_radius", e.blockade_radius);
    match a.quantity {
        Quantity::CouplingPdf => {
            let [lo, hi] = a.range.unwrap_or_else(|| {
                let (lo, hi) = coupling_support(&p);
                if lo.is_finite() {
                    [lo, hi]
                } else {
                    let scale = 50.0 / e.n_atoms as f64;
                    [-scale, scale]
                }
            });
            let mut csv = Csv::create(&path, hash, &["h", "pdf"])?;
            for h in linspace(lo, hi, a.points) {
                csv.row(&[num(h), num(coupling_pdf(h, &p))])?;
            }
            csv.finish()?;
            summary.set("range", format!("[{}, {}]", num(lo), num(hi)));
        }
        Quantity::PairDistancePdf => {
            let [lo, hi] = a.range.unwrap_or([e.blockade_radius, p.d]);
            let mut csv = Csv::create(&path, hash, &["r", "pdf", "cdf"])?;
            for r in linspace(lo, hi, a.points) {
                csv.row(&[num(r), num(pair_distance_pdf(r, &p)), num(pair_distance_cdf(r, &p))])?;
            }
            csv.finish()?;
        }
        Quantity::Semicircle => {
            let lw = lambda_w(&p)?;
            let [lo, hi] = a.range.unwrap_or([-1.1 * lw, 1.1 * lw]);
            let mut csv = Csv::create(&path, hash, &["lambda", "density", "cdf"])?;
            for x in linspace(lo, hi, a.points) {
                csv.row(&[num(x), num(semicircle(x, lw)?), num(semicircle_cdf(x, lw))])?;
            }
            csv.finish()?;
            summary.set("lambda_w", num(lw));
        }
        Quantity::SpacingLaws => unreachable!(),
    }
    Ok(())
}

/// A curve from a run directory with the physical parameters it depends on.
struct Curve {
    label: String,
    hash: String,
    n_atoms: Option<String>,
    blockade_radius: String,
    x: Vec<f64>,
    y: Vec<f64>,
}

fn load_curve(dir: &Path) -> Result<Curve> {
    let summary = read_summary(dir)?;
    let get = |k: &str| summary.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
    let command = get("command").with_context(|| format!("{}: summary has no command", dir.display()))?;
    let label = dir.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned());
    let (file, xcol, ycol, n_atoms, rb) = match command.as_str() {
        "spectra" | "spacing" | "transition" => ("dos.csv".to_owned(), "center", "density", get("n_atoms"), get("blockade_radius")),
        "locator" => {
            let files: Vec<_> = summary.iter().filter(|(k, _)| k.ends_with(".file")).collect();
            if files.len() != 1 {
                bail!("{}: locator run holds {} curves; compare needs exactly one", dir.display(), files.len());
            }
            let rb = files[0].0.trim_start_matches("rb").trim_end_matches(".file").to_owned();
            (files[0].1.clone(), "lambda", "dos", None, Some(rb))
        }
        "tabulate-analytic" if get("quantity").as_deref() == Some("semicircle") => {
            ("analytic.csv".to_owned(), "lambda", "density", get("n_atoms"), get("blockade_radius"))
        }
        other => bail!("{}: `{other}` runs hold no DOS curve", dir.display()),
    };
    let (hash, header, rows) = read_csv(&dir.join(&file))?;
    let col = |name: &str| header.iter().position(|h| h == name).with_context(|| format!("{file}: no column {name}"));
    let (xi, yi) = (col(xcol)?, col(ycol)?);
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for r in rows {
        x.push(r[xi].parse()?);
        y.push(r[yi].parse()?);
    }
    let blockade_radius = rb.with_context(|| format!("{}: no blockade radius recorded", dir.display()))?;
    Ok(Curve { label, hash, n_atoms, blockade_radius, x, y })
}

fn interpolate(x: &[f64], y: &[f64], t: f64) -> Option<f64> {
    if t < x[0] || t > x[x.len() - 1] {
        return None;
    }
    let k = x.partition_point(|&v| v <= t).clamp(1, x.len() - 1);
    let w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    Some(y[k - 1] + w * (y[k] - y[k - 1]))
}

fn compare(cfg: &RunConfig, hash: &str, summary: &mut Summary) -> Result<()> {
    let inputs = &cfg.compare.as_ref().expect("validated").inputs;
    let curves: Vec<Curve> = inputs.iter().map(|d| load_curve(d)).collect::<Result<_>>()?;
    let rb = |c: &Curve| c.blockade_radius.parse::<f64>().unwrap_or(f64::NAN);
    for c in &curves[1..] {
        if rb(c) != rb(&curves[0]) {
            bail!("compare: blockade radius {} of `{}` differs from {} of `{}`", c.blockade_radius, c.label, curves[0].blockade_radius, curves[0].label);
        }
        if let (Some(a), Some(b)) = (&c.n_atoms, &curves[0].n_atoms) {
            if a != b {
                bail!("compare: n_atoms {a} of `{}` differs from {b} of `{}`", c.label, curves[0].label);
            }
        }
    }
    let mut header: Vec<String> = vec!["lambda".into()];
    header.extend(curves.iter().map(|c| c.label.clone()));
    header.push("rel_diff".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::create(&cfg.out.join("overlay.csv"), hash, &header)?;
    let mut worst: f64 = 0.0;
    let base = &curves[0];
    for (i, &x) in base.x.iter().enumerate() {
        let others: Option<Vec<f64>> = curves[1..].iter().map(|c| interpolate(&c.x, &c.y, x)).collect();
        let Some(others) = others else { continue };
        let y0 = base.y[i];
        let rel = others.iter().map(|&y| (y - y0).abs() / y0.abs().max(1e-300)).fold(0.0, f64::max);
        if y0 > 0.0 {
            worst = worst.max(rel);
        }
        let mut row = vec![num(x), num(y0)];
        row.extend(others.iter().map(|&y| num(y)));
        row.push(num(rel));
        csv.row(&row)?;
    }
    csv.finish()?;
    for c in &curves {
        summary.set(&format!("input.{}", c.label), &c.hash);
    }
    summary.set("blockade_radius", &base.blockade_radius);
    summary.set("max_relative_difference", num(worst));
    Ok(())
}

fn merge(cfg: &RunConfig, hash: &str, summary: &mut Summary) -> Result<()> {
    let inputs = &cfg.merge.as_ref().expect("validated").inputs;
    let states: Vec<RunState> = inputs.iter().map(|d| read_state(d)).collect::<Result<_>>()?;
    let first = &states[0];
    for (s, dir) in states.iter().zip(inputs).skip(1) {
        if s.ensemble != first.ensemble {
            bail!("merge: ensemble of {} ({:?}) differs from {:?}", dir.display(), s.ensemble, first.ensemble);
        }
        if s.spectrum.binning != first.spectrum.binning {
            bail!("merge: DOS binning of {} differs", dir.display());
        }
        if s.command != first.command {
            bail!("merge: {} is a `{}` run, expected `{}`", dir.display(), s.command, first.command);
        }
    }
    let shards: Vec<Shard> = states.iter().flat_map(|s| s.shards.iter().copied()).collect();
    let mut duplicates = 0;
    for i in 0..shards.len() {
        for j in i + 1..shards.len() {
            if shards[i].overlaps(&shards[j]) {
                duplicates += 1;
                log::warn!("shards {:?} and {:?} share seed and realization indices; realizations are counted twice", shards[i], shards[j]);
            }
        }
    }
    summary.set("merged_runs", states.len());
    summary.set("duplicate_shard_pairs", duplicates);
    let mut spectrum = first.spectrum.clone();
    let mut failures = first.failures.clone();
    for s in &states[1..] {
        spectrum = spectrum.merge(&s.spectrum)?;
        failures.extend(s.failures.iter().cloned());
    }
    let command = match first.command.as_str() {
        "spectra" => Command::Spectra,
        "spacing" => Command::Spacing,
        "transition" => Command::Transition,
        other => bail!("merge: `{other}` runs cannot be merged"),
    };
    describe_ensemble(summary, &first.ensemble, &shards);
    write_failures(&cfg.out, hash, &failures)?;
    let all_spectra = states.iter().all(|s| s.has_spectra);
    let mut spectra = Vec::new();
    if command != Command::Spectra && all_spectra {
        for dir in inputs {
            spectra.extend(read_spectra(dir)?);
        }
        spectra.sort_by_key(|s| s.0);
    }
    let levels: Option<Vec<Vec<f64>>> = (command != Command::Spectra && all_spectra).then(|| spectra.iter().map(|s| s.1.clone()).collect());
    let spacing_in = if command != Command::Spectra && !all_spectra {
        let mut acc = first.spacing.clone().context("merge: spacing histograms missing")?;
        for s in &states[1..] {
            acc = acc.merge(s.spacing.as_ref().context("merge: spacing histograms missing")?)?;
        }
        summary.set("spacing_unfolding", "per shard (raw spectra unavailable)");
        Some(acc)
    } else {
        None
    };
    let (windows, spacing) = products(command, cfg, hash, &spectrum, levels.as_deref(), spacing_in, &failures, summary)?;
    if levels.is_some() {
        write_spectra(&cfg.out, &spectra)?;
    }
    write_state(
        &cfg.out,
        &RunState {
            version: cfg.version,
            command: command.name().into(),
            config_hash: hash.into(),
            ensemble: first.ensemble,
            shards,
            spectrum,
            windows,
            spacing,
            failures,
            has_spectra: levels.is_some(),
        },
    )
}
