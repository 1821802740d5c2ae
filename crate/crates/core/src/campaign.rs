//! Ensemble campaigns: many realizations, diagonalized in parallel and pooled
//! into mergeable accumulators.
//!
//! Realization `i` always draws from `rng::stream(seed, i)`. Realizations are
//! grouped into fixed-size chunks; chunks run in parallel, and their
//! accumulators are merged in index order, so the result does not depend on
//! the number of worker threads.

use crate::analytic::GeometryParams;
use crate::ensembles::{sample_coupling, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::spectra::{
    eigenvalues_seeded, unfold, DosBinning, Moments, SpacingAccumulator, SpectrumAccumulator,
    Unfolding, WindowSet, SPACING_BINS, SPACING_MAX,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub ensemble: EnsembleSpec,
    pub realizations: u64,
    pub seed: u64,
    /// Index of the first realization; shards of one campaign use disjoint
    /// index ranges under the same seed.
    pub first_index: u64,
    pub binning: DosBinning,
    /// Realizations per chunk. Part of the reduction order, so changing it
    /// can change floating-point moments in the last digits (never counts).
    pub chunk: usize,
    /// Keep every spectrum for a later spacing analysis.
    pub keep_spectra: bool,
}

impl CampaignConfig {
    pub fn new(ensemble: EnsembleSpec, realizations: u64, seed: u64) -> Self {
        Self {
            ensemble,
            realizations,
            seed,
            first_index: 0,
            binning: DosBinning::default(),
            chunk: 8,
            keep_spectra: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        self.binning.validate()?;
        if self.realizations == 0 {
            return Err(invalid("realizations", "must be positive"));
        }
        if self.chunk == 0 {
            return Err(invalid("chunk", "must be positive"));
        }
        Ok(())
    }
}

/// A realization that could not be sampled or diagonalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: u64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub spectrum: SpectrumAccumulator,
    /// `(index, sorted eigenvalues)` in index order, when requested.
    pub spectra: Vec<(u64, Vec<f64>)>,
    pub failures: Vec<Failure>,
}

impl CampaignOutput {
    pub fn levels(&self) -> Vec<Vec<f64>> {
        self.spectra.iter().map(|(_, e)| e.clone()).collect()
    }
}

/// Sorted spectrum of realization `index`.
pub fn realization(spec: &EnsembleSpec, seed: u64, index: u64) -> Result<Vec<f64>> {
    let mut r = rng::stream(seed, index);
    let m = spec.sample(&mut r)?;
    eigenvalues_seeded(&m, Some(rng::stream_seed(seed, index)))
}

struct Chunk {
    spectrum: SpectrumAccumulator,
    spectra: Vec<(u64, Vec<f64>)>,
    failures: Vec<Failure>,
}

pub fn run(cfg: &CampaignConfig) -> Result<CampaignOutput> {
    run_with_progress(cfg, |_| {})
}

/// As [`run`], calling `progress(done)` after each chunk (from worker
/// threads, in no particular order).
pub fn run_with_progress(cfg: &CampaignConfig, progress: impl Fn(u64) + Sync) -> Result<CampaignOutput> {
    cfg.validate()?;
    let empty = SpectrumAccumulator::new(cfg.binning.clone())?;
    let end = cfg.first_index + cfg.realizations;
    let starts: Vec<u64> = (cfg.first_index..end).step_by(cfg.chunk).collect();
    let done = AtomicU64::new(0);
    let chunks: Vec<Chunk> = starts
        .par_iter()
        .map(|&start| {
            let mut c = Chunk {
                spectrum: empty.clone(),
                spectra: Vec::new(),
                failures: Vec::new(),
            };
            for index in start..(start + cfg.chunk as u64).min(end) {
                match realization(&cfg.ensemble, cfg.seed, index) {
                    Ok(eigs) => {
                        c.spectrum.accumulate(&eigs);
                        if cfg.keep_spectra {
                            c.spectra.push((index, eigs));
                        }
                    }
                    Err(e) => {
                        log::warn!("realization {index} failed: {e}");
                        c.failures.push(Failure {
                            index,
                            seed: rng::stream_seed(cfg.seed, index),
                            message: e.to_string(),
                        });
                    }
                }
            }
            let size = (start + cfg.chunk as u64).min(end) - start;
            progress(done.fetch_add(size, Ordering::Relaxed) + size);
            c
        })
        .collect();
    let mut out = CampaignOutput {
        spectrum: empty,
        spectra: Vec::new(),
        failures: Vec::new(),
    };
    for c in chunks {
        out.spectrum = out.spectrum.merge(&c.spectrum)?;
        out.spectra.extend(c.spectra);
        out.failures.extend(c.failures);
    }
    if out.spectrum.realizations == 0 {
        let first = out.failures.first().map(|f| f.message.clone()).unwrap_or_default();
        return Err(Error::Domain(format!("every realization failed; first error: {first}")));
    }
    Ok(out)
}

/// Unfolds pooled spectra with the ensemble-wide integrated DOS of `acc` and
/// histograms the spacings per window on the standard grid.
pub fn spacing_statistics(spectra: &[Vec<f64>], acc: &SpectrumAccumulator, windows: &WindowSet) -> Result<SpacingAccumulator> {
    let unfolding = Unfolding::from_accumulator(acc)?;
    let u = unfold(spectra, &unfolding, windows)?;
    let mut out = SpacingAccumulator::new(windows.clone(), SPACING_MAX, SPACING_BINS);
    for (w, s) in u.spacings.iter().enumerate() {
        out.add(w, s);
    }
    Ok(out)
}

/// Moments of `samples` independent couplings of the decorrelated ensemble,
/// drawn in parallel blocks keyed by `seed`.
pub fn coupling_moments(p: &GeometryParams, samples: u64, seed: u64) -> Moments {
    const BLOCK: u64 = 1 << 16;
    let blocks = samples.div_ceil(BLOCK);
    let parts: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b);
            let mut m = Moments::default();
            for _ in b * BLOCK..((b + 1) * BLOCK).min(samples) {
                m.push(sample_coupling(p, &mut r));
            }
            m
        })
        .collect();
    parts.iter().fold(Moments::default(), |a, b| a.merge(b))
}
