//! Artifact files: CSV tables, the key-value run summary, the failure
//! manifest, and the JSON state that `merge` reads back.

use anyhow::{bail, Context, Result};
use rydspec::campaign::Failure;
use rydspec::spectra::{SpacingAccumulator, SpectrumAccumulator, WindowSet};
use rydspec::EnsembleSpec;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const STATE_FILE: &str = "state.json";
pub const SPECTRA_FILE: &str = "spectra.bin";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const FAILURES_FILE: &str = "failures.csv";

/// Floats with a decimal point; scientific notation only for very small or
/// very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else if x.is_finite() && x == x.trunc() && a < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

/// CSV with a `# config_hash=…` comment line and a header line.
pub struct Csv {
    w: BufWriter<File>,
    columns: usize,
    path: PathBuf,
}

impl Csv {
    pub fn create(path: &Path, hash: &str, header: &[&str]) -> Result<Self> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "# rydspec {} config_hash={hash}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "{}", header.join(","))?;
        Ok(Self {
            w,
            columns: header.len(),
            path: path.to_path_buf(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        if fields.len() != self.columns {
            bail!("{}: row has {} fields, header has {}", self.path.display(), fields.len(), self.columns);
        }
        writeln!(self.w, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Reads a CSV written by [`Csv`]: returns the config hash, the header and
/// the rows.
pub fn read_csv(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let hash = first
        .split("config_hash=")
        .nth(1)
        .map(str::to_owned)
        .with_context(|| format!("{}: missing config hash line", path.display()))?;
    let header = lines.next().unwrap_or_default().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    Ok((hash, header, rows))
}

/// Ordered `key = value` lines.
#[derive(Debug, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_owned(), value.to_string()));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(SUMMARY_FILE);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        for (k, v) in &self.entries {
            writeln!(w, "{k} = {v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn read_summary(dir: &Path) -> Result<Vec<(String, String)>> {
    let path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_owned(), v.to_owned())))
        .collect())
}

pub fn write_failures(dir: &Path, hash: &str, failures: &[Failure]) -> Result<()> {
    let mut csv = Csv::create(&dir.join(FAILURES_FILE), hash, &["index", "seed", "error"])?;
    for f in failures {
        csv.row(&[f.index.to_string(), f.seed.to_string(), format!("\"{}\"", f.message.replace('"', "'"))])?;
    }
    csv.finish()
}

/// A block of realization indices run under one global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub seed: u64,
    pub first_index: u64,
    pub realizations: u64,
}

impl Shard {
    pub fn overlaps(&self, o: &Shard) -> bool {
        self.seed == o.seed
            && self.first_index < o.first_index + o.realizations
            && o.first_index < self.first_index + self.realizations
    }
}

/// Everything `merge` needs to combine runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    pub command: String,
    pub config_hash: String,
    pub ensemble: EnsembleSpec,
    pub shards: Vec<Shard>,
    pub spectrum: SpectrumAccumulator,
    pub windows: Option<WindowSet>,
    pub spacing: Option<SpacingAccumulator>,
    pub failures: Vec<Failure>,
    /// Whether the raw spectra were saved next to the state.
    pub has_spectra: bool,
}

pub fn write_state(dir: &Path, state: &RunState) -> Result<()> {
    let path = dir.join(STATE_FILE);
    let w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer(w, state)?;
    Ok(())
}

pub fn read_state(dir: &Path) -> Result<RunState> {
    let path = dir.join(STATE_FILE);
    let r = BufReader::new(File::open(&path).with_context(|| format!("opening {}", path.display()))?);
    serde_json::from_reader(r).with_context(|| format!("parsing {}", path.display()))
}

/// Spectra as little-endian records: index (u64), length (u64), levels (f64).
pub fn write_spectra(dir: &Path, spectra: &[(u64, Vec<f64>)]) -> Result<()> {
    let path = dir.join(SPECTRA_FILE);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    for (index, levels) in spectra {
        w.write_all(&index.to_le_bytes())?;
        w.write_all(&(levels.len() as u64).to_le_bytes())?;
        for x in levels {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectra(dir: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let path = dir.join(SPECTRA_FILE);
    let mut bytes = Vec::new();
    File::open(&path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    let mut out = Vec::new();
    let mut words = bytes.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).unwrap());
    while let Some(index) = words.next() {
        let len = words.next().map(u64::from_le_bytes).context("truncated spectra file")?;
        let levels: Vec<f64> = words.by_ref().take(len as usize).map(f64::from_le_bytes).collect();
        if levels.len() as u64 != len {
            bail!("{}: truncated spectrum", path.display());
        }
        out.push((u64::from_le_bytes(index), levels));
    }
    Ok(out)
}
