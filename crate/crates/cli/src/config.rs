//! Run configuration: one TOML document per run, stamped with a schema
//! version. Command-line flags override the matching top-level keys.

use anyhow::{bail, Context, Result};
use rydspec::locator::{mixed_grid, SolverSettings};
use rydspec::spectra::{DosBinning, TransitionSettings, Window, WindowSet};
use rydspec::EnsembleSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectra,
    Spacing,
    Transition,
    Locator,
    TabulateAnalytic,
    Compare,
    Merge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectra => "spectra",
            Command::Spacing => "spacing",
            Command::Transition => "transition",
            Command::Locator => "locator",
            Command::TabulateAnalytic => "tabulate-analytic",
            Command::Compare => "compare",
            Command::Merge => "merge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub realizations: u64,
    /// First realization index, for shards of one campaign.
    #[serde(default)]
    pub first_index: u64,
    /// Worker threads; 0 uses every core. Not part of the config hash.
    #[serde(default)]
    pub workers: usize,
    /// Output directory. Not part of the config hash.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub binning: DosBinning,
    #[serde(default)]
    pub windows: WindowConfig,
    #[serde(default)]
    pub transition: TransitionSettings,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub locator: Option<LocatorConfig>,
    #[serde(default)]
    pub analytic: Option<AnalyticConfig>,
    #[serde(default)]
    pub compare: Option<InputsConfig>,
    #[serde(default)]
    pub merge: Option<InputsConfig>,
}

fn one() -> u64 {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("rydspec-out")
}

fn default_chunk() -> usize {
    8
}

/// Spacing windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindowConfig {
    /// Log-spaced windows per sign; `max` defaults to the 99.95% level of
    /// the pooled DOS.
    Log {
        min: f64,
        #[serde(default)]
        max: Option<f64>,
        per_sign: usize,
    },
    CenterWings { center: f64, wings: f64 },
    List { intervals: Vec<[f64; 2]> },
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig::Log {
            min: 0.05,
            max: None,
            per_sign: 14,
        }
    }
}

impl WindowConfig {
    /// Concrete windows; `extent` supplies the automatic upper edge.
    pub fn build(&self, extent: impl FnOnce() -> f64) -> rydspec::Result<WindowSet> {
        match self {
            WindowConfig::Log { min, max, per_sign } => {
                WindowSet::log_grid(*min, max.unwrap_or_else(extent), *per_sign)
            }
            WindowConfig::CenterWings { center, wings } => WindowSet::center_and_wings(*center, *wings),
            WindowConfig::List { intervals } => WindowSet::new(
                intervals
                    .iter()
                    .enumerate()
                    .map(|(i, w)| Window::interval(format!("w{i:02}"), w[0], w[1]))
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailConfig {
    pub lo: f64,
    pub hi: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            lo: 10f64.powf(1.5),
            hi: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocatorMethod {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocatorConfig {
    pub method: LocatorMethod,
    #[serde(default = "one_u8")]
    pub order: u8,
    pub blockade_radii: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn one_u8() -> u8 {
    1
}

/// Dense linear core plus log-spaced tails, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub core: [f64; 2],
    pub step: f64,
    pub extent: [f64; 2],
    pub per_decade: usize,
    pub points: Option<Vec<f64>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            core: [-6.0, 6.0],
            step: 0.05,
            extent: [-200.0, 200.0],
            per_decade: 10,
            points: None,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Vec<f64> {
        match &self.points {
            Some(p) => p.clone(),
            None => mixed_grid(
                (self.core[0], self.core[1]),
                self.step,
                (self.extent[0], self.extent[1]),
                self.per_decade,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    CouplingPdf,
    PairDistancePdf,
    Semicircle,
    SpacingLaws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    pub quantity: Quantity,
    /// Abscissa range; defaults depend on the quantity.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    1001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsConfig {
    pub inputs: Vec<PathBuf>,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub realizations: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, command: Command, o: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(r) = o.realizations {
            cfg.realizations = r;
        }
        if let Some(w) = o.workers {
            cfg.workers = w;
        }
        if let Some(out) = &o.out {
            cfg.out = out.clone();
        }
        // relative input paths are taken relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for inputs in [&mut cfg.compare, &mut cfg.merge].into_iter().flatten() {
            for p in &mut inputs.inputs {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate(command)?;
        Ok(cfg)
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            bail!("version: unsupported schema version {} (expected {SCHEMA_VERSION})", self.version);
        }
        if let Some(c) = self.command {
            if c != command {
                bail!("command: config declares `{}` but `{}` was requested", c.name(), command.name());
            }
        }
        if self.realizations == 0 {
            bail!("realizations: must be at least 1");
        }
        if self.chunk == 0 {
            bail!("chunk: must be at least 1");
        }
        self.binning.validate().context("binning")?;
        match command {
            Command::Spectra | Command::Spacing | Command::Transition => {
                let e = self.ensemble.as_ref().context("ensemble: required for this command")?;
                e.validate().context("ensemble")?;
            }
            Command::Locator => {
                let l = self.locator.as_ref().context("locator: required for this command")?;
                l.solver.validate().context("locator.solver")?;
                if l.blockade_radii.is_empty() {
                    bail!("locator.blockade_radii: needs at least one value");
                }
                if l.method == LocatorMethod::Low && l.order != 1 && l.order != 2 {
                    bail!("locator.order: must be 1 or 2");
                }
                if l.method == LocatorMethod::High && l.blockade_radii.iter().any(|&r| r.is_nan() || r <= 0.0) {
                    bail!("locator.blockade_radii: the high-concentration method needs r_b > 0");
                }
                if l.grid.build().is_empty() {
                    bail!("locator.grid: empty grid");
                }
            }
            Command::TabulateAnalytic => {
                let a = self.analytic.as_ref().context("analytic: required for this command")?;
                if a.points < 2 {
                    bail!("analytic.points: must be at least 2");
                }
                if !matches!(a.quantity, Quantity::SpacingLaws) {
                    let e = self.ensemble.as_ref().context("ensemble: n_atoms and blockade_radius are required")?;
                    rydspec::GeometryParams::new(e.n_atoms, e.blockade_radius).context("ensemble")?;
                }
            }
            Command::Compare => {
                let c = self.compare.as_ref().context("compare: required for this command")?;
                if c.inputs.len() < 2 {
                    bail!("compare.inputs: needs at least two run directories");
                }
            }
            Command::Merge => {
                let m = self.merge.as_ref().context("merge: required for this command")?;
                if m.inputs.is_empty() {
                    bail!("merge.inputs: needs at least one run directory");
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the configuration with the fields that cannot change the
    /// statistics (workers, output directory) blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        c.out = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
