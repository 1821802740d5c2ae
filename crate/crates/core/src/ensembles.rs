//! The dipolar Hamiltonian of a cloud and its surrogate random-matrix
//! ensembles.

use crate::analytic::{self, GeometryParams};
use crate::cloud::{sample_cloud, AtomCloud, CloudConfig};
use crate::error::{invalid, Result};
use crate::A_COEF;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{self, Write};

/// Dense real symmetric matrix with zero diagonal, stored in full
/// (column-major, which is also row-major by symmetry).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds the matrix from its strict upper triangle; `entry(i, j)` is
    /// called once per pair in `(i, j)` lexicographic order with `i < j`.
    pub fn from_upper(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = entry(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.data[i * n + j])))
    }

    pub fn is_symmetric_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| {
            self.get(i, i) == 0.0 && (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ_{i≠j} H_ij²`
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Writes `i j value` lines (0-based, `i < j`).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, j, v) in self.upper() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

/// Dipolar coupling of two atoms separated by `(dx, dy, dz)`, quantization
/// axis along z.
pub fn dipolar_coupling(dx: f64, dy: f64, dz: f64) -> f64 {
    let r2 = dx * dx + dy * dy + dz * dz;
    A_COEF / 3.0 * (3.0 * dz * dz - r2) / (r2 * r2 * r2.sqrt())
}

pub fn build_rydberg(cloud: &AtomCloud) -> SymmetricMatrix {
    let p = &cloud.positions;
    SymmetricMatrix::from_upper(p.len(), |i, j| {
        dipolar_coupling(p[j][0] - p[i][0], p[j][1] - p[i][1], p[j][2] - p[i][2])
    })
}

/// One coupling drawn from the exact marginal: `A(u) r⁻³` with `u` uniform
/// on `[-1, 1]` and `r` from the pair-distance density.
pub fn sample_coupling<R: Rng + ?Sized>(p: &GeometryParams, rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(-1.0..=1.0);
    let r = analytic::pair_distance_quantile(rng.random::<f64>(), p);
    A_COEF / 3.0 * (3.0 * u * u - 1.0) / (r * r * r)
}

/// Matrix with i.i.d. couplings carrying the Rydberg marginal but none of
/// its geometric correlations.
pub fn sample_decorrelated<R: Rng + ?Sized>(n: usize, r_b: f64, rng: &mut R) -> Result<SymmetricMatrix> {
    if n < 2 {
        return Err(invalid("n_atoms", "must be at least 2"));
    }
    let p = GeometryParams::new(n, r_b)?;
    Ok(SymmetricMatrix::from_upper(n, |_, _| sample_coupling(&p, rng)))
}

/// GOE with off-diagonal variance `σ²/2` and zero diagonal.
pub fn sample_goe<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Result<SymmetricMatrix> {
    if !(sigma > 0.0) {
        return Err(invalid("goe_sigma", "must be positive"));
    }
    let s = sigma / 2f64.sqrt();
    Ok(SymmetricMatrix::from_upper(n, |_, _| {
        s * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// Symmetric matrix with i.i.d. Cauchy entries of scale `π/n`, zero diagonal.
pub fn sample_levy1<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SymmetricMatrix> {
    if n < 2 {
        return Err(invalid("n_atoms", "must be at least 2"));
    }
    let c = Cauchy::new(0.0, PI / n as f64).expect("positive scale");
    Ok(SymmetricMatrix::from_upper(n, |_, _| c.sample(rng)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Rydberg,
    Decorrelated,
    Goe,
    Levy1,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::Rydberg => "rydberg",
            EnsembleKind::Decorrelated => "decorrelated",
            EnsembleKind::Goe => "goe",
            EnsembleKind::Levy1 => "levy1",
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rydberg" => Ok(Self::Rydberg),
            "decorrelated" => Ok(Self::Decorrelated),
            "goe" => Ok(Self::Goe),
            "levy1" => Ok(Self::Levy1),
            _ => Err(invalid("kind", format!("unknown ensemble `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n_atoms: usize,
    #[serde(default)]
    pub blockade_radius: f64,
    /// GOE scale. When absent it is matched to the coupling variance, which
    /// needs `r_b > 0`.
    #[serde(default)]
    pub goe_sigma: Option<f64>,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n_atoms: usize, blockade_radius: f64) -> Self {
        Self {
            kind,
            n_atoms,
            blockade_radius,
            goe_sigma: None,
        }
    }

    pub fn goe(n_atoms: usize, sigma: f64) -> Self {
        Self {
            kind: EnsembleKind::Goe,
            n_atoms,
            blockade_radius: 0.0,
            goe_sigma: Some(sigma),
        }
    }

    pub fn sigma(&self) -> Result<f64> {
        match self.goe_sigma {
            Some(s) => Ok(s),
            None => analytic::goe_sigma(&GeometryParams::new(self.n_atoms, self.blockade_radius)?),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 2 {
            return Err(invalid("n_atoms", "must be at least 2"));
        }
        match self.kind {
            EnsembleKind::Rydberg => CloudConfig::new(self.n_atoms, self.blockade_radius, 0).validate(),
            EnsembleKind::Decorrelated => GeometryParams::new(self.n_atoms, self.blockade_radius).map(|_| ()),
            EnsembleKind::Goe => {
                let s = self.sigma()?;
                if s > 0.0 { Ok(()) } else { Err(invalid("goe_sigma", "must be positive")) }
            }
            EnsembleKind::Levy1 => Ok(()),
        }
    }

    /// One realization.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SymmetricMatrix> {
        match self.kind {
            EnsembleKind::Rydberg => {
                let cfg = CloudConfig::new(self.n_atoms, self.blockade_radius, 0);
                Ok(build_rydberg(&sample_cloud(&cfg, rng)?))
            }
            EnsembleKind::Decorrelated => sample_decorrelated(self.n_atoms, self.blockade_radius, rng),
            EnsembleKind::Goe => sample_goe(self.n_atoms, self.sigma()?, rng),
            EnsembleKind::Levy1 => sample_levy1(self.n_atoms, rng),
        }
    }
}
