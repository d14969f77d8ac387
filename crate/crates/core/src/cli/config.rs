use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::extension::ConstantsMode;
use crate::geometry::ProfileSpec;
use crate::models::{AnnulusTwistModel, TableSpec};
use crate::orbits::OrbitSettings;

/// Everything a run needs. Every field has a default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of the ChaCha stream behind random collar points and frames.
    pub seed: u64,
    /// Integration tolerance.
    pub tol: f64,
    /// Output directory; `--out` and `TWISTLAB_OUT` take precedence.
    pub out: Option<PathBuf>,
    pub degenerate: DegenerateConfig,
    pub annulus: AnnulusTwistModel,
    pub extension: ExtensionConfig,
    pub growth: GrowthConfig,
    pub smoothing: SmoothingConfig,
    pub index: IndexConfig,
    pub katok: KatokConfig,
    pub billiard: BilliardConfig,
    pub orbits: OrbitsConfig,
    pub chords: ChordsConfig,
    pub conservation: ConservationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_611,
            tol: 1e-10,
            out: None,
            degenerate: DegenerateConfig::default(),
            annulus: AnnulusTwistModel { kappa: 0.1, ..AnnulusTwistModel::default() },
            extension: ExtensionConfig::default(),
            growth: GrowthConfig::default(),
            smoothing: SmoothingConfig::default(),
            index: IndexConfig::default(),
            katok: KatokConfig::default(),
            billiard: BilliardConfig::default(),
            orbits: OrbitsConfig::default(),
            chords: ChordsConfig::default(),
            conservation: ConservationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegenerateConfig {
    pub profiles: Vec<ProfileSpec>,
    pub resolution: usize,
}

impl Default for DegenerateConfig {
    fn default() -> Self {
        Self {
            profiles: vec![ProfileSpec::Polynomial { exponent: 2 }, ProfileSpec::Polynomial { exponent: 3 }],
            resolution: 256,
        }
    }
}

/// The extended annulus Hamiltonian: `H_ε` of the annulus, continued linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionConfig {
    /// Smoothing parameter of the base Hamiltonian.
    pub eps: f64,
    pub mode: ConstantsMode,
    /// Explicit `C0`, `C1`; chosen from the boundary data when absent.
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub delta0: f64,
    pub delta1: f64,
    pub boundary_nq: usize,
    pub boundary_nt: usize,
    /// Rows of the tabulated `Ĥ`.
    pub table_points: usize,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self {
            eps: 1.0 / 11.0,
            mode: ConstantsMode::Quantitative,
            c0: None,
            c1: None,
            delta0: 0.01,
            delta1: 0.03,
            boundary_nq: 32,
            boundary_nt: 8,
            table_points: 241,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthConfig {
    pub samples: usize,
    pub short_samples: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Closed orbits of the linear region checked against `A = (C0 − C1)·T`.
    pub closed_orbits: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self { samples: 100, short_samples: 50, t_min: 1.0, t_max: 50.0, closed_orbits: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub eps: Vec<f64>,
    /// Quantitative twist is required for `ε` at or below this.
    pub quantitative_below: f64,
    /// The compact `s ∈ [s_min, s_max]` (with `r = 1 − s`) of the convergence check.
    pub s_min: f64,
    pub s_max: f64,
    pub resolution: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            eps: vec![1.0 / 5.0, 1.0 / 7.0, 1.0 / 11.0, 1.0 / 101.0],
            quantitative_below: 1.0 / 11.0,
            s_min: 1e-3,
            s_max: 0.5,
            resolution: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    /// Random collar points of the block check.
    pub points: usize,
    pub max_rotation: usize,
    /// Lengths of the linearised Reeb arcs on the round Katok sphere.
    pub arcs: Vec<f64>,
    pub steps_per_unit: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            points: 1000,
            max_rotation: 10,
            arcs: vec![0.5, 1.25, 2.5, 3.75, 5.25, 6.5, 8.25, 9.5],
            steps_per_unit: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KatokConfig {
    pub eps1: f64,
    /// Parameter of the fixed-point scan and the survey; irrational by default.
    pub scan_eps1: f64,
    pub scan_resolution: usize,
}

impl Default for KatokConfig {
    fn default() -> Self {
        Self { eps1: 0.1, scan_eps1: 0.1 * std::f64::consts::FRAC_1_SQRT_2, scan_resolution: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilliardConfig {
    pub tables: Vec<TableSpec>,
    pub grid: usize,
}

impl Default for BilliardConfig {
    fn default() -> Self {
        Self {
            tables: vec![
                TableSpec::Circle { radius: 1.0 },
                TableSpec::Ellipse { a: 1.5, b: 1.0 },
                TableSpec::Fourier { a0: 1.0, cos: vec![0.05, 0.02], sin: vec![0.0, -0.01] },
            ],
            grid: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitsConfig {
    pub primes: Vec<usize>,
    /// Seeds per unperturbed resonant circle of the annulus.
    pub seeds_per_circle: usize,
    pub katok_seed_resolution: usize,
    pub settings: OrbitSettings,
}

impl Default for OrbitsConfig {
    fn default() -> Self {
        Self { primes: vec![5, 7, 11], seeds_per_circle: 8, katok_seed_resolution: 6, settings: OrbitSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChordsConfig {
    pub order: usize,
    pub max_period: usize,
    pub seeds: usize,
}

impl Default for ChordsConfig {
    fn default() -> Self {
        Self { order: 3, max_period: 30, seeds: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConservationConfig {
    /// Random base points, each with one random pair of tangent vectors.
    pub frames: usize,
    /// Length of the energy-drift trajectories.
    pub t_end: f64,
}

impl Default for ConservationConfig {
    fn default() -> Self {
        Self { frames: 24, t_end: 20.0 }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config; parse errors carry `path:line:column`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}:{m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{}:{}: {}", e.line(), e.column(), e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let tolerances = [self.tol, self.orbits.settings.tol, self.orbits.settings.newton_tol, self.orbits.settings.fd_step];
        if tolerances.iter().any(|t| !(*t > 0.0)) {
            return bad("all tolerances must be positive");
        }
        if self.degenerate.profiles.is_empty() || self.degenerate.resolution < 2 {
            return bad("degenerate: need at least one profile and two grid points");
        }
        if !(self.extension.delta0 > 0.0 && self.extension.delta0 < self.extension.delta1) {
            return bad("extension: need 0 < delta0 < delta1");
        }
        if self.extension.c0.is_some() != self.extension.c1.is_some() {
            return bad("extension: give both c0 and c1 or neither");
        }
        if self.smoothing.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("smoothing: every eps must lie in (0, 1)");
        }
        if !(self.growth.t_min > 0.0 && self.growth.t_min <= self.growth.t_max) || self.growth.samples == 0 {
            return bad("growth: need 0 < t_min <= t_max and at least one sample");
        }
        if self.billiard.tables.is_empty() || self.billiard.grid == 0 {
            return bad("billiard: need a table and a positive grid size");
        }
        if self.orbits.primes.is_empty() {
            return bad("orbits: empty prime list");
        }
        if self.index.arcs.len() < 2 {
            return bad("index: need at least two arcs to fit a slope");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialisation, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ExperimentConfig::parse("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn roundtrip_keeps_the_hash() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::parse(&serde_json::to_string_pretty(&c).unwrap()).unwrap();
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.seed += 1;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn errors_carry_line_and_column() {
        let err = ExperimentConfig::parse("{\n  \"tol\": 1e-10,\n  \"katok\": {\"eps\": 0.1}\n}").unwrap_err();
        let Error::Config(m) = err else { panic!("wrong error kind") };
        assert!(m.starts_with("3:"), "{m}");
        assert!(m.contains("eps"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::parse(r#"{"tol": 0}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"smoothing": {"eps": [1.5]}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"extension": {"c0": 3.0}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"degenerate": {"profiles": [{"kind": "polynomial", "exponent": 3}]}}"#).is_ok());
    }
}
