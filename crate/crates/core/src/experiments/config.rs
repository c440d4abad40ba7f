//! TOML experiment configuration.

use crate::error::{Error, Result};
use crate::model::{SurfaceModel, TorusGenerator, TorusModel, WehlerModel};
use crate::walk::FiniteMeasure;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Lyapunov,
    Oseledets,
    Roof,
    Pilot,
    Birkhoff,
    Histogram,
    Dimension,
    Cohomology,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    /// Real and imaginary parts of a Gaussian-integer 2x2 matrix.
    pub re: Option<[[i64; 2]; 2]>,
    pub im: Option<[[i64; 2]; 2]>,
    /// Integer 4x4 matrix on lattice coordinates (alternative to re/im).
    pub matrix: Option<[[i64; 4]; 4]>,
    #[serde(default)]
    pub translation: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Torus { generators: Vec<GeneratorSpec> },
    Wehler {
        /// `"golden"`, or omitted when `a`/`b` or `terms` are given.
        preset: Option<String>,
        a: Option<f64>,
        b: Option<f64>,
        /// Affine terms `[i, j, k, coefficient]`.
        terms: Option<Vec<[f64; 4]>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    /// Automorphism names.
    pub atoms: Vec<String>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub n_steps: usize,
    pub burn_in: usize,
    pub walkers: usize,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams { n_steps: 10_000, burn_in: 1000, walkers: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramParams {
    pub grid: usize,
    /// Coordinate pair binned by the histogram.
    pub pair: [usize; 2],
    pub samples_per_walker: usize,
    /// Whether the uniformity check is an acceptance check.
    pub expect_uniform: bool,
}

impl Default for HistogramParams {
    fn default() -> Self {
        HistogramParams { grid: 128, pair: [0, 1], samples_per_walker: 2000, expect_uniform: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub atom: f64,
    pub curve: [f64; 2],
    pub volume: [f64; 2],
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { atom: 0.1, curve: [0.8, 1.2], volume: [3.7, 4.3] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionParams {
    pub samples: usize,
    pub base_points: usize,
    pub scales: Vec<f64>,
    pub thresholds: Thresholds,
}

impl Default for DimensionParams {
    fn default() -> Self {
        DimensionParams {
            samples: 100_000,
            base_points: 1000,
            scales: vec![0.2, 0.1, 0.05, 0.025],
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitParams {
    pub radius: usize,
    pub pad: usize,
    pub samples: usize,
    pub n_fwd: usize,
    pub n_bwd: usize,
    /// Overrides the default `eps0` if set.
    pub eps0: Option<f64>,
}

impl Default for OrbitParams {
    fn default() -> Self {
        OrbitParams { radius: 200, pad: 300, samples: 100, n_fwd: 200, n_bwd: 200, eps0: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub horizons: Vec<f64>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub eps: f64,
    pub s: f64,
    pub pilot_samples: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            horizons: vec![10.0, 100.0, 1000.0],
            box_lo: vec![0.0, 0.0],
            box_hi: vec![0.5, 0.5],
            eps: 0.1,
            s: 100.0,
            pilot_samples: 1_000_000,
        }
    }
}

/// Reference values checked by the report when present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectations {
    pub lambda_plus: Option<f64>,
    pub lambda_plus_tol: Option<f64>,
    /// `(p, q, d)` for a spectral radius `p + q sqrt(d)` of the product of all atoms.
    pub spectral_radius: Option<[i64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub stages: Vec<Stage>,
    pub model: ModelSpec,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub histogram: HistogramParams,
    #[serde(default)]
    pub dimension: DimensionParams,
    #[serde(default)]
    pub orbit: OrbitParams,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub expect: Expectations,
    pub output_dir: Option<String>,
}

/// A parsed config plus the hash of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<LoadedConfig> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(LoadedConfig { config, hash: sha256_hex(text.as_bytes()) })
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.measure.atoms.is_empty() {
            return bad("measure needs at least one atom");
        }
        if let Some(w) = &self.measure.weights {
            if w.len() != self.measure.atoms.len() {
                return bad("measure weights and atoms differ in length");
            }
        }
        if self.run.walkers == 0 {
            return bad("run.walkers must be positive");
        }
        if self.histogram.grid == 0 || self.histogram.pair[0] == self.histogram.pair[1] {
            return bad("histogram needs a positive grid and two distinct coordinates");
        }
        if self.flow.box_lo.len() != self.flow.box_hi.len() {
            return bad("flow box bounds differ in length");
        }
        if let ModelSpec::Torus { generators } = &self.model {
            if generators.is_empty() {
                return bad("torus model needs generators");
            }
            for g in generators {
                if g.matrix.is_none() && g.re.is_none() {
                    return bad("torus generator needs `matrix` or `re`");
                }
            }
        }
        Ok(())
    }
}

pub enum LabModel {
    Torus(TorusModel),
    Wehler(WehlerModel),
}

impl ModelSpec {
    pub fn build(&self) -> Result<LabModel> {
        match self {
            ModelSpec::Torus { generators } => {
                let gens = generators
                    .iter()
                    .map(|g| {
                        let mut t = match (g.matrix, g.re) {
                            (Some(m), _) => TorusGenerator::linear(&g.name, m),
                            (None, Some(re)) => TorusGenerator::from_gaussian(&g.name, re, g.im.unwrap_or([[0; 2]; 2])),
                            (None, None) => return Err(Error::Config(format!("generator {} has no matrix", g.name))),
                        };
                        t.translation = g.translation;
                        Ok(t)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(LabModel::Torus(TorusModel::new(gens).map_err(|e| Error::Config(e.to_string()))?))
            }
            ModelSpec::Wehler { preset, a, b, terms } => {
                let m = match (preset.as_deref(), terms) {
                    (Some("golden"), _) => WehlerModel::golden(),
                    (Some(other), _) => return Err(Error::Config(format!("unknown Wehler preset {other}"))),
                    (None, Some(t)) => {
                        let terms: Vec<(usize, usize, usize, f64)> =
                            t.iter().map(|r| (r[0] as usize, r[1] as usize, r[2] as usize, r[3])).collect();
                        WehlerModel::from_terms(&terms).map_err(|e| Error::Config(e.to_string()))?
                    }
                    (None, None) => WehlerModel::symmetric(
                        a.ok_or_else(|| Error::Config("Wehler model needs a preset, terms or a/b".into()))?,
                        b.unwrap_or(0.0),
                    ),
                };
                Ok(LabModel::Wehler(m))
            }
        }
    }
}

impl MeasureSpec {
    pub fn build<M: SurfaceModel>(&self, model: &M) -> Result<FiniteMeasure> {
        let ids = self
            .atoms
            .iter()
            .map(|name| {
                (0..model.automorphism_count())
                    .find(|&id| &model.automorphism_name(id) == name)
                    .ok_or_else(|| Error::Config(format!("unknown automorphism {name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let m = match &self.weights {
            Some(w) => FiniteMeasure::new(ids, w.clone()),
            None => FiniteMeasure::uniform(ids),
        };
        m.map_err(|e| Error::Config(e.to_string()))
    }
}
