//! Experiment configuration files.
//!
//! A configuration is a JSON object with a `model` (inline, or a path relative
//! to the configuration file) and optional per-command sections. Every field
//! of a section has a default. See `docs/config.md` for the full schema.

use std::fs;
use std::path::{Path, PathBuf};

use arcutoff_core::{Model, ModelParams, Network, NoiseKind, NoiseSpec, ScanPolicy, SphereState};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A matrix given either as a list of rows or as one row-major list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matrix {
    Rows(Vec<Vec<f64>>),
    RowMajor(Vec<f64>),
}

/// One value for every coordinate, or one per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerCoordinate {
    All(f64),
    Each(Vec<f64>),
}

impl PerCoordinate {
    fn expand(&self, d: usize, name: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerCoordinate::All(v) => Ok(vec![*v; d]),
            PerCoordinate::Each(v) if v.len() == d => Ok(v.clone()),
            PerCoordinate::Each(v) => Err(CliError::Config(format!("`{name}` has {} entries, expected d = {d}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    #[serde(default)]
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    #[serde(default)]
    pub params: NoiseParams,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { kind: NoiseKind::Gaussian, params: NoiseParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    #[default]
    RandomScan,
    DeterministicCycle,
    ExplicitSequence,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub mode: ScanMode,
    /// 1-based coordinate indices, repeated cyclically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<usize>>,
}

impl ScanConfig {
    pub fn random() -> Self {
        ScanConfig { mode: ScanMode::RandomScan, sequence: None }
    }

    pub fn to_policy(&self, d: usize) -> Result<ScanPolicy, CliError> {
        let policy = match (self.mode, &self.sequence) {
            (ScanMode::RandomScan, None) => ScanPolicy::RandomScan,
            (ScanMode::DeterministicCycle, None) => ScanPolicy::DeterministicCycle,
            (ScanMode::ExplicitSequence, Some(seq)) => {
                if let Some(bad) = seq.iter().find(|&&i| i == 0 || i > d) {
                    return Err(CliError::Config(format!("scan index {bad} is outside 1..={d}")));
                }
                ScanPolicy::ExplicitSequence(seq.iter().map(|i| i - 1).collect())
            }
            (ScanMode::ExplicitSequence, None) => {
                return Err(CliError::Config("explicit-sequence scan needs `sequence`".into()))
            }
            (_, Some(_)) => return Err(CliError::Config("`sequence` is only allowed with explicit-sequence".into())),
        };
        policy.validate(d).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub p: Matrix,
    pub e: PerCoordinate,
    pub sigma: PerCoordinate,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

impl ModelConfig {
    pub fn build(&self) -> Result<(Model, ScanPolicy), CliError> {
        let d = self.d;
        if d < 2 {
            return Err(CliError::Config(format!("d = {d} must be at least 2")));
        }
        let bad = |e: arcutoff_core::Error| CliError::Config(e.to_string());
        let net = match &self.p {
            Matrix::Rows(rows) => {
                if rows.len() != d {
                    return Err(CliError::Config(format!("`p` has {} rows, expected d = {d}", rows.len())));
                }
                Network::new(rows.clone()).map_err(bad)?
            }
            Matrix::RowMajor(flat) => Network::from_row_major(d, flat.clone()).map_err(bad)?,
        };
        let noise = NoiseSpec::shifted(self.noise.kind, self.noise.params.shift).map_err(bad)?;
        let params = ModelParams::new(self.e.expand(d, "e")?, self.sigma.expand(d, "sigma")?, noise).map_err(bad)?;
        let model = Model::new(net, params).map_err(bad)?;
        Ok((model, self.scan.to_policy(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(ModelConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaSection {
    pub burn_in: usize,
    pub n_steps: usize,
}

impl Default for AlphaSection {
    fn default() -> Self {
        AlphaSection { burn_in: 1_000, n_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Start state; all ones when absent.
    pub x0: Option<Vec<f64>>,
    pub k: usize,
    pub replicas: usize,
    pub stationary_samples: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { x0: None, k: 100, replicas: 1_000, stationary_samples: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSection {
    /// Start sizes `n`; the chain starts at `n * x0_direction`.
    pub n: Vec<f64>,
    /// Positive direction, normalized on load; uniform when absent.
    pub x0_direction: Option<Vec<f64>>,
    pub k_min: usize,
    pub k_max: usize,
    /// Replicas per bracket point (bracket mode only).
    pub replicas: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection { n: vec![1000.0], x0_direction: None, k_min: 0, k_max: 60, replicas: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub n: f64,
    pub x0_direction: Option<Vec<f64>>,
    pub k: Vec<usize>,
    pub replicas: usize,
    /// Ball radii for the lower bound; calibrated from a pilot sample when absent.
    pub radii: Option<Vec<f64>>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection { n: 1000.0, x0_direction: None, k: (2..=20).collect(), replicas: 10_000, radii: None }
    }
}

/// A fixed `alpha`, or `"estimate"` to run the estimator with the `alpha` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaChoice {
    Value(f64),
    Keyword(AlphaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaKeyword {
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub n: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: AlphaChoice,
    pub x0_direction: Option<Vec<f64>>,
    pub replicas: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            n: vec![1000.0],
            beta: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            alpha: AlphaChoice::Keyword(AlphaKeyword::Estimate),
            x0_direction: None,
            replicas: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub max_sequence_len: usize,
    pub contraction_trials: usize,
    pub alpha_steps: usize,
    pub stationarity_samples: usize,
    pub coupon_replicas: usize,
    pub bracket_replicas: usize,
    pub bracket_k: Vec<usize>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            max_sequence_len: 8,
            contraction_trials: 2_000,
            alpha_steps: 200_000,
            stationarity_samples: 20_000,
            coupon_replicas: 20_000,
            bracket_replicas: 2_000,
            bracket_k: vec![2, 5, 10, 20, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub alpha: AlphaSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub verify: VerifySection,
}

/// Configuration after loading: the model is inline and validated.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub model_config: ModelConfig,
    pub model: Model,
    pub scan: ScanPolicy,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let mut config: ExperimentConfig = read_json(path)?;
    let model_config = match &config.model {
        ModelSource::Inline(m) => m.clone(),
        ModelSource::Path(p) => {
            let full = path.parent().map_or_else(|| p.clone(), |dir| dir.join(p));
            read_json(&full)?
        }
    };
    let (model, scan) = model_config.build()?;
    config.model = ModelSource::Inline(model_config.clone());
    Ok(Loaded { config, model_config, model, scan })
}

/// Normalized start direction; uniform when absent.
pub fn direction(d: usize, given: &Option<Vec<f64>>) -> Result<SphereState, CliError> {
    match given {
        None => Ok(SphereState::uniform(d)),
        Some(v) if v.len() != d => Err(CliError::Config(format!("x0_direction has {} entries, expected d = {d}", v.len()))),
        Some(v) => SphereState::project(v).map_err(|e| CliError::Config(format!("x0_direction: {e}"))),
    }
}

/// `ln n` for each start size, which must exceed 1.
pub fn log_sizes(n: &[f64]) -> Result<Vec<f64>, CliError> {
    if n.is_empty() {
        return Err(CliError::Config("the list of n values is empty".into()));
    }
    n.iter()
        .map(|&v| if v > 1.0 && v.is_finite() { Ok(v.ln()) } else { Err(CliError::Config(format!("n = {v} must exceed 1"))) })
        .collect()
}
