//! JSON configuration schemas shared by the CLI and the solvers.

use crate::adversary::DiscreteSymmetricNoise;
use crate::error::{Error, Result};
use crate::honest_noise::HonestNoise;
use crate::simulator::SimConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_ENVELOPE_SAMPLES: usize = 4096;

/// An inclusive arithmetic grid `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        GridSpec { min, max, step }
    }

    /// Materializes the grid. The span must be an integer number of steps
    /// within 1e-9 steps of slack.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::Config(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        if self.max < self.min || self.max.is_nan() || self.min.is_nan() {
            return Err(Error::Config(format!(
                "grid max {} must not be below min {}",
                self.max, self.min
            )));
        }
        let count = ((self.max - self.min) / self.step).round();
        if (self.min + count * self.step - self.max).abs() > 1e-9 * self.step {
            return Err(Error::Config(format!(
                "grid [{}, {}] is not an integer number of steps of {}",
                self.min, self.max, self.step
            )));
        }
        let n = count as usize + 1;
        let mut vals: Vec<f64> = (0..n).map(|i| self.min + i as f64 * self.step).collect();
        if let Some(last) = vals.last_mut() {
            *last = self.max;
        }
        Ok(vals)
    }
}

/// Honest-noise description as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HonestNoiseConfig {
    Uniform,
    Tabulated {
        /// Path to a two-column `x, density` CSV, relative to the config file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<PathBuf>,
        /// Inline `(x, density)` knots, alternative to `csv`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        knots: Option<Vec<(f64, f64)>>,
    },
}

impl HonestNoiseConfig {
    pub fn resolve(&self, delta: f64, base_dir: Option<&Path>) -> Result<HonestNoise> {
        match self {
            HonestNoiseConfig::Uniform => HonestNoise::uniform(delta),
            HonestNoiseConfig::Tabulated { csv, knots } => match (csv, knots) {
                (Some(path), None) => {
                    let full = match base_dir {
                        Some(dir) if path.is_relative() => dir.join(path),
                        _ => path.clone(),
                    };
                    HonestNoise::from_csv(delta, &full)
                }
                (None, Some(knots)) => HonestNoise::tabulated(delta, knots),
                _ => Err(Error::Config(
                    "tabulated noise needs exactly one of 'csv' or 'knots'".into(),
                )),
            },
        }
    }
}

/// Everything needed to trace the worst-case frontier over an `(eta, alpha)`
/// grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveConfig {
    pub delta: f64,
    /// Prior half-width; `null` selects asymptotic mode (zero gap term).
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub honest_noise: HonestNoiseConfig,
    pub eta_grid: GridSpec,
    pub alpha_grid: GridSpec,
    #[serde(default = "default_envelope_samples")]
    pub n_envelope_samples: usize,
}

fn default_envelope_samples() -> usize {
    DEFAULT_ENVELOPE_SAMPLES
}

impl CurveConfig {
    pub fn resolve_noise(&self, base_dir: Option<&Path>) -> Result<HonestNoise> {
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::Config(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        self.honest_noise.resolve(self.delta, base_dir)
    }
}

/// Frontier grid plus both players' utilities: the solver input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    #[serde(flatten)]
    pub frontier: CurveConfig,
    pub u_ad: String,
    pub u_dc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
}

/// Knobs for the `verify` subcommand's oracle cross-checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifySection {
    #[serde(default = "default_beta_checks")]
    pub beta_checks: usize,
    #[serde(default = "default_beta_grid_n")]
    pub beta_grid_n: usize,
    #[serde(default = "default_support_grid_n")]
    pub support_grid_n: usize,
    #[serde(default = "default_mc_checks")]
    pub mc_checks: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    #[serde(default = "default_verify_seed")]
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            beta_checks: default_beta_checks(),
            beta_grid_n: default_beta_grid_n(),
            support_grid_n: default_support_grid_n(),
            mc_checks: default_mc_checks(),
            mc_samples: default_mc_samples(),
            seed: default_verify_seed(),
        }
    }
}

fn default_beta_checks() -> usize {
    12
}
fn default_beta_grid_n() -> usize {
    2001
}
fn default_support_grid_n() -> usize {
    101
}
fn default_mc_checks() -> usize {
    5
}
fn default_mc_samples() -> u64 {
    1_000_000
}
fn default_verify_seed() -> u64 {
    0x6f63_6f64
}

/// Single-threshold envelope dump input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub delta: f64,
    pub honest_noise: HonestNoiseConfig,
    pub eta: f64,
    #[serde(default = "default_envelope_samples")]
    pub n_samples: usize,
}

/// Input for synthesizing the frontier-attaining mixture at one `(eta, alpha)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesizeConfig {
    pub delta: f64,
    pub honest_noise: HonestNoiseConfig,
    pub eta: f64,
    pub alpha: f64,
    #[serde(default = "default_envelope_samples")]
    pub n_envelope_samples: usize,
}

/// Protocol simulation input as it appears on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimFileConfig {
    #[serde(rename = "M")]
    pub m: f64,
    pub delta: f64,
    pub eta: f64,
    pub honest_noise: HonestNoiseConfig,
    pub adversary: DiscreteSymmetricNoise,
    pub n_samples: u64,
    pub master_seed: u64,
}

impl SimFileConfig {
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<SimConfig> {
        SimConfig::new(
            self.m,
            self.delta,
            self.eta,
            self.honest_noise.resolve(self.delta, base_dir)?,
            self.adversary.clone(),
            self.n_samples,
            self.master_seed,
        )
    }
}

/// Loads a JSON config, applying `key=value` overrides (dotted paths) before
/// deserialization. Override values parse as JSON where possible and fall
/// back to strings.
pub fn load_config<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", path.display())))?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("{}: schema mismatch: {e}", path.display())))
}

/// Sets `alpha_grid.step=0.01`-style overrides on a JSON document.
pub fn apply_override(doc: &mut serde_json::Value, item: &str) -> Result<()> {
    let (path, raw) = item.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{item}' must have the form key=value"))
    })?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cursor.is_object() {
            return Err(Error::Config(format!(
                "override '{item}': '{}' is not an object",
                parts[..i].join(".")
            )));
        }
        let map = cursor.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("split produces at least one part")
}
