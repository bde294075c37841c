//! Experiment configuration: built-in presets, JSON files and flag
//! overrides (flags win over the file, the file wins over the preset).

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use codedmm::selector::SelectionConstraints;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Comparison table: p = 2, N ∈ {6..9}, φ = 2/3, K = L.
    Table1,
    /// No storage or reliability constraints, fast workers.
    Fig1,
    /// Worker storage capped at 15M entries, slow workers.
    Fig2,
    /// Worker storage capped at 10M entries and ρ ≥ 0.98, very slow workers.
    Fig3,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Table1 => "table1",
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Worker counts `N` to evaluate.
    pub workers: Vec<usize>,
    /// Partition count used by the comparison table.
    pub partitions: usize,
    pub k_dim: usize,
    pub l_dim: usize,
    /// `λ` is drawn uniformly from this list once per round.
    pub lambda_support: Vec<f64>,
    /// Worker survival probability `φ`.
    pub phi: f64,
    pub success_threshold: Option<f64>,
    pub storage_worker_limit: Option<f64>,
    pub storage_master_limit: Option<f64>,
    /// Selection rounds per `N` in a sweep.
    pub rounds: usize,
    /// Monte Carlo trials per simulated quantity.
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let figure = |lambda_support: Vec<f64>, phi: f64| Self {
            preset,
            workers: (6..=20).collect(),
            partitions: 2,
            k_dim: 2000,
            l_dim: 5000,
            lambda_support,
            phi,
            success_threshold: None,
            storage_worker_limit: None,
            storage_master_limit: None,
            rounds: 200,
            trials: 100_000,
            seed: DEFAULT_SEED,
            out: None,
        };
        match preset {
            Preset::Table1 => Self {
                preset,
                workers: (6..=9).collect(),
                partitions: 2,
                k_dim: 1000,
                l_dim: 1000,
                lambda_support: vec![1.0],
                phi: 2.0 / 3.0,
                success_threshold: None,
                storage_worker_limit: None,
                storage_master_limit: None,
                rounds: 1,
                trials: 100_000,
                seed: DEFAULT_SEED,
                out: None,
            },
            Preset::Fig1 => figure((2..=10).map(f64::from).collect(), 0.95),
            Preset::Fig2 => Self {
                storage_worker_limit: Some(15e6),
                ..figure((2..=10).map(|d| 1.0 / f64::from(d)).collect(), 0.95)
            },
            Preset::Fig3 => Self {
                success_threshold: Some(0.98),
                storage_worker_limit: Some(10e6),
                ..figure((5..=20).map(|h| 1.0 / (100.0 * f64::from(h))).collect(), 0.9)
            },
        }
    }

    /// Preset defaults overlaid with the fields present in a JSON file. The
    /// file's own `preset` field is used unless `preset` is given.
    pub fn from_json(text: &str, preset: Option<Preset>, fallback: Preset) -> Result<Self> {
        let overlay: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let serde_json::Value::Object(fields) = overlay else {
            bail!("config must be a JSON object");
        };
        let named = match fields.get("preset") {
            Some(v) => Some(Preset::deserialize(v).context("unknown preset in config")?),
            None => None,
        };
        let base = Self::preset(preset.or(named).unwrap_or(fallback));
        let mut merged = serde_json::to_value(&base)?;
        let target = merged.as_object_mut().expect("config serializes to an object");
        for (key, value) in fields {
            target.insert(key, value);
        }
        let mut config: Self = serde_json::from_value(merged).context("invalid config")?;
        if let Some(p) = preset {
            config.preset = p;
        }
        Ok(config)
    }

    pub fn load(path: &Path, preset: Option<Preset>, fallback: Preset) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text, preset, fallback).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers.is_empty() {
            bail!("worker range is empty");
        }
        if let Some(&n) = self.workers.iter().find(|&&n| n < 2) {
            bail!("worker count must be at least 2, got {n}");
        }
        if self.lambda_support.is_empty() {
            bail!("λ support is empty");
        }
        if let Some(l) = self.lambda_support.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            bail!("λ values must be positive, got {l}");
        }
        if !(0.0..=1.0).contains(&self.phi) {
            bail!("φ must lie in [0, 1], got {}", self.phi);
        }
        if self.trials == 0 || self.rounds == 0 {
            bail!("trials and rounds must be at least 1");
        }
        if self.partitions < 2 {
            bail!("partition count must be at least 2");
        }
        for n in &self.workers {
            self.constraints(*n).validate()?;
        }
        Ok(())
    }

    pub fn constraints(&self, workers: usize) -> SelectionConstraints {
        SelectionConstraints {
            workers,
            k_dim: self.k_dim,
            l_dim: self.l_dim,
            survival_probability: self.phi,
            storage_master_limit: self.storage_master_limit,
            storage_worker_limit: self.storage_worker_limit,
            success_threshold: self.success_threshold.unwrap_or(0.0),
        }
    }
}
