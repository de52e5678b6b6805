//! Pipeline configuration: one TOML document with a section per module.
//!
//! Every key is optional; missing keys take their defaults and unknown keys
//! are rejected. `--set section.key=value` overrides are applied to the
//! parsed document before it is deserialized, so they follow the same rules.

use std::fs;
use std::path::Path;

use amc_core::data::SynthSpec;
use amc_core::losses::{LossWeights, Reduction};
use amc_core::model::{DiscriminatorConfig, GeneratorConfig};
use amc_core::scoring::Normalization;
use amc_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{AmcError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Source of all randomness: synthetic data, initialization, dropout, shuffling.
    pub seed: u64,
    pub synth: SynthSpec,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub scoring: ScoringConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 2019,
            synth: SynthSpec::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            train: TrainConfig::default(),
            scoring: ScoringConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_g: f64,
    pub lambda_a: f64,
    pub lambda_f: f64,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        LossConfig {
            lambda_g: w.lambda_g,
            lambda_a: w.lambda_a,
            lambda_f: w.lambda_f,
            reduction: Reduction::Mean,
        }
    }
}

impl LossConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_g: self.lambda_g,
            lambda_a: self.lambda_a,
            lambda_f: self.lambda_f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub patch: usize,
    pub lambda_s: f64,
    pub normalization: Normalization,
    /// Frames per inference batch; does not change the scores.
    pub batch_size: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            patch: 16,
            lambda_s: 0.2,
            normalization: Normalization::Minmax,
            batch_size: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Minimum persistence of a score maximum, on normalized scores.
    pub persistence_threshold: f64,
    /// Maxima closer than this many frames are merged.
    pub merge_distance: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            persistence_threshold: 0.2,
            merge_distance: 50,
        }
    }
}

fn invalid(msg: impl Into<String>) -> AmcError {
    AmcError::Config(msg.into())
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `key=value` overrides, and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| AmcError::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| invalid(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_table(doc)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc = toml::from_str::<toml::Table>(text).map_err(|e| invalid(e.message().to_string()))?;
        Self::from_table(doc)
    }

    fn from_table(doc: toml::Table) -> Result<Self> {
        let cfg: PipelineConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed must fit in a signed 64-bit integer"));
        }
        let g = &self.model.generator;
        g.validate()?;
        self.model.discriminator.validate(g.height, g.width)?;
        self.loss.weights().validate()?;
        self.train.validate()?;
        let s = &self.scoring;
        if s.patch == 0 || s.patch > g.height || s.patch > g.width {
            return Err(invalid(format!("scoring.patch {} must be in 1..={}", s.patch, g.height.min(g.width))));
        }
        if !(s.lambda_s.is_finite() && s.lambda_s >= 0.0) {
            return Err(invalid("scoring.lambda_s must be finite and >= 0"));
        }
        if s.batch_size == 0 {
            return Err(invalid("scoring.batch_size must be >= 1"));
        }
        if !(self.eval.persistence_threshold.is_finite() && self.eval.persistence_threshold >= 0.0) {
            return Err(invalid("eval.persistence_threshold must be finite and >= 0"));
        }
        Ok(())
    }

    /// Synthetic-data spec carrying the pipeline seed.
    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            ..self.synth.clone()
        }
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal when it parses
/// as one and as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("override `{spec}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(invalid(format!("override key `{key}` is malformed")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("override `{key}`: `{p}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
