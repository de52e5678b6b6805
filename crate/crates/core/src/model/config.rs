use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layout of the two-stream generator. Decoder widths mirror the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub height: usize,
    pub width: usize,
    /// Output channels of the 1x1, 3x3, 5x5 and 7x7 Inception branches.
    pub inception_widths: [usize; 4],
    /// One entry per stride-2 encoder block.
    pub encoder_widths: Vec<usize>,
    pub leaky_slope: f32,
    pub dropout: f32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            height: 128,
            width: 192,
            inception_widths: [16; 4],
            encoder_widths: vec![128, 256, 512],
            leaky_slope: 0.2,
            dropout: 0.3,
        }
    }
}

impl GeneratorConfig {
    pub fn inception_channels(&self) -> usize {
        self.inception_widths.iter().sum()
    }

    /// Spatial size at the end of the encoder.
    pub fn bottleneck(&self) -> (usize, usize) {
        let f = 1 << self.encoder_widths.len();
        (self.height / f, self.width / f)
    }

    pub fn validate(&self) -> Result<()> {
        let blocks = self.encoder_widths.len();
        if blocks == 0 {
            return Err(Error::Config("generator needs at least one encoder block".into()));
        }
        check_divisible("generator", self.height, self.width, blocks)?;
        if self.inception_widths.iter().chain(&self.encoder_widths).any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !self.leaky_slope.is_finite() || self.leaky_slope < 0.0 {
            return Err(Error::Config(format!("leaky slope {} must be finite and >= 0", self.leaky_slope)));
        }
        Ok(())
    }
}

/// Conditional patch discriminator over 6-channel (frame, flow) input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// One entry per stride-2 block.
    pub widths: Vec<usize>,
    /// Channels of the final stride-1 sigmoid block.
    pub out_channels: usize,
    pub leaky_slope: f32,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            widths: vec![64, 128, 256],
            out_channels: 512,
            leaky_slope: 0.2,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::Config("discriminator needs at least one strided block".into()));
        }
        check_divisible("discriminator", height, width, self.widths.len())?;
        if self.out_channels == 0 || self.widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !self.leaky_slope.is_finite() || self.leaky_slope < 0.0 {
            return Err(Error::Config(format!("leaky slope {} must be finite and >= 0", self.leaky_slope)));
        }
        Ok(())
    }

    pub fn output_size(&self, height: usize, width: usize) -> (usize, usize) {
        let f = 1 << self.widths.len();
        (height / f, width / f)
    }
}

fn check_divisible(what: &str, h: usize, w: usize, halvings: usize) -> Result<()> {
    let f = 1usize << halvings;
    if h == 0 || w == 0 || !h.is_multiple_of(f) || !w.is_multiple_of(f) {
        return Err(Error::Config(format!(
            "{what}: input {h}x{w} is not divisible by {f} ({halvings} stride-2 blocks)"
        )));
    }
    Ok(())
}
