#![allow(dead_code)]

use amc::config::PipelineConfig;

/// A model and dataset small enough to train in a few seconds.
pub const TINY: &[&str] = &[
    "seed=3",
    "synth.height=32",
    "synth.width=48",
    "synth.train.videos=2",
    "synth.train.frames_per_video=50",
    "synth.test.videos=2",
    "synth.test.frames_per_video=50",
    "synth.test.anomaly_rate=0.4",
    "synth.spawn_probability=0.2",
    "model.generator.height=32",
    "model.generator.width=48",
    "model.generator.inception_widths=[2, 2, 2, 2]",
    "model.generator.encoder_widths=[4, 8, 8]",
    "model.discriminator.widths=[4, 8, 8]",
    "model.discriminator.out_channels=8",
    "train.epochs=1",
    "train.batch_size=8",
    "scoring.patch=8",
];

pub fn tiny_overrides() -> Vec<String> {
    TINY.iter().map(|s| s.to_string()).collect()
}

pub fn tiny_config() -> PipelineConfig {
    PipelineConfig::load(None, &tiny_overrides()).unwrap()
}

/// `--set` arguments for the command line.
pub fn tiny_args() -> Vec<String> {
    TINY.iter().flat_map(|s| ["--set".to_string(), s.to_string()]).collect()
}
