mod common;

use amc_core::losses::{LossWeights, Reduction};
use amc_core::model::{DiscriminatorConfig, GeneratorConfig};
use amc_core::train::{seeded_rng, TrainConfig, TrainState};
use amc_core::{Error, Shape, Tensor};
use common::uniform_vec;

fn tiny_state(train: TrainConfig, weights: LossWeights) -> TrainState {
    tiny_state_with_dropout(train, weights, 0.3)
}

fn tiny_state_with_dropout(train: TrainConfig, weights: LossWeights, dropout: f32) -> TrainState {
    let gen = GeneratorConfig {
        height: 16,
        width: 24,
        inception_widths: [2; 4],
        encoder_widths: vec![6, 8],
        leaky_slope: 0.2,
        dropout,
    };
    let disc = DiscriminatorConfig {
        widths: vec![4, 6],
        out_channels: 8,
        leaky_slope: 0.2,
    };
    TrainState::new(gen, disc, &train, weights, Reduction::Mean, 5).unwrap()
}

fn batch(seed: u64) -> (Tensor, Tensor) {
    let s = Shape::new(2, 3, 16, 24);
    let mut rng = seeded_rng(seed, 0);
    let frames = Tensor::from_vec(s, uniform_vec(&mut rng, s.numel(), 0.0, 1.0)).unwrap();
    let flows = Tensor::from_vec(s, uniform_vec(&mut rng, s.numel(), -2.0, 2.0)).unwrap();
    (frames, flows)
}

fn gen_values(s: &mut TrainState) -> Vec<Vec<f32>> {
    s.generator.params_mut().iter().map(|p| p.value.clone()).collect()
}

fn disc_values(s: &mut TrainState) -> Vec<Vec<f32>> {
    s.discriminator.params_mut().iter().map(|p| p.value.clone()).collect()
}

#[test]
fn discriminator_update_leaves_generator_untouched() {
    let mut s = tiny_state(TrainConfig::default(), LossWeights::default());
    let (frames, flows) = batch(1);
    let (out, _) = s.generate(&frames).unwrap();
    let (g0, d0) = (gen_values(&mut s), disc_values(&mut s));
    s.generator.zero_grad();
    s.discriminator_update(&frames, &flows, &out.flow).unwrap();
    assert_eq!(gen_values(&mut s), g0);
    assert_ne!(disc_values(&mut s), d0);
    assert!(s.generator.params_mut().iter().all(|p| p.grad.iter().all(|&g| g == 0.0)));
}

#[test]
fn generator_update_leaves_discriminator_untouched() {
    let mut s = tiny_state(TrainConfig::default(), LossWeights::default());
    let (frames, flows) = batch(2);
    let (out, tape) = s.generate(&frames).unwrap();
    let (g0, d0) = (gen_values(&mut s), disc_values(&mut s));
    s.discriminator.zero_grad();
    s.generator_update(&frames, &flows, &out, &tape).unwrap();
    assert_ne!(gen_values(&mut s), g0);
    assert_eq!(disc_values(&mut s), d0);
    // the adversarial term must not leave gradient on the discriminator
    assert!(s.discriminator.params_mut().iter().all(|p| p.grad.iter().all(|&g| g == 0.0)));
}

#[test]
fn zero_learning_rates_keep_parameters_bit_identical() {
    let train = TrainConfig {
        lr_g: 0.0,
        lr_d: 0.0,
        ..TrainConfig::default()
    };
    let mut s = tiny_state(train, LossWeights::default());
    let (g0, d0) = (gen_values(&mut s), disc_values(&mut s));
    let (frames, flows) = batch(3);
    s.train_step(&frames, &flows).unwrap();
    assert_eq!(gen_values(&mut s), g0);
    assert_eq!(disc_values(&mut s), d0);
}

#[test]
fn every_parameter_receives_a_finite_gradient() {
    let mut s = tiny_state(TrainConfig::default(), LossWeights::default());
    let (frames, flows) = batch(4);
    let log = s.train_step(&frames, &flows).unwrap();
    assert!(log.loss_d.is_finite() && log.loss_g.is_finite());
    assert_eq!(s.steps, 1);
    for p in s.generator.params_mut().into_iter().chain(s.discriminator.params_mut()) {
        assert!(p.grad.iter().all(|g| g.is_finite()));
        assert!(p.grad.iter().any(|&g| g != 0.0));
    }
}

#[test]
fn non_finite_input_aborts_with_step_index() {
    let mut s = tiny_state(TrainConfig::default(), LossWeights::default());
    let (frames, flows) = batch(5);
    s.train_step(&frames, &flows).unwrap();
    let mut bad = frames.clone();
    bad.data_mut()[7] = f32::NAN;
    match s.train_step(&bad, &flows) {
        Err(Error::NonFinite { step, .. }) => assert_eq!(step, 1),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn same_seed_gives_identical_steps() {
    let run = || {
        let mut s = tiny_state(TrainConfig::default(), LossWeights::default());
        let logs: Vec<_> = (0..3)
            .map(|i| {
                let (f, l) = batch(10 + i);
                s.train_step(&f, &l).unwrap()
            })
            .collect();
        (logs, gen_values(&mut s))
    };
    assert_eq!(run(), run());
}

/// Smooth frames and flows that a small network can fit exactly.
fn smooth_batch() -> (Tensor, Tensor) {
    let s = Shape::new(2, 3, 16, 24);
    let mut frames = Vec::with_capacity(s.numel());
    let mut flows = Vec::with_capacity(s.numel());
    for n in 0..2 {
        for c in 0..3 {
            for y in 0..16 {
                for x in 0..24 {
                    let phase = (n * 3 + c) as f32;
                    frames.push(0.5 + 0.4 * ((x as f32 + phase) / 5.0).sin() * ((y as f32) / 7.0).cos());
                    flows.push(((y as f32 - 8.0) / 8.0) * (1.0 + phase / 4.0));
                }
            }
        }
    }
    (Tensor::from_vec(s, frames).unwrap(), Tensor::from_vec(s, flows).unwrap())
}

#[test]
fn regression_only_training_fits_one_batch() {
    let weights = LossWeights {
        lambda_g: 0.0,
        ..LossWeights::default()
    };
    let train = TrainConfig {
        lr_g: 2e-3,
        ..TrainConfig::default()
    };
    let mut s = tiny_state_with_dropout(train, weights, 0.0);
    let (frames, flows) = smooth_batch();
    let first = s.train_step(&frames, &flows).unwrap();
    let mut last = first;
    for _ in 0..300 {
        last = s.train_step(&frames, &flows).unwrap();
    }
    assert!(last.appearance < first.appearance * 0.1, "{first:?} -> {last:?}");
    assert!(last.flow < first.flow * 0.1, "{first:?} -> {last:?}");
}
