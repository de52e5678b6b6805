//! Alternating conditional-GAN updates.

use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{self, GeneratorLoss, GeneratorLossInputs, LossWeights, Reduction};
use crate::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, GeneratorOutput, GeneratorTape};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

/// Optimization schedule. Learning rates default to 2e-4 (generator) and
/// 2e-5 (discriminator); epochs/batch default to the Ped2 setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub shuffle: bool,
    /// Save a checkpoint every this many epochs (0 = only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 16,
            lr_g: 2e-4,
            lr_d: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            shuffle: true,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr_g >= 0.0 && self.lr_d >= 0.0 && self.lr_g.is_finite() && self.lr_d.is_finite()) {
            return Err(Error::Config("learning rates must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::Config("adam moments must lie in [0, 1) and eps must be > 0".into()));
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Loss components of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepLog {
    pub loss_d: f64,
    pub loss_g: f64,
    pub adversarial: f64,
    pub appearance: f64,
    pub flow: f64,
}

/// Networks, optimizers and the dropout random stream.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub gen_opt: Adam,
    pub disc_opt: Adam,
    pub rng: ChaCha8Rng,
    pub steps: u64,
    pub weights: LossWeights,
    pub reduction: Reduction,
}

/// Random stream ids derived from the single seed.
pub const INIT_STREAM: u64 = 0;
pub const DROPOUT_STREAM: u64 = 1;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl TrainState {
    pub fn new(
        gen_config: GeneratorConfig,
        disc_config: DiscriminatorConfig,
        train: &TrainConfig,
        weights: LossWeights,
        reduction: Reduction,
        seed: u64,
    ) -> Result<Self> {
        train.validate()?;
        weights.validate()?;
        let mut init = seeded_rng(seed, INIT_STREAM);
        let (h, w) = (gen_config.height, gen_config.width);
        let mut generator = Generator::new(gen_config, &mut init)?;
        let mut discriminator = Discriminator::new(disc_config, h, w, &mut init)?;
        let gen_opt = Adam::new(train.adam(train.lr_g), &generator.params_mut());
        let disc_opt = Adam::new(train.adam(train.lr_d), &discriminator.params_mut());
        Ok(TrainState {
            generator,
            discriminator,
            gen_opt,
            disc_opt,
            rng: seeded_rng(seed, DROPOUT_STREAM),
            steps: 0,
            weights,
            reduction,
        })
    }

    fn non_finite(&self, component: &'static str) -> Error {
        Error::NonFinite {
            component,
            step: self.steps,
        }
    }

    /// Train-mode generator forward with the state's dropout stream.
    pub fn generate(&mut self, frames: &Tensor) -> Result<(GeneratorOutput, GeneratorTape)> {
        self.generator.forward_train(frames, &mut self.rng)
    }

    /// One discriminator update. `fake_flow` is a constant here: nothing
    /// flows back into the generator.
    pub fn discriminator_update(&mut self, frames: &Tensor, flows: &Tensor, fake_flow: &Tensor) -> Result<f64> {
        self.discriminator.zero_grad();
        let (d_real, real_tape) = self.discriminator.forward_train(frames, flows)?;
        let (d_fake, fake_tape) = self.discriminator.forward_train(frames, fake_flow)?;
        let (loss, g_real, g_fake) = losses::discriminator_loss_grad(&d_real, &d_fake, self.reduction)
            .map_err(|e| match e {
                Error::NonFinite { .. } => self.non_finite("loss_d"),
                e => e,
            })?;
        if !loss.is_finite() {
            return Err(self.non_finite("loss_d"));
        }
        self.discriminator.backward(&real_tape, &g_real, true, false);
        self.discriminator.backward(&fake_tape, &g_fake, true, false);
        self.disc_opt.apply(&mut self.discriminator.params_mut())?;
        Ok(loss)
    }

    /// One generator update. The discriminator's parameters receive no
    /// gradient; only its input gradient w.r.t. the predicted flow is used.
    pub fn generator_update(
        &mut self,
        frames: &Tensor,
        flows: &Tensor,
        out: &GeneratorOutput,
        tape: &GeneratorTape,
    ) -> Result<GeneratorLoss> {
        self.generator.zero_grad();
        let (d_fake, d_tape) = self.discriminator.forward_train(frames, &out.flow)?;
        let inputs = GeneratorLossInputs {
            frame: frames,
            pred_frame: &out.frame,
            flow: flows,
            pred_flow: &out.flow,
            d_fake: &d_fake,
        };
        let (loss, grad) = losses::generator_loss_grad(&inputs, &self.weights, self.reduction)?;
        for (component, v) in [
            ("loss_adv", loss.adversarial),
            ("loss_appe", loss.appearance),
            ("loss_flow", loss.flow),
            ("loss_g", loss.total),
        ] {
            if !v.is_finite() {
                return Err(self.non_finite(component));
            }
        }
        let mut d_flow = grad.flow;
        if self.weights.lambda_g != 0.0 {
            let (_, d_flow_adv) = self
                .discriminator
                .backward(&d_tape, &grad.d_fake, false, true)
                .expect("input gradient requested");
            d_flow.add_assign(&d_flow_adv);
        }
        self.generator.backward(tape, &grad.frame, &d_flow);
        self.gen_opt.apply(&mut self.generator.params_mut())?;
        Ok(loss)
    }

    /// Discriminator step then generator step on one batch.
    pub fn train_step(&mut self, frames: &Tensor, flows: &Tensor) -> Result<StepLog> {
        let (out, tape) = self.generate(frames)?;
        if !out.frame.all_finite() || !out.flow.all_finite() {
            return Err(self.non_finite("generator_output"));
        }
        let loss_d = self.discriminator_update(frames, flows, &out.flow)?;
        let g = self.generator_update(frames, flows, &out, &tape)?;
        self.steps += 1;
        Ok(StepLog {
            loss_d,
            loss_g: g.total,
            adversarial: g.adversarial,
            appearance: g.appearance,
            flow: g.flow,
        })
    }
}
