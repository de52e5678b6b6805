use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::blocks::{ConvBlock, ConvBlockTape, DeconvBlock, DeconvBlockTape};
use super::config::GeneratorConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, Conv2d, ConvTranspose2d, NamedTensors, NamedTensorsMut, Param};
use crate::tensor::{Shape, Tensor};

/// Reconstructed frame (in `[0, 1]`) and predicted flow `(dx, dy, mag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOutput {
    pub frame: Tensor,
    pub flow: Tensor,
}

/// Shared-encoder, two-decoder network.
///
/// ```text
/// frame -> inception -> enc[0] -> .. -> enc[L-1] -+-> appearance decoder -> frame'
///                 |         |                     |
///                 +---------+----- skips ---------+-> motion decoder    -> flow'
/// ```
///
/// Only the motion decoder sees encoder feature maps through skip
/// connections. The first encoder block has no batch-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    config: GeneratorConfig,
    /// Branch `i` stacks `i` 3x3 convolutions (a 1x1 for branch 0), giving
    /// receptive fields 1, 3, 5 and 7.
    inception: [Vec<ConvBlock>; 4],
    encoder: Vec<ConvBlock>,
    appearance: Vec<DeconvBlock>,
    appearance_head: ConvBlock,
    motion: Vec<DeconvBlock>,
    motion_head: ConvBlock,
}

#[derive(Debug, Clone)]
pub struct GeneratorTape {
    inception: [Vec<ConvBlockTape>; 4],
    encoder: Vec<ConvBlockTape>,
    appearance: Vec<DeconvBlockTape>,
    appearance_head: ConvBlockTape,
    motion: Vec<DeconvBlockTape>,
    motion_head: ConvBlockTape,
}

impl GeneratorTape {
    /// Spatial sizes of the encoder feature maps, shallowest first.
    pub fn encoder_sizes(&self) -> Vec<(usize, usize)> {
        self.encoder.iter().map(|t| (t.output().shape().h, t.output().shape().w)).collect()
    }
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let leaky = Activation::LeakyRelu(config.leaky_slope);
        let inception = core::array::from_fn(|branch| {
            let width = config.inception_widths[branch];
            if branch == 0 {
                return alloc::vec![ConvBlock::new(Conv2d::new(3, width, 1, 1, 0, rng), false, leaky)];
            }
            (0..branch)
                .map(|i| {
                    let c_in = if i == 0 { 3 } else { width };
                    ConvBlock::new(Conv2d::new(c_in, width, 3, 1, 1, rng), false, leaky)
                })
                .collect()
        });

        let c0 = config.inception_channels();
        let mut encoder = Vec::new();
        let mut c_in = c0;
        for (i, &w) in config.encoder_widths.iter().enumerate() {
            encoder.push(ConvBlock::new(Conv2d::new(c_in, w, 4, 2, 1, rng), i > 0, leaky));
            c_in = w;
        }

        let outs = decoder_widths(&config);
        let bottleneck = *config.encoder_widths.last().expect("validated");
        let mut appearance = Vec::new();
        let mut c_in = bottleneck;
        for &w in &outs {
            appearance.push(DeconvBlock::new(ConvTranspose2d::new(c_in, w, 4, 2, 1, rng), config.dropout));
            c_in = w;
        }
        let appearance_head = ConvBlock::new(Conv2d::new(c0, 3, 3, 1, 1, rng), false, Activation::Sigmoid);

        let mut motion = Vec::new();
        let mut c_in = bottleneck;
        for &w in &outs {
            motion.push(DeconvBlock::new(ConvTranspose2d::new(c_in, w, 4, 2, 1, rng), config.dropout));
            // skip concatenation doubles the channels
            c_in = 2 * w;
        }
        let motion_head = ConvBlock::new(Conv2d::new(2 * c0, 3, 3, 1, 1, rng), false, Activation::Identity);

        Ok(Generator {
            config,
            inception,
            encoder,
            appearance,
            appearance_head,
            motion,
            motion_head,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn input_shape(&self, batch: usize) -> Shape {
        Shape::new(batch, 3, self.config.height, self.config.width)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let s = x.shape();
        let want = self.input_shape(s.n);
        if s != want || s.n == 0 {
            return Err(Error::shape("generator", want, s));
        }
        Ok(())
    }

    /// Eval-mode forward: running batch-norm statistics, no dropout.
    pub fn infer(&self, x: &Tensor) -> Result<GeneratorOutput> {
        self.check_input(x)?;
        let mut branches = Vec::with_capacity(4);
        for branch in &self.inception {
            let mut h = x.clone();
            for block in branch {
                h = block.forward_eval(&h)?;
            }
            branches.push(h);
        }
        let inception = Tensor::concat(&branches.iter().collect::<Vec<_>>())?;

        let mut features = Vec::with_capacity(self.encoder.len());
        let mut h = inception.clone();
        for block in &self.encoder {
            h = block.forward_eval(&h)?;
            features.push(h.clone());
        }

        let mut a = h.clone();
        for block in &self.appearance {
            a = block.forward_eval(&a)?;
        }
        let frame = self.appearance_head.forward_eval(&a)?;

        let mut m = h;
        let depth = self.motion.len();
        for (j, block) in self.motion.iter().enumerate() {
            m = block.forward_eval(&m)?;
            let skip = if j + 1 < depth { &features[depth - 2 - j] } else { &inception };
            m = Tensor::concat(&[&m, skip])?;
        }
        let flow = self.motion_head.forward_eval(&m)?;
        Ok(GeneratorOutput { frame, flow })
    }

    /// Train-mode forward. Updates batch-norm running statistics and samples
    /// dropout masks from `rng`.
    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor, rng: &mut R) -> Result<(GeneratorOutput, GeneratorTape)> {
        self.check_input(x)?;
        let mut inception_tapes: [Vec<ConvBlockTape>; 4] = Default::default();
        for (branch, tapes) in self.inception.iter_mut().zip(inception_tapes.iter_mut()) {
            let mut h = x.clone();
            for block in branch.iter_mut() {
                let t = block.forward_train(&h)?;
                h = t.output().clone();
                tapes.push(t);
            }
        }
        let outs: Vec<&Tensor> = inception_tapes
            .iter()
            .map(|t| t.last().expect("non-empty branch").output())
            .collect();
        let inception = Tensor::concat(&outs)?;

        let mut encoder = Vec::with_capacity(self.encoder.len());
        let mut h = inception.clone();
        for block in self.encoder.iter_mut() {
            let t = block.forward_train(&h)?;
            h = t.output().clone();
            encoder.push(t);
        }

        let mut appearance = Vec::with_capacity(self.appearance.len());
        let mut a = h.clone();
        for block in self.appearance.iter_mut() {
            let t = block.forward_train(&a, rng)?;
            a = t.output().clone();
            appearance.push(t);
        }
        let appearance_head = self.appearance_head.forward_train(&a)?;

        let mut motion = Vec::with_capacity(self.motion.len());
        let mut m = h;
        let depth = self.motion.len();
        for j in 0..depth {
            let t = self.motion[j].forward_train(&m, rng)?;
            let skip = if j + 1 < depth { encoder[depth - 2 - j].output() } else { &inception };
            m = Tensor::concat(&[t.output(), skip])?;
            motion.push(t);
        }
        let motion_head = self.motion_head.forward_train(&m)?;

        let out = GeneratorOutput {
            frame: appearance_head.output().clone(),
            flow: motion_head.output().clone(),
        };
        let tape = GeneratorTape {
            inception: inception_tapes,
            encoder,
            appearance,
            appearance_head,
            motion,
            motion_head,
        };
        Ok((out, tape))
    }

    /// Backpropagates output gradients and accumulates parameter gradients.
    pub fn backward(&mut self, tape: &GeneratorTape, d_frame: &Tensor, d_flow: &Tensor) {
        let depth = self.encoder.len();
        let c0 = self.config.inception_channels();
        let dec_widths = decoder_widths(&self.config);

        let mut d_features: Vec<Option<Tensor>> = alloc::vec![None; depth];
        let mut d_inception: Option<Tensor> = None;

        let mut d = self
            .appearance_head
            .backward(&tape.appearance_head, d_frame, true, true)
            .expect("input gradient requested");
        for j in (0..depth).rev() {
            d = self.appearance[j].backward(&tape.appearance[j], &d, true);
        }
        accumulate(&mut d_features[depth - 1], d);

        let mut d = self
            .motion_head
            .backward(&tape.motion_head, d_flow, true, true)
            .expect("input gradient requested");
        for j in (0..depth).rev() {
            let w = dec_widths[j];
            let mut parts = d.split(&[w, w]).into_iter();
            let (d_up, d_skip) = (parts.next().unwrap(), parts.next().unwrap());
            if j + 1 < depth {
                accumulate(&mut d_features[depth - 2 - j], d_skip);
            } else {
                accumulate(&mut d_inception, d_skip);
            }
            d = self.motion[j].backward(&tape.motion[j], &d_up, true);
        }
        accumulate(&mut d_features[depth - 1], d);

        for k in (0..depth).rev() {
            let dk = d_features[k].take().expect("every encoder output feeds a decoder");
            let dx = self.encoder[k]
                .backward(&tape.encoder[k], &dk, true, true)
                .expect("input gradient requested");
            if k > 0 {
                accumulate(&mut d_features[k - 1], dx);
            } else {
                accumulate(&mut d_inception, dx);
            }
        }

        let d_inception = d_inception.expect("inception feeds the encoder");
        debug_assert_eq!(d_inception.shape().c, c0);
        let parts = d_inception.split(&self.config.inception_widths);
        for ((branch, tapes), mut d) in self.inception.iter_mut().zip(&tape.inception).zip(parts) {
            for (i, (block, t)) in branch.iter_mut().zip(tapes).enumerate().rev() {
                match block.backward(t, &d, true, i > 0) {
                    Some(dx) => d = dx,
                    None => break,
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Learnable parameters in a fixed order (optimizer state follows it).
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for branch in self.inception.iter_mut() {
            for b in branch.iter_mut() {
                b.params_mut(&mut out);
            }
        }
        for b in self.encoder.iter_mut() {
            b.params_mut(&mut out);
        }
        for b in self.appearance.iter_mut() {
            b.params_mut(&mut out);
        }
        self.appearance_head.params_mut(&mut out);
        for b in self.motion.iter_mut() {
            b.params_mut(&mut out);
        }
        self.motion_head.params_mut(&mut out);
        out
    }

    pub fn param_count(&self) -> usize {
        self.inception.iter().flatten().map(ConvBlock::param_count).sum::<usize>()
            + self.encoder.iter().map(ConvBlock::param_count).sum::<usize>()
            + self.appearance.iter().map(DeconvBlock::param_count).sum::<usize>()
            + self.appearance_head.param_count()
            + self.motion.iter().map(DeconvBlock::param_count).sum::<usize>()
            + self.motion_head.param_count()
    }

    /// Which encoder blocks carry batch-norm, shallowest first.
    pub fn encoder_batch_norm(&self) -> Vec<bool> {
        self.encoder.iter().map(|b| b.bn.is_some()).collect()
    }

    /// All parameters and batch-norm buffers by name.
    pub fn named_tensors(&self) -> NamedTensors<'_> {
        let mut out = Vec::new();
        for (i, branch) in self.inception.iter().enumerate() {
            for (j, b) in branch.iter().enumerate() {
                b.named(&format!("inception.{i}.{j}"), &mut out);
            }
        }
        for (i, b) in self.encoder.iter().enumerate() {
            b.named(&format!("encoder.{i}"), &mut out);
        }
        for (i, b) in self.appearance.iter().enumerate() {
            b.named(&format!("appearance.{i}"), &mut out);
        }
        self.appearance_head.named("appearance.head", &mut out);
        for (i, b) in self.motion.iter().enumerate() {
            b.named(&format!("motion.{i}"), &mut out);
        }
        self.motion_head.named("motion.head", &mut out);
        out
    }

    pub fn named_tensors_mut(&mut self) -> NamedTensorsMut<'_> {
        let mut out = Vec::new();
        for (i, branch) in self.inception.iter_mut().enumerate() {
            for (j, b) in branch.iter_mut().enumerate() {
                b.named_mut(&format!("inception.{i}.{j}"), &mut out);
            }
        }
        for (i, b) in self.encoder.iter_mut().enumerate() {
            b.named_mut(&format!("encoder.{i}"), &mut out);
        }
        for (i, b) in self.appearance.iter_mut().enumerate() {
            b.named_mut(&format!("appearance.{i}"), &mut out);
        }
        self.appearance_head.named_mut("appearance.head", &mut out);
        for (i, b) in self.motion.iter_mut().enumerate() {
            b.named_mut(&format!("motion.{i}"), &mut out);
        }
        self.motion_head.named_mut("motion.head", &mut out);
        out
    }
}

/// Output widths of decoder blocks, deepest first; the last block returns to
/// the Inception width so the final skip joins equal resolutions.
fn decoder_widths(config: &GeneratorConfig) -> Vec<usize> {
    let enc = &config.encoder_widths;
    let mut out: Vec<usize> = enc[..enc.len() - 1].iter().rev().copied().collect();
    out.push(config.inception_channels());
    out
}

fn accumulate(slot: &mut Option<Tensor>, t: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&t),
        None => *slot = Some(t),
    }
}
