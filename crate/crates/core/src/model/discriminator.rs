use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::blocks::{ConvBlock, ConvBlockTape};
use super::config::DiscriminatorConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, Conv2d, NamedTensors, NamedTensorsMut, Param};
use crate::tensor::{Shape, Tensor};

/// Judges whether a flow field belongs to a frame. Input is the channel
/// concatenation of frame and flow; every unit of the final sigmoid maps is a
/// separate real/fake probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    height: usize,
    width: usize,
    blocks: Vec<ConvBlock>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorTape {
    blocks: Vec<ConvBlockTape>,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(config: DiscriminatorConfig, height: usize, width: usize, rng: &mut R) -> Result<Self> {
        config.validate(height, width)?;
        let leaky = Activation::LeakyRelu(config.leaky_slope);
        let mut blocks = Vec::new();
        let mut c_in = 6;
        for (i, &w) in config.widths.iter().enumerate() {
            blocks.push(ConvBlock::new(Conv2d::new(c_in, w, 4, 2, 1, rng), i > 0, leaky));
            c_in = w;
        }
        blocks.push(ConvBlock::new(
            Conv2d::new(c_in, config.out_channels, 3, 1, 1, rng),
            false,
            Activation::Sigmoid,
        ));
        Ok(Discriminator {
            config,
            height,
            width,
            blocks,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn output_shape(&self, batch: usize) -> Shape {
        let (h, w) = self.config.output_size(self.height, self.width);
        Shape::new(batch, self.config.out_channels, h, w)
    }

    fn join(&self, frames: &Tensor, flows: &Tensor) -> Result<Tensor> {
        let fs = frames.shape();
        let want = Shape::new(fs.n, 3, self.height, self.width);
        if fs != want || fs.n == 0 {
            return Err(Error::shape("discriminator frames", want, fs));
        }
        if flows.shape() != want {
            return Err(Error::shape("discriminator flows", want, flows.shape()));
        }
        Tensor::concat(&[frames, flows])
    }

    pub fn infer(&self, frames: &Tensor, flows: &Tensor) -> Result<Tensor> {
        let mut h = self.join(frames, flows)?;
        for b in &self.blocks {
            h = b.forward_eval(&h)?;
        }
        Ok(h)
    }

    pub fn forward_train(&mut self, frames: &Tensor, flows: &Tensor) -> Result<(Tensor, DiscriminatorTape)> {
        let mut h = self.join(frames, flows)?;
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for b in self.blocks.iter_mut() {
            let t = b.forward_train(&h)?;
            h = t.output().clone();
            tapes.push(t);
        }
        Ok((h, DiscriminatorTape { blocks: tapes }))
    }

    /// Backpropagates `d_out`. Parameter gradients accumulate only when
    /// `accumulate` is set; with `need_input_grad` the gradients w.r.t. the
    /// frame and flow inputs are returned.
    pub fn backward(
        &mut self,
        tape: &DiscriminatorTape,
        d_out: &Tensor,
        accumulate: bool,
        need_input_grad: bool,
    ) -> Option<(Tensor, Tensor)> {
        let mut d = d_out.clone();
        for (i, (b, t)) in self.blocks.iter_mut().zip(&tape.blocks).enumerate().rev() {
            let need_dx = i > 0 || need_input_grad;
            {
                let dx = b.backward(t, &d, accumulate, need_dx)?;
                d = dx
            }
        }
        let mut parts = d.split(&[3, 3]).into_iter();
        Some((parts.next().unwrap(), parts.next().unwrap()))
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for b in self.blocks.iter_mut() {
            b.params_mut(&mut out);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(ConvBlock::param_count).sum()
    }

    pub fn named_tensors(&self) -> NamedTensors<'_> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            b.named(&format!("disc.{i}"), &mut out);
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> NamedTensorsMut<'_> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.named_mut(&format!("disc.{i}"), &mut out);
        }
        out
    }
}
