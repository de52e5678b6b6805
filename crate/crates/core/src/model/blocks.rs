use alloc::vec::Vec;

use rand::Rng;

use crate::error::Result;
use crate::nn::{
    dropout_backward, dropout_mask, Activation, BatchNorm2d, BatchNormCache, Conv2d, ConvTranspose2d,
    NamedTensors, NamedTensorsMut, Param,
};
use crate::tensor::Tensor;

/// Convolution, optional batch-norm, activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub bn: Option<BatchNorm2d>,
    pub act: Activation,
}

#[derive(Debug, Clone)]
pub struct ConvBlockTape {
    input: Tensor,
    bn: Option<BatchNormCache>,
    output: Tensor,
}

impl ConvBlockTape {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

impl ConvBlock {
    pub fn new(conv: Conv2d, batch_norm: bool, act: Activation) -> Self {
        let bn = batch_norm.then(|| BatchNorm2d::new(conv.c_out));
        ConvBlock { conv, bn, act }
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<ConvBlockTape> {
        let mut y = self.conv.forward(x)?;
        let bn = match self.bn.as_mut() {
            Some(bn) => {
                let (out, cache) = bn.forward_train(&y);
                y = out;
                Some(cache)
            }
            None => None,
        };
        self.act.apply(&mut y);
        Ok(ConvBlockTape {
            input: x.clone(),
            bn,
            output: y,
        })
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = self.conv.forward(x)?;
        if let Some(bn) = &self.bn {
            y = bn.forward_eval(&y);
        }
        self.act.apply(&mut y);
        Ok(y)
    }

    pub fn backward(&mut self, tape: &ConvBlockTape, dy: &Tensor, accumulate: bool, need_dx: bool) -> Option<Tensor> {
        let mut g = dy.clone();
        self.act.backward(&tape.output, &mut g);
        if let (Some(bn), Some(cache)) = (self.bn.as_mut(), tape.bn.as_ref()) {
            g = bn.backward(cache, &g, accumulate);
        }
        self.conv.backward(&tape.input, &g, accumulate, need_dx)
    }

    pub fn param_count(&self) -> usize {
        self.conv.param_count() + self.bn.as_ref().map_or(0, |b| 2 * b.channels())
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        out.extend(self.conv.params_mut());
        if let Some(bn) = self.bn.as_mut() {
            out.extend(bn.params_mut());
        }
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut NamedTensors<'a>) {
        self.conv.named(&alloc::format!("{prefix}.conv"), out);
        if let Some(bn) = &self.bn {
            bn.named(&alloc::format!("{prefix}.bn"), out);
        }
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut NamedTensorsMut<'a>) {
        self.conv.named_mut(&alloc::format!("{prefix}.conv"), out);
        if let Some(bn) = self.bn.as_mut() {
            bn.named_mut(&alloc::format!("{prefix}.bn"), out);
        }
    }
}

/// Strided deconvolution, batch-norm, dropout, ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvBlock {
    pub deconv: ConvTranspose2d,
    pub bn: BatchNorm2d,
    pub dropout: f32,
}

#[derive(Debug, Clone)]
pub struct DeconvBlockTape {
    input: Tensor,
    bn: BatchNormCache,
    mask: Vec<f32>,
    output: Tensor,
}

impl DeconvBlockTape {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

impl DeconvBlock {
    pub fn new(deconv: ConvTranspose2d, dropout: f32) -> Self {
        let bn = BatchNorm2d::new(deconv.c_out);
        DeconvBlock { deconv, bn, dropout }
    }

    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor, rng: &mut R) -> Result<DeconvBlockTape> {
        let y = self.deconv.forward(x)?;
        let (mut y, bn) = self.bn.forward_train(&y);
        let mask = if self.dropout > 0.0 {
            dropout_mask(&mut y, self.dropout, rng)
        } else {
            Vec::new()
        };
        Activation::Relu.apply(&mut y);
        Ok(DeconvBlockTape {
            input: x.clone(),
            bn,
            mask,
            output: y,
        })
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let y = self.deconv.forward(x)?;
        let mut y = self.bn.forward_eval(&y);
        Activation::Relu.apply(&mut y);
        Ok(y)
    }

    pub fn backward(&mut self, tape: &DeconvBlockTape, dy: &Tensor, accumulate: bool) -> Tensor {
        let mut g = dy.clone();
        Activation::Relu.backward(&tape.output, &mut g);
        if !tape.mask.is_empty() {
            dropout_backward(&tape.mask, &mut g);
        }
        let g = self.bn.backward(&tape.bn, &g, accumulate);
        self.deconv
            .backward(&tape.input, &g, accumulate, true)
            .expect("input gradient requested")
    }

    pub fn param_count(&self) -> usize {
        self.deconv.param_count() + 2 * self.bn.channels()
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        out.extend(self.deconv.params_mut());
        out.extend(self.bn.params_mut());
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut NamedTensors<'a>) {
        self.deconv.named(&alloc::format!("{prefix}.deconv"), out);
        self.bn.named(&alloc::format!("{prefix}.bn"), out);
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut NamedTensorsMut<'a>) {
        self.deconv.named_mut(&alloc::format!("{prefix}.deconv"), out);
        self.bn.named_mut(&alloc::format!("{prefix}.bn"), out);
    }
}
