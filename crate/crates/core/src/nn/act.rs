use alloc::vec::Vec;

use rand::Rng;

use crate::math::expf;
use crate::tensor::Tensor;

/// Pointwise nonlinearities. Backward passes use the forward *output*, which
/// determines the derivative for every variant here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f32),
    Sigmoid,
}

impl Activation {
    pub fn apply(self, t: &mut Tensor) {
        match self {
            Activation::Identity => {}
            Activation::Relu => t.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::LeakyRelu(slope) => t.data_mut().iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v *= slope
                }
            }),
            Activation::Sigmoid => t.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
        }
    }

    /// Turns `grad` (w.r.t. the output) into the gradient w.r.t. the input.
    pub fn backward(self, output: &Tensor, grad: &mut Tensor) {
        let y = output.data();
        let g = grad.data_mut();
        match self {
            Activation::Identity => {}
            Activation::Relu => g.iter_mut().zip(y).for_each(|(g, y)| {
                if *y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::LeakyRelu(slope) => g.iter_mut().zip(y).for_each(|(g, y)| {
                if *y < 0.0 {
                    *g *= slope
                }
            }),
            Activation::Sigmoid => g.iter_mut().zip(y).for_each(|(g, y)| *g *= y * (1.0 - y)),
        }
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + expf(-x))
    } else {
        let e = expf(x);
        e / (1.0 + e)
    }
}

/// Inverted dropout: each unit is kept with probability `1 - p` and scaled by
/// `1 / (1 - p)`. Returns the per-unit multipliers.
pub fn dropout_mask<R: Rng + ?Sized>(t: &mut Tensor, p: f32, rng: &mut R) -> Vec<f32> {
    let scale = 1.0 / (1.0 - p);
    let mask: Vec<f32> = (0..t.len())
        .map(|_| if rng.random::<f32>() < p { 0.0 } else { scale })
        .collect();
    t.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
    mask
}

pub fn dropout_backward(mask: &[f32], grad: &mut Tensor) {
    grad.data_mut().iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
}
