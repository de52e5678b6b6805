use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

/// A learnable tensor and its accumulated gradient, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn new(value: Vec<f32>) -> Self {
        let grad = vec![0.0; value.len()];
        Param { value, grad }
    }

    pub fn filled(len: usize, v: f32) -> Self {
        Param::new(vec![v; len])
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(len: usize, bound: f32, rng: &mut R) -> Self {
        Param::new((0..len).map(|_| rng.random_range(-bound..=bound)).collect())
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Flat (name, values) view used for checkpoints and structural audits.
pub type NamedTensors<'a> = Vec<(String, &'a [f32])>;
pub type NamedTensorsMut<'a> = Vec<(String, &'a mut Vec<f32>)>;
