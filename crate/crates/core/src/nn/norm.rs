use alloc::format;
use alloc::vec::Vec;

use super::param::{NamedTensors, NamedTensorsMut, Param};
use crate::math::sqrt;
use crate::tensor::Tensor;

/// Per-channel batch normalization over (N, H, W).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
    pub eps: f32,
}

/// What [`BatchNorm2d::backward`] needs from a train-mode forward.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Tensor,
    inv_std: Vec<f32>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Param::filled(channels, 1.0),
            beta: Param::filled(channels, 0.0),
            running_mean: alloc::vec![0.0; channels],
            running_var: alloc::vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes with batch statistics and updates the running estimates.
    pub fn forward_train(&mut self, x: &Tensor) -> (Tensor, BatchNormCache) {
        let s = x.shape();
        assert_eq!(s.c, self.channels(), "batch-norm channel count");
        let plane = s.plane();
        let count = (s.n * plane) as f64;
        let mut xhat = Tensor::zeros(s);
        let mut y = Tensor::zeros(s);
        let mut inv_std = Vec::with_capacity(s.c);
        for c in 0..s.c {
            let mut sum = 0.0f64;
            let mut sq = 0.0f64;
            for n in 0..s.n {
                for &v in &x.sample(n)[c * plane..(c + 1) * plane] {
                    sum += v as f64;
                    sq += (v as f64) * (v as f64);
                }
            }
            let mean = sum / count;
            let var = (sq / count - mean * mean).max(0.0);
            let istd = 1.0 / sqrt(var + self.eps as f64);
            inv_std.push(istd as f32);
            let (g, b) = (self.gamma.value[c], self.beta.value[c]);
            for n in 0..s.n {
                let off = n * s.sample_len() + c * plane;
                let src = &x.data()[off..off + plane];
                let xh = &mut xhat.data_mut()[off..off + plane];
                for (o, &v) in xh.iter_mut().zip(src) {
                    *o = ((v as f64 - mean) * istd) as f32;
                }
                let yy = &mut y.data_mut()[off..off + plane];
                for (o, &v) in yy.iter_mut().zip(&xhat.data()[off..off + plane]) {
                    *o = g * v + b;
                }
            }
            let unbiased = if count > 1.0 { var * count / (count - 1.0) } else { var };
            let m = self.momentum;
            self.running_mean[c] = (1.0 - m) * self.running_mean[c] + m * mean as f32;
            self.running_var[c] = (1.0 - m) * self.running_var[c] + m * unbiased as f32;
        }
        (y, BatchNormCache { xhat, inv_std })
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let s = x.shape();
        assert_eq!(s.c, self.channels(), "batch-norm channel count");
        let plane = s.plane();
        let mut y = x.clone();
        for n in 0..s.n {
            let ys = y.sample_mut(n);
            for c in 0..s.c {
                let istd = 1.0 / sqrt(self.running_var[c] as f64 + self.eps as f64);
                let scale = (self.gamma.value[c] as f64 * istd) as f32;
                let shift = self.beta.value[c] - self.running_mean[c] * scale;
                ys[c * plane..(c + 1) * plane].iter_mut().for_each(|v| *v = *v * scale + shift);
            }
        }
        y
    }

    pub fn backward(&mut self, cache: &BatchNormCache, dy: &Tensor, accumulate: bool) -> Tensor {
        let s = dy.shape();
        let plane = s.plane();
        let count = (s.n * plane) as f64;
        let mut dx = Tensor::zeros(s);
        for c in 0..s.c {
            let mut sum_dy = 0.0f64;
            let mut sum_dy_xhat = 0.0f64;
            for n in 0..s.n {
                let off = n * s.sample_len() + c * plane;
                for (d, xh) in dy.data()[off..off + plane].iter().zip(&cache.xhat.data()[off..off + plane]) {
                    sum_dy += *d as f64;
                    sum_dy_xhat += (*d as f64) * (*xh as f64);
                }
            }
            if accumulate {
                self.gamma.grad[c] += sum_dy_xhat as f32;
                self.beta.grad[c] += sum_dy as f32;
            }
            let g = self.gamma.value[c] as f64;
            let istd = cache.inv_std[c] as f64;
            let mean_dy = sum_dy / count;
            let mean_dy_xhat = sum_dy_xhat / count;
            for n in 0..s.n {
                let off = n * s.sample_len() + c * plane;
                let out = &mut dx.data_mut()[off..off + plane];
                for ((o, d), xh) in out
                    .iter_mut()
                    .zip(&dy.data()[off..off + plane])
                    .zip(&cache.xhat.data()[off..off + plane])
                {
                    *o = (g * istd * (*d as f64 - mean_dy - *xh as f64 * mean_dy_xhat)) as f32;
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.gamma, &mut self.beta]
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut NamedTensors<'a>) {
        out.push((format!("{prefix}.gamma"), &self.gamma.value));
        out.push((format!("{prefix}.beta"), &self.beta.value));
        out.push((format!("{prefix}.running_mean"), &self.running_mean));
        out.push((format!("{prefix}.running_var"), &self.running_var));
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut NamedTensorsMut<'a>) {
        out.push((format!("{prefix}.gamma"), &mut self.gamma.value));
        out.push((format!("{prefix}.beta"), &mut self.beta.value));
        out.push((format!("{prefix}.running_mean"), &mut self.running_mean));
        out.push((format!("{prefix}.running_var"), &mut self.running_var));
    }
}
