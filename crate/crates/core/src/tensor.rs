//! Dense NCHW `f32` tensors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Batch, channel, height, width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    /// Elements in one sample.
    pub const fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.numel()],
        }
    }

    pub fn full(shape: Shape, value: f32) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Input(alloc::format!(
                "tensor of shape {shape} needs {} values, got {}",
                shape.numel(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, n: usize) -> &[f32] {
        let len = self.shape.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [f32] {
        let len = self.shape.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_shape(&self, op: &'static str, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::shape(op, expected, self.shape));
        }
        Ok(())
    }

    /// Stacks single samples (each `1 x C x H x W`) into a batch.
    pub fn stack(samples: &[&Tensor]) -> Result<Tensor> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Input("cannot stack zero tensors".into()))?
            .shape;
        let mut data = Vec::with_capacity(first.numel() * samples.len());
        let mut n = 0;
        for s in samples {
            if s.shape.c != first.c || s.shape.h != first.h || s.shape.w != first.w {
                return Err(Error::shape("stack", first, s.shape));
            }
            n += s.shape.n;
            data.extend_from_slice(&s.data);
        }
        Ok(Tensor {
            shape: Shape::new(n, first.c, first.h, first.w),
            data,
        })
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (a.shape, b.shape);
        if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
            return Err(Error::shape(
                "concat_channels",
                Shape::new(sa.n, sb.c, sa.h, sa.w),
                sb,
            ));
        }
        let out_shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..sa.n {
            data.extend_from_slice(a.sample(n));
            data.extend_from_slice(b.sample(n));
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Inverse of [`Tensor::concat_channels`]: the first `c_first` channels and the rest.
    pub fn split_channels(&self, c_first: usize) -> (Tensor, Tensor) {
        let s = self.shape;
        assert!(c_first <= s.c);
        let plane = s.plane();
        let sa = Shape::new(s.n, c_first, s.h, s.w);
        let sb = Shape::new(s.n, s.c - c_first, s.h, s.w);
        let mut a = Vec::with_capacity(sa.numel());
        let mut b = Vec::with_capacity(sb.numel());
        for n in 0..s.n {
            let sample = self.sample(n);
            a.extend_from_slice(&sample[..c_first * plane]);
            b.extend_from_slice(&sample[c_first * plane..]);
        }
        (Tensor { shape: sa, data: a }, Tensor { shape: sb, data: b })
    }

    /// Concatenates any number of tensors along the channel axis.
    pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("cannot concatenate zero tensors".into()))?
            .shape;
        let mut c = 0;
        for p in parts {
            let s = p.shape;
            if s.n != first.n || s.h != first.h || s.w != first.w {
                return Err(Error::shape("concat", Shape::new(first.n, s.c, first.h, first.w), s));
            }
            c += s.c;
        }
        let out_shape = Shape::new(first.n, c, first.h, first.w);
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..first.n {
            for p in parts {
                data.extend_from_slice(p.sample(n));
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Splits along the channel axis into pieces of the given widths.
    pub fn split(&self, widths: &[usize]) -> Vec<Tensor> {
        let s = self.shape;
        assert_eq!(widths.iter().sum::<usize>(), s.c, "split widths must cover all channels");
        let plane = s.plane();
        let mut out: Vec<Tensor> = widths
            .iter()
            .map(|&c| Tensor {
                shape: Shape::new(s.n, c, s.h, s.w),
                data: Vec::with_capacity(s.n * c * plane),
            })
            .collect();
        for n in 0..s.n {
            let sample = self.sample(n);
            let mut off = 0;
            for (t, &c) in out.iter_mut().zip(widths) {
                t.data.extend_from_slice(&sample[off..off + c * plane]);
                off += c * plane;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }
}
