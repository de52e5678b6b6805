use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::gemm::gemm;
use super::param::{NamedTensors, NamedTensorsMut, Param};
use crate::error::{Error, Result};
use crate::math::sqrtf;
use crate::tensor::{Shape, Tensor};

/// Geometry of a convolution seen from its "image" side (`c x h x w`) and
/// its "column" side (`oh x ow` kernel placements).
#[derive(Debug, Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

fn conv_out(len: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if padded < k {
        return None;
    }
    Some((padded - k) / stride + 1)
}

fn im2col(x: &[f32], g: &Geom, col: &mut [f32]) {
    let cols = g.cols();
    let mut row = 0;
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-adds columns back onto the image.
fn col2im(col: &[f32], g: &Geom, x: &mut [f32]) {
    let cols = g.cols();
    let mut row = 0;
    for c in 0..g.c {
        let plane = &mut x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let srcrow = &col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let line = &srcrow[oy * g.ow..(oy + 1) * g.ow];
                    for (ox, v) in line.iter().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += *v;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

fn add_bias(out: &mut [f32], bias: &[f32], plane: usize) {
    for (c, b) in bias.iter().enumerate() {
        out[c * plane..(c + 1) * plane].iter_mut().for_each(|v| *v += *b);
    }
}

fn accumulate_bias_grad(dy: &[f32], grad: &mut [f32], plane: usize) {
    for (c, g) in grad.iter_mut().enumerate() {
        let s: f64 = dy[c * plane..(c + 1) * plane].iter().map(|&v| v as f64).sum();
        *g += s as f32;
    }
}

/// 2-D convolution, weight layout `[c_out, c_in, k, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = (c_in * kernel * kernel) as f32;
        let bound = 1.0 / sqrtf(fan_in);
        Conv2d {
            weight: Param::uniform(c_out * c_in * kernel * kernel, bound, rng),
            bias: Param::uniform(c_out, bound, rng),
            c_in,
            c_out,
            kernel,
            stride,
            pad,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.c != self.c_in {
            return Err(Error::shape(
                "conv2d",
                Shape::new(input.n, self.c_in, input.h, input.w),
                input,
            ));
        }
        let oh = conv_out(input.h, self.kernel, self.stride, self.pad);
        let ow = conv_out(input.w, self.kernel, self.stride, self.pad);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok(Shape::new(input.n, self.c_out, oh, ow)),
            _ => Err(Error::Input(format!(
                "input {input} smaller than {k}x{k} kernel",
                k = self.kernel
            ))),
        }
    }

    fn geom(&self, input: Shape, out: Shape) -> Geom {
        Geom {
            c: self.c_in,
            h: input.h,
            w: input.w,
            k: self.kernel,
            stride: self.stride,
            pad: self.pad,
            oh: out.h,
            ow: out.w,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(x.shape())?;
        let g = self.geom(x.shape(), out_shape);
        let mut out = Tensor::zeros(out_shape);
        let mut col = if g.is_pointwise() {
            Vec::new()
        } else {
            vec![0.0; g.rows() * g.cols()]
        };
        for n in 0..out_shape.n {
            let xs = x.sample(n);
            let b: &[f32] = if g.is_pointwise() {
                xs
            } else {
                im2col(xs, &g, &mut col);
                &col
            };
            let ys = out.sample_mut(n);
            gemm(self.c_out, g.rows(), g.cols(), &self.weight.value, false, b, false, 0.0, ys);
            add_bias(ys, &self.bias.value, g.cols());
        }
        Ok(out)
    }

    /// Gradient w.r.t. the input `x` of the forward pass that produced `dy`.
    /// Parameter gradients are accumulated only when `accumulate` is set.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, accumulate: bool, need_dx: bool) -> Option<Tensor> {
        let out_shape = dy.shape();
        let g = self.geom(x.shape(), out_shape);
        let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
        let pointwise = g.is_pointwise();
        let mut col = vec![0.0; if pointwise { 0 } else { g.rows() * g.cols() }];
        let mut dcol = vec![0.0; if need_dx && !pointwise { g.rows() * g.cols() } else { 0 }];
        for n in 0..out_shape.n {
            let dys = dy.sample(n);
            if accumulate {
                let xs = x.sample(n);
                let b: &[f32] = if pointwise {
                    xs
                } else {
                    im2col(xs, &g, &mut col);
                    &col
                };
                gemm(self.c_out, g.cols(), g.rows(), dys, false, b, true, 1.0, &mut self.weight.grad);
                accumulate_bias_grad(dys, &mut self.bias.grad, g.cols());
            }
            if let Some(dx) = dx.as_mut() {
                let dxs = dx.sample_mut(n);
                if pointwise {
                    gemm(g.rows(), self.c_out, g.cols(), &self.weight.value, true, dys, false, 0.0, dxs);
                } else {
                    gemm(g.rows(), self.c_out, g.cols(), &self.weight.value, true, dys, false, 0.0, &mut dcol);
                    col2im(&dcol, &g, dxs);
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut NamedTensors<'a>) {
        push_named(prefix, &self.weight, &self.bias, out);
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut NamedTensorsMut<'a>) {
        out.push((format!("{prefix}.weight"), &mut self.weight.value));
        out.push((format!("{prefix}.bias"), &mut self.bias.value));
    }
}

fn push_named<'a>(prefix: &str, w: &'a Param, b: &'a Param, out: &mut NamedTensors<'a>) {
    out.push((format!("{prefix}.weight") as String, &w.value));
    out.push((format!("{prefix}.bias"), &b.value));
}

/// Transposed convolution (fractionally strided), weight layout
/// `[c_in, c_out, k, k]`. Its forward pass is the input-gradient of the
/// matching [`Conv2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d {
    pub weight: Param,
    pub bias: Param,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose2d {
    pub fn new<R: Rng + ?Sized>(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = (c_out * kernel * kernel) as f32;
        let bound = 1.0 / sqrtf(fan_in);
        ConvTranspose2d {
            weight: Param::uniform(c_in * c_out * kernel * kernel, bound, rng),
            bias: Param::uniform(c_out, bound, rng),
            c_in,
            c_out,
            kernel,
            stride,
            pad,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.c != self.c_in {
            return Err(Error::shape(
                "conv_transpose2d",
                Shape::new(input.n, self.c_in, input.h, input.w),
                input,
            ));
        }
        let up = |len: usize| ((len - 1) * self.stride + self.kernel).checked_sub(2 * self.pad);
        match (up(input.h.max(1)), up(input.w.max(1))) {
            (Some(h), Some(w)) if h > 0 && w > 0 && input.h > 0 && input.w > 0 => {
                Ok(Shape::new(input.n, self.c_out, h, w))
            }
            _ => Err(Error::Input(format!("input {input} too small for transposed conv"))),
        }
    }

    fn geom(&self, input: Shape, out: Shape) -> Geom {
        Geom {
            c: self.c_out,
            h: out.h,
            w: out.w,
            k: self.kernel,
            stride: self.stride,
            pad: self.pad,
            oh: input.h,
            ow: input.w,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(x.shape())?;
        let g = self.geom(x.shape(), out_shape);
        let mut out = Tensor::zeros(out_shape);
        let mut col = vec![0.0; g.rows() * g.cols()];
        for n in 0..out_shape.n {
            gemm(g.rows(), self.c_in, g.cols(), &self.weight.value, true, x.sample(n), false, 0.0, &mut col);
            let ys = out.sample_mut(n);
            col2im(&col, &g, ys);
            add_bias(ys, &self.bias.value, out_shape.plane());
        }
        Ok(out)
    }

    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, accumulate: bool, need_dx: bool) -> Option<Tensor> {
        let g = self.geom(x.shape(), dy.shape());
        let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
        let mut col = vec![0.0; g.rows() * g.cols()];
        for n in 0..x.shape().n {
            let dys = dy.sample(n);
            im2col(dys, &g, &mut col);
            if accumulate {
                gemm(self.c_in, g.cols(), g.rows(), x.sample(n), false, &col, true, 1.0, &mut self.weight.grad);
                accumulate_bias_grad(dys, &mut self.bias.grad, dy.shape().plane());
            }
            if let Some(dx) = dx.as_mut() {
                gemm(self.c_in, g.rows(), g.cols(), &self.weight.value, false, &col, false, 0.0, dx.sample_mut(n));
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut NamedTensors<'a>) {
        push_named(prefix, &self.weight, &self.bias, out);
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut NamedTensorsMut<'a>) {
        out.push((format!("{prefix}.weight"), &mut self.weight.value));
        out.push((format!("{prefix}.bias"), &mut self.bias.value));
    }
}
