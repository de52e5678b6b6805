use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{floorf, sqrtf};
use crate::tensor::{Shape, Tensor};

/// 8-bit image as decoded from disk, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input("empty image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Input(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Input(format!(
                "image buffer holds {} bytes, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(RawImage {
            width,
            height,
            channels,
            data,
        })
    }
}

/// One RGB frame, planar, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    pub height: usize,
    pub width: usize,
    data: Vec<f32>,
}

impl FrameTensor {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::Input(format!(
                "frame {height}x{width} needs {} values, got {}",
                3 * height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::Input(format!("frame value {v} outside [0, 1]")));
        }
        Ok(FrameTensor { height, width, data })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// `1 x 3 x H x W` network input.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(Shape::new(1, 3, self.height, self.width), self.data.clone()).expect("consistent size")
    }

    /// Takes sample `n` of a 3-channel batch, clamping into `[0, 1]`.
    pub fn from_tensor(t: &Tensor, n: usize) -> Result<Self> {
        let s = t.shape();
        if s.c != 3 || n >= s.n {
            return Err(Error::shape("FrameTensor::from_tensor", Shape::new(n + 1, 3, s.h, s.w), s));
        }
        let data = t.sample(n).iter().map(|v| v.clamp(0.0, 1.0)).collect();
        FrameTensor::new(s.h, s.w, data)
    }
}

/// Per-pixel displacement `(dx, dy)` in pixels per frame, with its magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub height: usize,
    pub width: usize,
    pub dx: Vec<f32>,
    pub dy: Vec<f32>,
    pub mag: Vec<f32>,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        let n = height * width;
        FlowField {
            height,
            width,
            dx: vec![0.0; n],
            dy: vec![0.0; n],
            mag: vec![0.0; n],
        }
    }

    /// Builds a field from displacements; magnitude is derived.
    pub fn from_components(height: usize, width: usize, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self> {
        let n = height * width;
        if dx.len() != n || dy.len() != n {
            return Err(Error::Input(format!("flow {height}x{width} needs {n} values per component")));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::Input("flow contains non-finite displacement".into()));
        }
        let mag = dx.iter().zip(&dy).map(|(x, y)| sqrtf(x * x + y * y)).collect();
        Ok(FlowField {
            height,
            width,
            dx,
            dy,
            mag,
        })
    }

    pub fn set(&mut self, row: usize, col: usize, dx: f32, dy: f32) {
        let i = row * self.width + col;
        self.dx[i] = dx;
        self.dy[i] = dy;
        self.mag[i] = sqrtf(dx * dx + dy * dy);
    }

    /// `1 x 3 x H x W` with channels `(dx, dy, mag)`.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(3 * self.dx.len());
        data.extend_from_slice(&self.dx);
        data.extend_from_slice(&self.dy);
        data.extend_from_slice(&self.mag);
        Tensor::from_vec(Shape::new(1, 3, self.height, self.width), data).expect("consistent size")
    }
}

/// Bilinear resize of a planar image with half-pixel centres and edge clamping.
pub fn resize_bilinear(src: &[f32], channels: usize, in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    fn taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f32)> {
        let scale = in_len as f32 / out_len as f32;
        (0..out_len)
            .map(|o| {
                let s = ((o as f32 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f32);
                let i0 = floorf(s) as usize;
                let i1 = (i0 + 1).min(in_len - 1);
                (i0, i1, s - i0 as f32)
            })
            .collect()
    }
    let ys = taps(out_h, in_h);
    let xs = taps(out_w, in_w);
    let mut out = Vec::with_capacity(channels * out_h * out_w);
    for c in 0..channels {
        let plane = &src[c * in_h * in_w..(c + 1) * in_h * in_w];
        for &(y0, y1, wy) in &ys {
            for &(x0, x1, wx) in &xs {
                let (a, b) = (plane[y0 * in_w + x0], plane[y0 * in_w + x1]);
                let (c_, d) = (plane[y1 * in_w + x0], plane[y1 * in_w + x1]);
                let top = a + wx * (b - a);
                let bottom = c_ + wx * (d - c_);
                out.push(top + wy * (bottom - top));
            }
        }
    }
    out
}

/// Scales 8-bit intensities into `[0, 1]`, replicates gray to RGB, and
/// resizes bilinearly to `height x width`.
pub fn preprocess_frame(raw: &RawImage, height: usize, width: usize) -> Result<FrameTensor> {
    if raw.width == 0 || raw.height == 0 || raw.data.is_empty() {
        return Err(Error::Input("empty image".into()));
    }
    let plane = raw.width * raw.height;
    let mut planar = vec![0.0f32; 3 * plane];
    match raw.channels {
        1 => {
            for (i, &v) in raw.data.iter().enumerate() {
                let f = v as f32 / 255.0;
                planar[i] = f;
                planar[plane + i] = f;
                planar[2 * plane + i] = f;
            }
        }
        3 => {
            for (i, px) in raw.data.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    planar[c * plane + i] = px[c] as f32 / 255.0;
                }
            }
        }
        n => return Err(Error::Input(format!("unsupported channel count {n}"))),
    }
    let data = if raw.height == height && raw.width == width {
        planar
    } else {
        let mut r = resize_bilinear(&planar, 3, raw.height, raw.width, height, width);
        r.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        r
    };
    FrameTensor::new(height, width, data)
}
