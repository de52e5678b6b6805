//! Minimal line plots of ROC and PR curves as PNG images.

use amc_core::data::RawImage;

const SIZE: usize = 320;
const MARGIN: usize = 24;

struct Canvas {
    data: Vec<u8>,
}

impl Canvas {
    fn new() -> Self {
        Canvas { data: vec![255; SIZE * SIZE * 3] }
    }

    fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < SIZE && y < SIZE {
            let i = 3 * (y * SIZE + x);
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    /// Maps unit coordinates to pixels, y pointing up.
    fn px(u: f64, v: f64) -> (f64, f64) {
        let span = (SIZE - 2 * MARGIN) as f64;
        (MARGIN as f64 + u.clamp(0.0, 1.0) * span, (SIZE - MARGIN) as f64 - v.clamp(0.0, 1.0) * span)
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), rgb: [u8; 3]) {
        let (x0, y0) = Self::px(a.0, a.1);
        let (x1, y1) = Self::px(b.0, b.1);
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = x0 + t * (x1 - x0);
            let y = y0 + t * (y1 - y0);
            self.put(x.round() as usize, y.round() as usize, rgb);
        }
    }
}

/// Draws `points` (unit square coordinates) inside a framed plot. With
/// `diagonal`, the chance line is drawn as well.
pub fn curve_image(points: &[(f64, f64)], diagonal: bool) -> RawImage {
    let mut c = Canvas::new();
    let gray = [150, 150, 150];
    for (a, b) in [((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, 1.0)), ((1.0, 1.0), (0.0, 1.0)), ((0.0, 1.0), (0.0, 0.0))] {
        c.line(a, b, [0, 0, 0]);
    }
    if diagonal {
        c.line((0.0, 0.0), (1.0, 1.0), gray);
    }
    for w in points.windows(2) {
        c.line(w[0], w[1], [20, 70, 200]);
    }
    RawImage::new(SIZE, SIZE, 3, c.data).expect("canvas size is consistent")
}
