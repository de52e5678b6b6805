//! Color coding of flow fields: hue follows direction, saturation magnitude.

use alloc::vec::Vec;

use crate::data::{FlowField, RawImage};
use crate::error::Result;
use crate::math::{atan2f, floorf};

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [u8; 3] {
    let h6 = h * 6.0;
    let sector = floorf(h6);
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector as i32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let q8 = |x: f32| (x.clamp(0.0, 1.0) * 255.0 + 0.5) as u8;
    [q8(r), q8(g), q8(b)]
}

/// RGB rendering of `flow`. Saturation is `mag / mag_max` clipped to 1; with
/// `mag_max = None` the field's own maximum is used. Zero motion is white.
pub fn flow_to_rgb(flow: &FlowField, mag_max: Option<f32>) -> Result<RawImage> {
    let peak = mag_max.unwrap_or_else(|| flow.mag.iter().copied().fold(0.0, f32::max));
    let mut data = Vec::with_capacity(flow.height * flow.width * 3);
    for i in 0..flow.height * flow.width {
        let (dx, dy, m) = (flow.dx[i], flow.dy[i], flow.mag[i]);
        let s = if peak > 0.0 && m.is_finite() { (m / peak).min(1.0) } else { 0.0 };
        let mut hue = atan2f(dy, dx) / (2.0 * core::f32::consts::PI);
        if hue < 0.0 {
            hue += 1.0;
        }
        if !(0.0..1.0).contains(&hue) {
            hue = 0.0;
        }
        data.extend_from_slice(&hsv_to_rgb(hue, s, 1.0));
    }
    RawImage::new(flow.width, flow.height, 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_white() {
        let img = flow_to_rgb(&FlowField::zeros(4, 5), None).unwrap();
        assert!(img.data.iter().all(|&v| v == 255));
    }

    #[test]
    fn direction_sets_hue() {
        let f = FlowField::from_components(1, 3, vec![1.0, 0.0, -1.0], vec![0.0, 1.0, 0.0]).unwrap();
        let img = flow_to_rgb(&f, None).unwrap();
        assert_eq!(&img.data[0..3], &[255, 0, 0]);
        assert_eq!(&img.data[3..6], &[128, 255, 0]);
        assert_eq!(&img.data[6..9], &[0, 255, 255]);
    }

    #[test]
    fn saturation_clips_at_mag_max() {
        let f = FlowField::from_components(1, 2, vec![0.5, 4.0], vec![0.0, 0.0]).unwrap();
        let img = flow_to_rgb(&f, Some(1.0)).unwrap();
        assert_eq!(&img.data[0..3], &[255, 128, 128]);
        assert_eq!(&img.data[3..6], &[255, 0, 0]);
    }
}
