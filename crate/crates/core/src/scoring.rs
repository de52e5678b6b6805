//! Frame-level anomaly scores from the two streams' prediction errors.
//!
//! The flow error map picks the worst `patch x patch` window; the mean
//! squared errors of both streams inside that window are scaled by weights
//! calibrated on training data and combined in log space.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{exp, ln};

/// Floor inside the score logarithms, so a perfect prediction stays finite.
pub const SCORE_EPS: f64 = 1e-12;

/// Per-pixel error averaged over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ErrorMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Input(format!("error map {height}x{width} needs {} values", height * width)));
        }
        Ok(ErrorMap { height, width, data })
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }
}

/// Mean over channels of the squared difference of two planar images.
pub fn squared_error_map(a: &[f32], b: &[f32], channels: usize, height: usize, width: usize) -> Result<ErrorMap> {
    let n = channels * height * width;
    if a.len() != n || b.len() != n || channels == 0 {
        return Err(Error::Input(format!(
            "error map inputs must both hold {channels}x{height}x{width} values"
        )));
    }
    let plane = height * width;
    let mut data = vec![0.0f64; plane];
    for c in 0..channels {
        for (i, d) in data.iter_mut().enumerate() {
            let e = a[c * plane + i] as f64 - b[c * plane + i] as f64;
            *d += e * e;
        }
    }
    data.iter_mut().for_each(|v| *v /= channels as f64);
    ErrorMap::new(height, width, data)
}

/// Appearance and flow error maps of one sample (planar `3 x H x W` slices).
pub fn squared_error_maps(
    frame: &[f32],
    recon: &[f32],
    flow: &[f32],
    pred_flow: &[f32],
    height: usize,
    width: usize,
) -> Result<(ErrorMap, ErrorMap)> {
    Ok((
        squared_error_map(frame, recon, 3, height, width)?,
        squared_error_map(flow, pred_flow, 3, height, width)?,
    ))
}

/// Top-left corner of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLocation {
    pub row: usize,
    pub col: usize,
}

fn check_patch(map: &ErrorMap, patch: usize) -> Result<()> {
    if patch == 0 || map.height < patch || map.width < patch {
        return Err(Error::Input(format!(
            "error map {}x{} is smaller than the {patch}x{patch} patch",
            map.height, map.width
        )));
    }
    Ok(())
}

/// Column sums over `patch` rows starting at `row`. Each window is summed in
/// the same order, so equal windows produce bit-equal sums.
fn column_sums(map: &ErrorMap, row: usize, patch: usize, out: &mut [f64]) {
    for (c, s) in out.iter_mut().enumerate() {
        *s = (row..row + patch).map(|r| map.at(r, c)).sum();
    }
}

fn row_window(colsums: &[f64], col: usize, patch: usize) -> f64 {
    colsums[col..col + patch].iter().sum()
}

/// Mean of `map` over the window at `loc`.
pub fn window_mean(map: &ErrorMap, loc: PatchLocation, patch: usize) -> Result<f64> {
    check_patch(map, patch)?;
    if loc.row + patch > map.height || loc.col + patch > map.width {
        return Err(Error::Input(format!("patch at ({}, {}) leaves the map", loc.row, loc.col)));
    }
    let mut cols = vec![0.0; map.width];
    column_sums(map, loc.row, patch, &mut cols);
    Ok(row_window(&cols, loc.col, patch) / (patch * patch) as f64)
}

/// Densest stride-1 window of `map`: its location and mean. Ties go to the
/// smallest row, then the smallest column.
pub fn max_patch(map: &ErrorMap, patch: usize) -> Result<(PatchLocation, f64)> {
    check_patch(map, patch)?;
    let mut cols = vec![0.0; map.width];
    let mut best = (PatchLocation { row: 0, col: 0 }, f64::NEG_INFINITY);
    for row in 0..=map.height - patch {
        column_sums(map, row, patch, &mut cols);
        for col in 0..=map.width - patch {
            let s = row_window(&cols, col, patch);
            if s > best.1 {
                best = (PatchLocation { row, col }, s);
            }
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Input("error map contains non-finite values".into()));
    }
    Ok((best.0, best.1 / (patch * patch) as f64))
}

/// Flow and appearance partial scores at one patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialScores {
    pub s_f: f64,
    pub s_i: f64,
}

pub fn partial_scores_at(
    e_i: &ErrorMap,
    e_f: &ErrorMap,
    loc: PatchLocation,
    patch: usize,
) -> Result<PartialScores> {
    if (e_i.height, e_i.width) != (e_f.height, e_f.width) {
        return Err(Error::Input("appearance and flow error maps differ in size".into()));
    }
    Ok(PartialScores {
        s_f: window_mean(e_f, loc, patch)?,
        s_i: window_mean(e_i, loc, patch)?,
    })
}

/// Selects the patch by flow error and reads both streams there.
pub fn patch_scores(e_i: &ErrorMap, e_f: &ErrorMap, patch: usize) -> Result<(PatchLocation, PartialScores)> {
    let (loc, _) = max_patch(e_f, patch)?;
    Ok((loc, partial_scores_at(e_i, e_f, loc, patch)?))
}

/// Reciprocals of the mean training partial scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub w_f: f64,
    pub w_i: f64,
}

impl ScoreWeights {
    pub fn fit(training: &[PartialScores]) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::Input("no training frames to calibrate on".into()));
        }
        let n = training.len() as f64;
        let mean_f = training.iter().map(|p| p.s_f).sum::<f64>() / n;
        let mean_i = training.iter().map(|p| p.s_i).sum::<f64>() / n;
        if !(mean_f.is_finite() && mean_i.is_finite()) {
            return Err(Error::Input("non-finite partial scores".into()));
        }
        if mean_f <= 0.0 {
            return Err(Error::DegenerateCalibration { stream: "flow" });
        }
        if mean_i <= 0.0 {
            return Err(Error::DegenerateCalibration { stream: "appearance" });
        }
        Ok(ScoreWeights {
            w_f: 1.0 / mean_f,
            w_i: 1.0 / mean_i,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_f.is_finite() && self.w_i.is_finite() && self.w_f > 0.0 && self.w_i > 0.0) {
            return Err(Error::Input("score weights must be finite and positive".into()));
        }
        Ok(())
    }
}

/// `log(w_F S_F) + lambda_s log(w_I S_I)` with both arguments floored at [`SCORE_EPS`].
pub fn frame_score(p: PartialScores, w: &ScoreWeights, lambda_s: f64) -> f64 {
    let motion = ln((w.w_f * p.s_f).max(SCORE_EPS));
    if lambda_s == 0.0 {
        return motion;
    }
    motion + lambda_s * ln((w.w_i * p.s_i).max(SCORE_EPS))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `(S - min) / (max - min)`, ordering-preserving for any sign.
    #[default]
    Minmax,
    /// `S / max`, which inverts the ordering of negative scores.
    Literal,
}

/// Normalizes one video's scores.
pub fn normalize_scores(scores: &[f64], mode: Normalization) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Input("cannot normalize an empty score sequence".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("non-finite frame score".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    match mode {
        Normalization::Minmax => {
            if max == min {
                return Ok(vec![0.5; scores.len()]);
            }
            Ok(scores.iter().map(|s| (s - min) / (max - min)).collect())
        }
        Normalization::Literal => {
            if max == 0.0 {
                return Err(Error::Undefined("literal normalization with a zero maximum"));
            }
            Ok(scores.iter().map(|s| s / max).collect())
        }
    }
}

/// Structural similarity settings: Gaussian window and stabilizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

fn gaussian_taps(window: usize, sigma: f64) -> Vec<f64> {
    let mid = (window as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - mid;
            exp(-d * d / (2.0 * sigma * sigma))
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of one plane.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            tmp[r * ow + c] = taps.iter().enumerate().map(|(j, t)| t * src[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = taps.iter().enumerate().map(|(i, t)| t * tmp[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM over every valid window position and channel.
pub fn ssim(a: &[f32], b: &[f32], channels: usize, height: usize, width: usize, params: &SsimParams) -> Result<f64> {
    let n = channels * height * width;
    if a.len() != n || b.len() != n || channels == 0 {
        return Err(Error::Input("ssim inputs must match the given shape".into()));
    }
    if height < params.window || width < params.window {
        return Err(Error::Input(format!(
            "ssim needs images of at least {0}x{0}",
            params.window
        )));
    }
    let taps = gaussian_taps(params.window, params.sigma);
    let c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
    let c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
    let plane = height * width;
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..channels {
        let x: Vec<f64> = a[c * plane..(c + 1) * plane].iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = b[c * plane..(c + 1) * plane].iter().map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(&x, height, width, &taps);
        let my = filter_valid(&y, height, width, &taps);
        let sxx = filter_valid(&xx, height, width, &taps);
        let syy = filter_valid(&yy, height, width, &taps);
        let sxy = filter_valid(&xy, height, width, &taps);
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        count += mx.len();
    }
    Ok(total / count as f64)
}

/// `1 - SSIM`: 0 for identical frames, larger when dissimilar.
pub fn ssim_score(a: &[f32], b: &[f32], channels: usize, height: usize, width: usize) -> Result<f64> {
    Ok(1.0 - ssim(a, b, channels, height, width, &SsimParams::default())?)
}
