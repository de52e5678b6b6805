//! Brute-force reference implementations shared by the test targets.
#![allow(dead_code)]

use rand::Rng;

/// Bilinear sample of one channel with half-pixel centres and edge clamping,
/// evaluated independently per output pixel.
pub fn bilinear(src: &[f32], in_h: usize, in_w: usize, out_h: usize, out_w: usize, r: usize, c: usize) -> f64 {
    let coord = |o: usize, out_len: usize, in_len: usize| -> (usize, usize, f64) {
        let x = ((o as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5).clamp(0.0, (in_len - 1) as f64);
        let x0 = x.floor() as usize;
        let x1 = (x0 + 1).min(in_len - 1);
        (x0, x1, x - x0 as f64)
    };
    let (y0, y1, fy) = coord(r, out_h, in_h);
    let (x0, x1, fx) = coord(c, out_w, in_w);
    let at = |y: usize, x: usize| src[y * in_w + x] as f64;
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1))
}

/// Mean of every `patch x patch` window, scanning row-major; first strict maximum wins.
pub fn max_window(map: &[f64], h: usize, w: usize, patch: usize) -> ((usize, usize), f64) {
    let mut best = ((0, 0), f64::NEG_INFINITY);
    for r in 0..=h - patch {
        for c in 0..=w - patch {
            let m = window_mean(map, w, r, c, patch);
            if m > best.1 {
                best = ((r, c), m);
            }
        }
    }
    best
}

pub fn window_mean(map: &[f64], w: usize, r: usize, c: usize, patch: usize) -> f64 {
    let mut s = 0.0;
    for i in r..r + patch {
        for j in c..c + patch {
            s += map[i * w + j];
        }
    }
    s / (patch * patch) as f64
}

/// P(score_pos > score_neg) + 1/2 P(equal), by counting all pairs.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

/// Average precision: precision and recall recomputed from scratch at every
/// cut of the stable descending ranking.
pub fn ap_sweep(scores: &[f64], labels: &[u8]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // insertion sort: stable by construction
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && scores[order[j - 1]] < scores[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let total_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 1..=order.len() {
        let tp = order[..k].iter().filter(|&&i| labels[i] == 1).count() as f64;
        let recall = tp / total_pos;
        let precision = tp / k as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

fn above(seq: &[f64], a: usize, b: usize) -> bool {
    seq[a] > seq[b] || (seq[a] == seq[b] && a < b)
}

/// Local maxima with persistence from their definition: the peak minus the
/// higher of the two saddles on the way to the nearest higher point on each
/// side. A side without a higher point has no saddle; with none at all the
/// persistence is infinite.
pub fn persistence_exhaustive(seq: &[f64]) -> Vec<(usize, f64)> {
    let n = seq.len();
    let mut out = Vec::new();
    for i in 0..n {
        let is_max = (i == 0 || above(seq, i, i - 1)) && (i + 1 == n || above(seq, i, i + 1));
        if !is_max {
            continue;
        }
        let left = (0..i).rev().find(|&j| above(seq, j, i)).map(|j| seq[j..i].iter().cloned().fold(f64::INFINITY, f64::min));
        let right = (i + 1..n).find(|&j| above(seq, j, i)).map(|j| seq[i + 1..=j].iter().cloned().fold(f64::INFINITY, f64::min));
        let saddle = match (left, right) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        out.push((i, saddle.map_or(f64::INFINITY, |s| seq[i] - s)));
    }
    out
}

pub fn detect_exhaustive(seq: &[f64], threshold: f64, merge: usize) -> Vec<usize> {
    let maxima = persistence_exhaustive(seq);
    maxima
        .iter()
        .filter(|&&(_, p)| p >= threshold)
        .map(|&(i, _)| i)
        .filter(|&i| !maxima.iter().any(|&(j, _)| j != i && i.abs_diff(j) < merge && above(seq, j, i)))
        .collect()
}

/// Mean SSIM with an explicitly built 2D Gaussian window evaluated at every
/// valid position.
pub fn ssim_direct(a: &[f32], b: &[f32], channels: usize, h: usize, w: usize) -> f64 {
    let k = 11usize;
    let sigma = 1.5f64;
    let mut win = vec![0.0f64; k * k];
    for i in 0..k {
        for j in 0..k {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i * k + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let s: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= s);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for ch in 0..channels {
        let off = ch * h * w;
        for r in 0..=h - k {
            for c in 0..=w - k {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        let g = win[i * k + j];
                        let x = a[off + (r + i) * w + c + j] as f64;
                        let y = b[off + (r + i) * w + c + j] as f64;
                        mx += g * x;
                        my += g * y;
                        sxx += g * x * x;
                        syy += g * y * y;
                        sxy += g * x * y;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Norm-wise relative error between an analytic and a numeric gradient.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x`, using the perturbation actually
/// representable in f32.
pub fn central_diff(x: &[f32], h: f32, mut f: impl FnMut(&[f32]) -> f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xs[i];
            xs[i] = orig + h;
            let up = xs[i];
            let fp = f(&xs);
            xs[i] = orig - h;
            let down = xs[i];
            let fm = f(&xs);
            xs[i] = orig;
            (fp - fm) / (up as f64 - down as f64)
        })
        .collect()
}

pub fn uniform_vec<R: Rng>(rng: &mut R, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// The six loss terms whose gradients are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Intensity,
    Gradient,
    Appearance,
    Flow,
    Discriminator,
    Generator,
}

pub const LOSS_TERMS: [LossTerm; 6] = [
    LossTerm::Intensity,
    LossTerm::Gradient,
    LossTerm::Appearance,
    LossTerm::Flow,
    LossTerm::Discriminator,
    LossTerm::Generator,
];

const FD_STEP: f32 = 1e-3;

fn kink_free_gradients(t: &[f32], p: &[f32], s: amc_core::Shape, margin: f64) -> bool {
    let planes = s.n * s.c;
    for pl in 0..planes {
        let base = pl * s.h * s.w;
        for i in 0..s.h {
            for j in 0..s.w {
                for (di, dj) in [(0, 1), (1, 0)] {
                    if i + di >= s.h || j + dj >= s.w {
                        continue;
                    }
                    let (a, b) = (base + i * s.w + j, base + (i + di) * s.w + j + dj);
                    let gp = p[b] as f64 - p[a] as f64;
                    let gt = t[b] as f64 - t[a] as f64;
                    if gp.abs() < margin || (gp.abs() - gt.abs()).abs() < margin {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn kink_free_l1(t: &[f32], p: &[f32], margin: f64) -> bool {
    t.iter().zip(p).all(|(a, b)| (*a as f64 - *b as f64).abs() >= margin)
}

fn random_shape<R: Rng>(rng: &mut R) -> amc_core::Shape {
    amc_core::Shape::new(rng.random_range(1..=2), rng.random_range(1..=3), rng.random_range(2..=5), rng.random_range(2..=5))
}

/// Random inputs away from the l1 kinks, as (target, prediction) pairs.
fn sample_pair<R: Rng>(rng: &mut R, grad_kinks: bool, l1_kinks: bool) -> (amc_core::Tensor, amc_core::Tensor) {
    let margin = 3.0 * FD_STEP as f64;
    loop {
        let s = random_shape(rng);
        let t = uniform_vec(rng, s.numel(), 0.0, 1.0);
        let p = uniform_vec(rng, s.numel(), 0.0, 1.0);
        if grad_kinks && !kink_free_gradients(&t, &p, s, margin) {
            continue;
        }
        if l1_kinks && !kink_free_l1(&t, &p, margin) {
            continue;
        }
        return (
            amc_core::Tensor::from_vec(s, t).unwrap(),
            amc_core::Tensor::from_vec(s, p).unwrap(),
        );
    }
}

fn probabilities<R: Rng>(rng: &mut R) -> amc_core::Tensor {
    let s = random_shape(rng);
    amc_core::Tensor::from_vec(s, uniform_vec(rng, s.numel(), 0.05, 0.95)).unwrap()
}

fn as_f64(t: &amc_core::Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

fn with(t: &amc_core::Tensor, data: &[f32]) -> amc_core::Tensor {
    amc_core::Tensor::from_vec(t.shape(), data.to_vec()).unwrap()
}

/// Relative error of the analytic gradient against central differences for
/// one random instance of `term`.
pub fn loss_gradient_error<R: Rng>(term: LossTerm, rng: &mut R) -> f64 {
    use amc_core::losses::*;
    let red = if rng.random_bool(0.5) { Reduction::Mean } else { Reduction::Sum };
    let h = FD_STEP;
    match term {
        LossTerm::Intensity | LossTerm::Gradient | LossTerm::Appearance => {
            let (t, p) = sample_pair(rng, term != LossTerm::Intensity, false);
            type F = fn(&amc_core::Tensor, &amc_core::Tensor, Reduction) -> amc_core::Result<f64>;
            type G = fn(&amc_core::Tensor, &amc_core::Tensor, Reduction) -> amc_core::Result<(f64, amc_core::Tensor)>;
            let (f, g): (F, G) = match term {
                LossTerm::Intensity => (intensity_loss, intensity_loss_grad),
                LossTerm::Gradient => (gradient_loss, gradient_loss_grad),
                _ => (appearance_loss, appearance_loss_grad),
            };
            let (_, grad) = g(&t, &p, red).unwrap();
            let num = central_diff(p.data(), h, |x| f(&t, &with(&p, x), red).unwrap());
            rel_error(&as_f64(&grad), &num)
        }
        LossTerm::Flow => {
            let (t, p) = sample_pair(rng, false, true);
            let (_, grad) = flow_loss_grad(&t, &p, red).unwrap();
            let num = central_diff(p.data(), h, |x| flow_loss(&t, &with(&p, x), red).unwrap());
            rel_error(&as_f64(&grad), &num)
        }
        LossTerm::Discriminator => {
            let real = probabilities(rng);
            let fake = probabilities(rng);
            let (_, gr, gf) = discriminator_loss_grad(&real, &fake, red).unwrap();
            let mut analytic = as_f64(&gr);
            analytic.extend(as_f64(&gf));
            let mut num = central_diff(real.data(), h, |x| discriminator_loss(&with(&real, x), &fake, red).unwrap());
            num.extend(central_diff(fake.data(), h, |x| discriminator_loss(&real, &with(&fake, x), red).unwrap()));
            rel_error(&analytic, &num)
        }
        LossTerm::Generator => {
            let (frame, pred_frame) = sample_pair(rng, true, false);
            let (flow, pred_flow) = sample_pair(rng, false, true);
            let d_fake = probabilities(rng);
            let w = LossWeights {
                lambda_g: rng.random_range(0.1..1.0),
                lambda_a: rng.random_range(0.1..2.0),
                lambda_f: rng.random_range(0.1..3.0),
            };
            let eval = |pf: &amc_core::Tensor, pl: &amc_core::Tensor, d: &amc_core::Tensor| {
                let inputs = GeneratorLossInputs { frame: &frame, pred_frame: pf, flow: &flow, pred_flow: pl, d_fake: d };
                generator_loss(&inputs, &w, red).unwrap().total
            };
            let inputs = GeneratorLossInputs {
                frame: &frame,
                pred_frame: &pred_frame,
                flow: &flow,
                pred_flow: &pred_flow,
                d_fake: &d_fake,
            };
            let (_, grad) = generator_loss_grad(&inputs, &w, red).unwrap();
            let mut analytic = as_f64(&grad.frame);
            analytic.extend(as_f64(&grad.flow));
            analytic.extend(as_f64(&grad.d_fake));
            let mut num = central_diff(pred_frame.data(), h, |x| eval(&with(&pred_frame, x), &pred_flow, &d_fake));
            num.extend(central_diff(pred_flow.data(), h, |x| eval(&pred_frame, &with(&pred_flow, x), &d_fake)));
            num.extend(central_diff(d_fake.data(), h, |x| eval(&pred_frame, &pred_flow, &with(&d_fake, x))));
            rel_error(&analytic, &num)
        }
    }
}
