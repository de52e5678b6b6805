//! Training objectives and their gradients w.r.t. the predicted argument.
//!
//! All reductions default to per-element means so loss weights do not depend
//! on resolution; [`Reduction::Sum`] gives the literal summed forms.

use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ln;
use crate::tensor::Tensor;

/// Lower clamp inside `-log(.)` for discriminator probabilities.
pub const LOG_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

impl Reduction {
    fn scale(self, count: usize) -> f64 {
        match self {
            Reduction::Mean => 1.0 / count as f64,
            Reduction::Sum => 1.0,
        }
    }
}

/// Weights of the adversarial, appearance and flow terms of the generator objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_g: f64,
    pub lambda_a: f64,
    pub lambda_f: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_g: 0.25,
            lambda_a: 1.0,
            lambda_f: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_g", self.lambda_g), ("lambda_a", self.lambda_a), ("lambda_f", self.lambda_f)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(alloc::format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn signum(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Squared l2 distance between a frame and its reconstruction.
pub fn intensity_loss(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<f64> {
    same_shape("intensity_loss", target, pred)?;
    let s: f64 = target
        .data()
        .iter()
        .zip(pred.data())
        .map(|(a, b)| {
            let d = *a as f64 - *b as f64;
            d * d
        })
        .sum();
    Ok(s * red.scale(target.len()))
}

pub fn intensity_loss_grad(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<(f64, Tensor)> {
    let value = intensity_loss(target, pred, red)?;
    let k = 2.0 * red.scale(target.len());
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, a), b) in grad.data_mut().iter_mut().zip(target.data()).zip(pred.data()) {
        *g = (k * (*b as f64 - *a as f64)) as f32;
    }
    Ok((value, grad))
}

/// l1 distance between absolute forward-difference gradients along x and y.
/// The difference maps are one pixel shorter along their axis (no padding).
pub fn gradient_loss(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<f64> {
    gradient_loss_impl(target, pred, red, None)
}

pub fn gradient_loss_grad(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<(f64, Tensor)> {
    let mut grad = Tensor::zeros(pred.shape());
    let value = gradient_loss_impl(target, pred, red, Some(&mut grad))?;
    Ok((value, grad))
}

fn gradient_loss_impl(target: &Tensor, pred: &Tensor, red: Reduction, grad: Option<&mut Tensor>) -> Result<f64> {
    same_shape("gradient_loss", target, pred)?;
    let s = target.shape();
    if s.h < 2 || s.w < 2 {
        return Err(Error::Input(alloc::format!(
            "gradient loss needs at least 2x2 images, got {}x{}",
            s.h,
            s.w
        )));
    }
    let planes = s.n * s.c;
    let (t, p) = (target.data(), pred.data());
    let mut acc = vec![0.0f64; pred.len()];
    let mut total = 0.0;
    // (step between neighbours, count of difference terms)
    for (step, count) in [(1usize, planes * s.h * (s.w - 1)), (s.w, planes * (s.h - 1) * s.w)] {
        let k = red.scale(count);
        let mut sum = 0.0;
        for plane in 0..planes {
            let base = plane * s.plane();
            for i in 0..s.h {
                for j in 0..s.w {
                    if (step == 1 && j + 1 >= s.w) || (step != 1 && i + 1 >= s.h) {
                        continue;
                    }
                    let a = base + i * s.w + j;
                    let b = a + step;
                    let gt = t[b] as f64 - t[a] as f64;
                    let gp = p[b] as f64 - p[a] as f64;
                    let diff = gp.abs() - gt.abs();
                    sum += diff.abs();
                    if grad.is_some() {
                        let g = k * signum(diff) * signum(gp);
                        acc[b] += g;
                        acc[a] -= g;
                    }
                }
            }
        }
        total += sum * k;
    }
    if let Some(grad) = grad {
        for (g, a) in grad.data_mut().iter_mut().zip(&acc) {
            *g = *a as f32;
        }
    }
    Ok(total)
}

/// Intensity plus gradient loss.
pub fn appearance_loss(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<f64> {
    Ok(intensity_loss(target, pred, red)? + gradient_loss(target, pred, red)?)
}

pub fn appearance_loss_grad(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<(f64, Tensor)> {
    let (a, mut ga) = intensity_loss_grad(target, pred, red)?;
    let (b, gb) = gradient_loss_grad(target, pred, red)?;
    ga.add_assign(&gb);
    Ok((a + b, ga))
}

/// l1 distance over all flow channels, magnitude included.
pub fn flow_loss(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<f64> {
    same_shape("flow_loss", target, pred)?;
    let s: f64 = target
        .data()
        .iter()
        .zip(pred.data())
        .map(|(a, b)| (*a as f64 - *b as f64).abs())
        .sum();
    Ok(s * red.scale(target.len()))
}

pub fn flow_loss_grad(target: &Tensor, pred: &Tensor, red: Reduction) -> Result<(f64, Tensor)> {
    let value = flow_loss(target, pred, red)?;
    let k = red.scale(target.len());
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, a), b) in grad.data_mut().iter_mut().zip(target.data()).zip(pred.data()) {
        *g = (k * signum(*b as f64 - *a as f64)) as f32;
    }
    Ok((value, grad))
}

fn check_probabilities(op: &'static str, t: &Tensor) -> Result<()> {
    if !t.all_finite() {
        return Err(Error::Input(alloc::format!("{op}: non-finite discriminator output")));
    }
    Ok(())
}

#[inline]
fn clamp_prob(p: f32) -> (f64, bool) {
    let p = p as f64;
    let c = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    (c, c == p)
}

/// `-log D` averaged (or summed) over every unit of the map.
pub fn adversarial_loss(d_fake: &Tensor, red: Reduction) -> Result<f64> {
    Ok(adversarial_loss_grad(d_fake, red)?.0)
}

pub fn adversarial_loss_grad(d_fake: &Tensor, red: Reduction) -> Result<(f64, Tensor)> {
    check_probabilities("adversarial_loss", d_fake)?;
    let k = red.scale(d_fake.len());
    let mut grad = Tensor::zeros(d_fake.shape());
    let mut sum = 0.0;
    for (g, &p) in grad.data_mut().iter_mut().zip(d_fake.data()) {
        let (c, interior) = clamp_prob(p);
        sum -= ln(c);
        if interior {
            *g = (-k / c) as f32;
        }
    }
    Ok((sum * k, grad))
}

/// `1/2 (-log D(I, F)) + 1/2 (-log(1 - D(I, F')))`, each reduced over its map.
pub fn discriminator_loss(d_real: &Tensor, d_fake: &Tensor, red: Reduction) -> Result<f64> {
    Ok(discriminator_loss_grad(d_real, d_fake, red)?.0)
}

/// Returns the loss and its gradients w.r.t. the real and fake maps.
pub fn discriminator_loss_grad(d_real: &Tensor, d_fake: &Tensor, red: Reduction) -> Result<(f64, Tensor, Tensor)> {
    check_probabilities("discriminator_loss", d_real)?;
    check_probabilities("discriminator_loss", d_fake)?;
    let (kr, kf) = (0.5 * red.scale(d_real.len()), 0.5 * red.scale(d_fake.len()));
    let mut g_real = Tensor::zeros(d_real.shape());
    let mut g_fake = Tensor::zeros(d_fake.shape());
    let mut real = 0.0;
    for (g, &p) in g_real.data_mut().iter_mut().zip(d_real.data()) {
        let (c, interior) = clamp_prob(p);
        real -= ln(c);
        if interior {
            *g = (-kr / c) as f32;
        }
    }
    let mut fake = 0.0;
    for (g, &p) in g_fake.data_mut().iter_mut().zip(d_fake.data()) {
        let (c, interior) = clamp_prob(p);
        fake -= ln(1.0 - c);
        if interior {
            *g = (kf / (1.0 - c)) as f32;
        }
    }
    let value = kr * real + kf * fake;
    if !value.is_finite() {
        return Err(Error::NonFinite {
            component: "loss_d",
            step: 0,
        });
    }
    Ok((value, g_real, g_fake))
}

/// Unweighted parts of the generator objective plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss {
    pub total: f64,
    pub adversarial: f64,
    pub appearance: f64,
    pub flow: f64,
}

/// Gradients of the weighted generator objective.
#[derive(Debug, Clone)]
pub struct GeneratorLossGrad {
    pub frame: Tensor,
    pub flow: Tensor,
    pub d_fake: Tensor,
}

pub struct GeneratorLossInputs<'a> {
    pub frame: &'a Tensor,
    pub pred_frame: &'a Tensor,
    pub flow: &'a Tensor,
    pub pred_flow: &'a Tensor,
    /// Discriminator output on (frame, predicted flow).
    pub d_fake: &'a Tensor,
}

pub fn generator_loss(x: &GeneratorLossInputs<'_>, w: &LossWeights, red: Reduction) -> Result<GeneratorLoss> {
    let adversarial = adversarial_loss(x.d_fake, red)?;
    let appearance = appearance_loss(x.frame, x.pred_frame, red)?;
    let flow = flow_loss(x.flow, x.pred_flow, red)?;
    Ok(GeneratorLoss {
        total: w.lambda_g * adversarial + w.lambda_a * appearance + w.lambda_f * flow,
        adversarial,
        appearance,
        flow,
    })
}

pub fn generator_loss_grad(
    x: &GeneratorLossInputs<'_>,
    w: &LossWeights,
    red: Reduction,
) -> Result<(GeneratorLoss, GeneratorLossGrad)> {
    let (adversarial, mut g_d) = adversarial_loss_grad(x.d_fake, red)?;
    let (appearance, mut g_frame) = appearance_loss_grad(x.frame, x.pred_frame, red)?;
    let (flow, mut g_flow) = flow_loss_grad(x.flow, x.pred_flow, red)?;
    scale(&mut g_d, w.lambda_g);
    scale(&mut g_frame, w.lambda_a);
    scale(&mut g_flow, w.lambda_f);
    let loss = GeneratorLoss {
        total: w.lambda_g * adversarial + w.lambda_a * appearance + w.lambda_f * flow,
        adversarial,
        appearance,
        flow,
    };
    Ok((
        loss,
        GeneratorLossGrad {
            frame: g_frame,
            flow: g_flow,
            d_fake: g_d,
        },
    ))
}

fn scale(t: &mut Tensor, k: f64) {
    t.data_mut().iter_mut().for_each(|v| *v = (*v as f64 * k) as f32);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use alloc::vec::Vec;

    fn t(shape: Shape, v: Vec<f32>) -> Tensor {
        Tensor::from_vec(shape, v).unwrap()
    }

    #[test]
    fn intensity_examples() {
        let a = t(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]);
        let b = t(Shape::new(1, 1, 1, 2), vec![0.0, 0.5]);
        assert_eq!(intensity_loss(&a, &a, Reduction::Mean).unwrap(), 0.0);
        assert!((intensity_loss(&a, &b, Reduction::Mean).unwrap() - 0.125).abs() < 1e-12);
        assert_eq!(
            intensity_loss(&a, &b, Reduction::Mean).unwrap(),
            intensity_loss(&b, &a, Reduction::Mean).unwrap()
        );
        assert!((intensity_loss(&a, &b, Reduction::Sum).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gradient_loss_examples() {
        let a = t(Shape::new(1, 1, 2, 2), vec![0.0, 1.0, 0.0, 1.0]);
        let z = Tensor::zeros(a.shape());
        assert_eq!(gradient_loss(&a, &a, Reduction::Mean).unwrap(), 0.0);
        assert!((gradient_loss(&a, &z, Reduction::Mean).unwrap() - 1.0).abs() < 1e-12);
        let c1 = Tensor::full(Shape::new(1, 3, 4, 5), 0.2);
        let c2 = Tensor::full(Shape::new(1, 3, 4, 5), 0.9);
        assert_eq!(gradient_loss(&c1, &c2, Reduction::Mean).unwrap(), 0.0);
        assert!((appearance_loss(&a, &z, Reduction::Mean).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_loss_needs_two_pixels_per_axis() {
        let a = Tensor::zeros(Shape::new(1, 1, 1, 4));
        assert!(matches!(gradient_loss(&a, &a, Reduction::Mean), Err(Error::Input(_))));
    }

    #[test]
    fn flow_loss_uniform_offset() {
        let a = Tensor::full(Shape::new(2, 3, 4, 4), 1.0);
        let b = Tensor::zeros(a.shape());
        assert_eq!(flow_loss(&a, &a, Reduction::Mean).unwrap(), 0.0);
        assert!((flow_loss(&a, &b, Reduction::Mean).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discriminator_loss_at_one_half_is_ln2() {
        let h = Tensor::full(Shape::new(1, 4, 2, 3), 0.5);
        let v = discriminator_loss(&h, &h, Reduction::Mean).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_discriminator_has_near_zero_loss() {
        let real = Tensor::full(Shape::new(1, 2, 2, 2), 1.0);
        let fake = Tensor::full(Shape::new(1, 2, 2, 2), 0.0);
        let v = discriminator_loss(&real, &fake, Reduction::Mean).unwrap();
        assert!(v.is_finite() && v < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Tensor::zeros(Shape::new(1, 3, 4, 4));
        let b = Tensor::zeros(Shape::new(1, 3, 4, 5));
        assert!(matches!(flow_loss(&a, &b, Reduction::Mean), Err(Error::Shape { .. })));
        assert!(matches!(intensity_loss(&a, &b, Reduction::Mean), Err(Error::Shape { .. })));
    }
}
