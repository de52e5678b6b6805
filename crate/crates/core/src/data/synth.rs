//! Moving-sprite videos with exact flow and frame labels.
//!
//! Hard-edged sprites travel horizontally along lanes over a static textured
//! background. Normal sprites are squares moving right at `speed` px/frame.
//! Test videos additionally contain anomalous sprites: a larger circle, a
//! square moving left, or a square moving right at three times the speed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{FlowField, RawImage};
use crate::error::{Error, Result};
use crate::eval::{intervals_from_labels, EventInterval};
use crate::train::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub videos: usize,
    pub frames_per_video: usize,
    /// Target fraction of frames showing an anomalous sprite. Unset means
    /// 0 for the train split and [`DEFAULT_TEST_ANOMALY_RATE`] for test.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly_rate: Option<f64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            videos: 2,
            frames_per_video: 100,
            anomaly_rate: None,
        }
    }
}

pub const DEFAULT_TEST_ANOMALY_RATE: f64 = 0.3;

impl SplitSpec {
    pub fn rate(&self, test: bool) -> f64 {
        self.anomaly_rate
            .unwrap_or(if test { DEFAULT_TEST_ANOMALY_RATE } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub train: SplitSpec,
    pub test: SplitSpec,
    /// Square side in pixels; 0 picks `height / 8`.
    pub sprite_size: usize,
    /// Normal horizontal speed in pixels per frame.
    pub speed: i32,
    /// Per-frame chance that an empty lane launches a normal sprite.
    pub spawn_probability: f64,
    /// Random seed; overridden by the pipeline-wide seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            height: 128,
            width: 192,
            train: SplitSpec::default(),
            test: SplitSpec::default(),
            sprite_size: 0,
            speed: 2,
            spawn_probability: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpriteKind {
    Normal,
    Circle,
    Reverse,
    Fast,
}

impl SpriteKind {
    pub fn is_anomalous(self) -> bool {
        self != SpriteKind::Normal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub id: String,
    pub frames: Vec<RawImage>,
    /// `flows[t]` maps frame `t` to frame `t + 1`.
    pub flows: Vec<FlowField>,
    /// 1 where any anomalous sprite is visible; `None` for training videos.
    pub labels: Option<Vec<u8>>,
    pub events: Vec<EventInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: Vec<SynthVideo>,
    pub test: Vec<SynthVideo>,
}

const SQUARE_RGB: [u8; 3] = [215, 215, 200];
const CIRCLE_RGB: [u8; 3] = [215, 215, 200];

#[derive(Debug, Clone, Copy)]
struct Sprite {
    kind: SpriteKind,
    x: i32,
    y: i32,
    vx: i32,
    size: i32,
}

impl Sprite {
    fn covers(&self, row: i32, col: i32) -> bool {
        let (lx, ly) = (col - self.x, row - self.y);
        if lx < 0 || ly < 0 || lx >= self.size || ly >= self.size {
            return false;
        }
        if self.kind != SpriteKind::Circle {
            return true;
        }
        // pixel centres inside the inscribed disc
        let r2 = self.size * self.size;
        let (dx, dy) = (2 * lx + 1 - self.size, 2 * ly + 1 - self.size);
        dx * dx + dy * dy <= r2
    }

    fn gone(&self, width: i32) -> bool {
        (self.vx > 0 && self.x >= width) || (self.vx < 0 && self.x + self.size <= 0)
    }

    fn visible(&self, width: i32, height: i32) -> bool {
        self.x < width && self.x + self.size > 0 && self.y < height && self.y + self.size > 0
    }
}

struct Scene {
    height: i32,
    width: i32,
    size: i32,
    speed: i32,
    lanes: Vec<i32>,
    background: Vec<u8>,
}

impl Scene {
    fn new(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let (h, w) = (spec.height as i32, spec.width as i32);
        let size = if spec.sprite_size == 0 { (h / 8).max(2) } else { spec.sprite_size as i32 };
        // lanes leave room for the circle, which is 1.5x the square
        let pitch = 2 * size;
        let lanes = (0..(h / pitch).max(1)).map(|i| i * pitch + (pitch - size) / 2).collect();
        let mut background = vec![0u8; (h * w * 3) as usize];
        for r in 0..h {
            for c in 0..w {
                let base = 40 + (40 * r / h.max(1)) as u8;
                let i = ((r * w + c) * 3) as usize;
                background[i..i + 3].copy_from_slice(&[base, base + 8, base + 16]);
            }
        }
        // a few static structures
        for _ in 0..4 {
            let (bw, bh) = (rng.random_range(2..=(w / 12).max(2)), rng.random_range(h / 4..=h / 2));
            let (bx, by) = (rng.random_range(0..w - bw), rng.random_range(0..h - bh));
            let shade: u8 = rng.random_range(90..140);
            for r in by..by + bh {
                for c in bx..bx + bw {
                    let i = ((r * w + c) * 3) as usize;
                    background[i..i + 3].copy_from_slice(&[shade, shade, shade - 20]);
                }
            }
        }
        Scene {
            height: h,
            width: w,
            size,
            speed: spec.speed,
            lanes,
            background,
        }
    }

    fn sprite(&self, kind: SpriteKind, lane: usize) -> Sprite {
        let y = self.lanes[lane];
        match kind {
            SpriteKind::Normal => Sprite { kind, x: -self.size, y, vx: self.speed, size: self.size },
            SpriteKind::Fast => Sprite { kind, x: -self.size, y, vx: 3 * self.speed, size: self.size },
            SpriteKind::Reverse => Sprite { kind, x: self.width, y, vx: -self.speed, size: self.size },
            SpriteKind::Circle => {
                let size = self.size * 3 / 2;
                Sprite { kind, x: -size, y: y - (size - self.size) / 2, vx: self.speed, size }
            }
        }
    }

    fn transit_frames(&self, kind: SpriteKind) -> usize {
        let s = self.sprite(kind, 0);
        ((self.width + s.size) / s.vx.abs()).max(1) as usize
    }

    fn render(&self, sprites: &[Sprite]) -> (RawImage, FlowField) {
        let (h, w) = (self.height, self.width);
        let mut img = self.background.clone();
        let mut flow = FlowField::zeros(h as usize, w as usize);
        for s in sprites {
            let rgb = if s.kind == SpriteKind::Circle { CIRCLE_RGB } else { SQUARE_RGB };
            for r in s.y.max(0)..(s.y + s.size).min(h) {
                for c in s.x.max(0)..(s.x + s.size).min(w) {
                    if s.covers(r, c) {
                        let i = ((r * w + c) * 3) as usize;
                        img[i..i + 3].copy_from_slice(&rgb);
                        flow.set(r as usize, c as usize, s.vx as f32, 0.0);
                    }
                }
            }
        }
        let raw = RawImage::new(w as usize, h as usize, 3, img).expect("consistent size");
        (raw, flow)
    }
}

/// Planned anomalous sprite: launch frame, kind, lane.
struct Planned {
    start: usize,
    kind: SpriteKind,
    lane: usize,
}

fn plan_anomalies(scene: &Scene, frames: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<Planned> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let kinds = [SpriteKind::Circle, SpriteKind::Reverse, SpriteKind::Fast];
    let mut t = 0usize;
    let mut first = true;
    loop {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let d = scene.transit_frames(kind);
        let mean_gap = d as f64 * (1.0 - rate.min(1.0)) / rate;
        let gap = (mean_gap * rng.random_range(0.5..1.5)) as usize;
        t += if first { gap / 2 } else { gap };
        first = false;
        if t >= frames {
            break;
        }
        out.push(Planned {
            start: t,
            kind,
            lane: rng.random_range(0..scene.lanes.len()),
        });
        t += d;
    }
    out
}

fn simulate(scene: &Scene, spec: &SynthSpec, id: String, split: &SplitSpec, test: bool, rng: &mut ChaCha8Rng) -> SynthVideo {
    let n_lanes = scene.lanes.len();
    let mut lanes: Vec<Option<Sprite>> = vec![None; n_lanes];
    let plan = plan_anomalies(scene, split.frames_per_video, split.rate(test), rng);
    let warmup = (scene.width / scene.speed.max(1)) as usize;
    let mut next_plan = 0;
    let mut pending: Option<&Planned> = None;
    let mut frames = Vec::with_capacity(split.frames_per_video);
    let mut flows = Vec::with_capacity(split.frames_per_video);
    let mut labels = Vec::with_capacity(split.frames_per_video);

    for step in 0..warmup + split.frames_per_video {
        let t = step.checked_sub(warmup);

        if let Some(t) = t {
            if next_plan < plan.len() && plan[next_plan].start <= t && pending.is_none() {
                pending = Some(&plan[next_plan]);
                next_plan += 1;
            }
        }
        if let Some(p) = pending {
            if lanes[p.lane].is_none() {
                lanes[p.lane] = Some(scene.sprite(p.kind, p.lane));
                pending = None;
            }
        }
        for (i, lane) in lanes.iter_mut().enumerate() {
            let reserved = pending.is_some_and(|p| p.lane == i)
                || plan[next_plan..].first().is_some_and(|p| {
                    p.lane == i && t.is_some_and(|t| p.start <= t + scene.transit_frames(SpriteKind::Normal))
                });
            if lane.is_none() && !reserved && rng.random_bool(spec.spawn_probability) {
                *lane = Some(scene.sprite(SpriteKind::Normal, i));
            }
        }

        let sprites: Vec<Sprite> = lanes.iter().flatten().copied().collect();
        if t.is_some() {
            let (img, flow) = scene.render(&sprites);
            frames.push(img);
            flows.push(flow);
            let anomalous = sprites
                .iter()
                .any(|s| s.kind.is_anomalous() && s.visible(scene.width, scene.height));
            labels.push(anomalous as u8);
        }

        for lane in lanes.iter_mut() {
            if let Some(s) = lane {
                s.x += s.vx;
                if s.gone(scene.width) {
                    *lane = None;
                }
            }
        }
    }
    // the final frame has no successor
    flows.pop();

    let events = if test { intervals_from_labels(&id, &labels) } else { Vec::new() };
    SynthVideo {
        id,
        frames,
        flows,
        labels: test.then_some(labels),
        events,
    }
}

/// Generates train and test splits. Deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthDataset> {
    for (name, split, test) in [("train", &spec.train, false), ("test", &spec.test, true)] {
        if split.frames_per_video < 2 {
            return Err(Error::Config(format!("{name}: frames_per_video must be >= 2")));
        }
        if !(0.0..=1.0).contains(&split.rate(test)) {
            return Err(Error::Config(format!("{name}: anomaly_rate must lie in [0, 1]")));
        }
    }
    if spec.train.rate(false) > 0.0 {
        return Err(Error::Config("train split must not contain anomalies (anomaly_rate > 0)".into()));
    }
    if spec.height < 8 || spec.width < 8 || spec.speed <= 0 {
        return Err(Error::Config("synthetic frames must be at least 8x8 with positive speed".into()));
    }
    if !(0.0..=1.0).contains(&spec.spawn_probability) {
        return Err(Error::Config("spawn_probability must lie in [0, 1]".into()));
    }
    let mut scene_rng = seeded_rng(spec.seed, 10);
    let scene = Scene::new(spec, &mut scene_rng);
    if scene.size * 2 > scene.height {
        return Err(Error::Config("sprite_size too large for the frame height".into()));
    }
    let mut rng = seeded_rng(spec.seed, 11);
    let train = (0..spec.train.videos)
        .map(|i| simulate(&scene, spec, format!("train_{i:03}"), &spec.train, false, &mut rng))
        .collect();
    let test = (0..spec.test.videos)
        .map(|i| simulate(&scene, spec, format!("test_{i:03}"), &spec.test, true, &mut rng))
        .collect();
    Ok(SynthDataset { train, test })
}
