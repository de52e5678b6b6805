//! Training, calibration, scoring and evaluation over whole datasets.

use std::collections::HashMap;

use amc_core::data::BatchPlan;
use amc_core::eval::{self, EvalReport, EventCounts, EventInterval};
use amc_core::model::Generator;
use amc_core::scoring::{self, PartialScores, PatchLocation, ScoreWeights};
use amc_core::train::{StepLog, TrainState};
use amc_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::config::{EvalConfig, PipelineConfig, ScoringConfig};
use crate::dataset::Dataset;
use crate::error::{AmcError, Result};
use crate::formats::LabelRow;

/// Per-epoch means of the step losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    #[serde(rename = "loss_D")]
    pub loss_d: f64,
    #[serde(rename = "loss_G")]
    pub loss_g: f64,
    pub loss_adv: f64,
    pub loss_appe: f64,
    pub loss_flow: f64,
}

pub fn new_state(cfg: &PipelineConfig) -> Result<TrainState> {
    Ok(TrainState::new(
        cfg.model.generator.clone(),
        cfg.model.discriminator.clone(),
        &cfg.train,
        cfg.loss.weights(),
        cfg.loss.reduction,
        cfg.seed,
    )?)
}

/// Runs `cfg.train.epochs` epochs (numbered from 1). `on_epoch` sees the
/// state after each epoch, e.g. to write checkpoints.
pub fn train(
    state: &mut TrainState,
    data: &Dataset,
    cfg: &PipelineConfig,
    mut on_epoch: impl FnMut(&TrainState, &EpochLog) -> Result<()>,
) -> Result<Vec<EpochLog>> {
    let pairs = data.pairs();
    if pairs.is_empty() {
        return Err(AmcError::Data("training set has no (frame, flow) pairs".into()));
    }
    if data.videos.iter().any(|v| v.labels.as_ref().is_some_and(|l| l.iter().any(|&x| x != 0))) {
        return Err(AmcError::Data("training videos must not contain anomalous frames".into()));
    }
    let plan = BatchPlan::new(pairs.len(), cfg.train.batch_size, cfg.train.shuffle, cfg.seed)?;
    let mut logs = Vec::with_capacity(cfg.train.epochs);
    for epoch in 1..=cfg.train.epochs {
        let mut sum = StepLog::default();
        let batches = plan.batches(epoch as u64);
        for idx in &batches {
            let chosen: Vec<(usize, usize)> = idx.iter().map(|&i| pairs[i]).collect();
            let (frames, flows) = data.batch(&chosen)?;
            let s = state.train_step(&frames, &flows)?;
            sum.loss_d += s.loss_d;
            sum.loss_g += s.loss_g;
            sum.adversarial += s.adversarial;
            sum.appearance += s.appearance;
            sum.flow += s.flow;
        }
        let n = batches.len() as f64;
        let log = EpochLog {
            epoch,
            loss_d: sum.loss_d / n,
            loss_g: sum.loss_g / n,
            loss_adv: sum.adversarial / n,
            loss_appe: sum.appearance / n,
            loss_flow: sum.flow / n,
        };
        on_epoch(state, &log)?;
        logs.push(log);
    }
    Ok(logs)
}

/// Eval-mode statistics of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub location: PatchLocation,
    pub partial: PartialScores,
    /// `1 - SSIM` between the frame and its reconstruction.
    pub ssim_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoStats {
    pub id: String,
    /// One entry per frame that has a flow.
    pub frames: Vec<FrameStats>,
}

/// Runs eval-mode inference over every `(frame, flow)` pair.
pub fn analyze(generator: &Generator, data: &Dataset, patch: usize, batch_size: usize) -> Result<Vec<VideoStats>> {
    let (h, w) = (generator.config().height, generator.config().width);
    let mut out = Vec::with_capacity(data.videos.len());
    for (v, video) in data.videos.iter().enumerate() {
        let mut frames = Vec::with_capacity(video.flows.len());
        let pairs: Vec<(usize, usize)> = (0..video.flows.len()).map(|t| (v, t)).collect();
        for chunk in pairs.chunks(batch_size.max(1)) {
            let (x, f) = data.batch(chunk)?;
            let pred = generator.infer(&x)?;
            if !pred.frame.all_finite() || !pred.flow.all_finite() {
                return Err(amc_core::Error::NonFinite { component: "inference", step: 0 }.into());
            }
            for n in 0..chunk.len() {
                frames.push(frame_stats(&x, &f, &pred.frame, &pred.flow, n, h, w, patch)?);
            }
        }
        out.push(VideoStats { id: video.id.clone(), frames });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn frame_stats(
    x: &Tensor,
    f: &Tensor,
    x_hat: &Tensor,
    f_hat: &Tensor,
    n: usize,
    h: usize,
    w: usize,
    patch: usize,
) -> Result<FrameStats> {
    let (e_i, e_f) = scoring::squared_error_maps(x.sample(n), x_hat.sample(n), f.sample(n), f_hat.sample(n), h, w)?;
    let (location, partial) = scoring::patch_scores(&e_i, &e_f, patch)?;
    let ssim_score = scoring::ssim_score(x.sample(n), x_hat.sample(n), 3, h, w)?;
    Ok(FrameStats { location, partial, ssim_score })
}

/// Calibrates the score weights on training statistics.
pub fn fit_weights(stats: &[VideoStats]) -> Result<ScoreWeights> {
    let partials: Vec<PartialScores> = stats.iter().flat_map(|v| v.frames.iter().map(|f| f.partial)).collect();
    Ok(ScoreWeights::fit(&partials)?)
}

pub fn fit_score_weights(generator: &Generator, data: &Dataset, scoring: &ScoringConfig) -> Result<ScoreWeights> {
    fit_weights(&analyze(generator, data, scoring.patch, scoring.batch_size)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMethod {
    /// Weighted log combination of both streams at the worst flow patch.
    Patch,
    /// `1 - SSIM` of the reconstruction (appearance stream only).
    Ssim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub video_id: String,
    pub frame_index: usize,
    pub score_raw: f64,
    pub score_norm: f64,
    pub patch_row: usize,
    pub patch_col: usize,
    pub s_f: f64,
    pub s_i: f64,
}

/// Frame scores with per-video normalization. Patch scoring needs weights.
pub fn score_records(
    stats: &[VideoStats],
    weights: Option<&ScoreWeights>,
    scoring: &ScoringConfig,
    method: ScoreMethod,
) -> Result<Vec<ScoreRecord>> {
    let weights = match (method, weights) {
        (ScoreMethod::Patch, None) => {
            return Err(AmcError::Data("patch scoring needs calibrated score weights".into()));
        }
        (_, w) => w.copied(),
    };
    if let Some(w) = &weights {
        w.validate()?;
    }
    let mut out = Vec::new();
    for video in stats {
        if video.frames.is_empty() {
            continue;
        }
        let raw: Vec<f64> = video
            .frames
            .iter()
            .map(|f| match method {
                ScoreMethod::Patch => scoring::frame_score(f.partial, weights.as_ref().expect("checked"), scoring.lambda_s),
                ScoreMethod::Ssim => f.ssim_score,
            })
            .collect();
        let norm = scoring::normalize_scores(&raw, scoring.normalization)?;
        for (t, f) in video.frames.iter().enumerate() {
            out.push(ScoreRecord {
                video_id: video.id.clone(),
                frame_index: t,
                score_raw: raw[t],
                score_norm: norm[t],
                patch_row: f.location.row,
                patch_col: f.location.col,
                s_f: f.partial.s_f,
                s_i: f.partial.s_i,
            });
        }
    }
    Ok(out)
}

pub fn score_dataset(
    generator: &Generator,
    weights: Option<&ScoreWeights>,
    data: &Dataset,
    scoring: &ScoringConfig,
    method: ScoreMethod,
) -> Result<Vec<ScoreRecord>> {
    let stats = analyze(generator, data, scoring.patch, scoring.batch_size)?;
    score_records(&stats, weights, scoring, method)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalMode {
    FrameAuc,
    FrameAp,
    Event,
}

/// Normalized scores paired with their frame labels.
pub fn join_labels(records: &[ScoreRecord], labels: &[LabelRow]) -> Result<(Vec<f64>, Vec<u8>)> {
    let map: HashMap<(&str, usize), u8> = labels
        .iter()
        .map(|r| ((r.video_id.as_str(), r.frame_index), r.label))
        .collect();
    let mut scores = Vec::with_capacity(records.len());
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let l = map
            .get(&(r.video_id.as_str(), r.frame_index))
            .ok_or_else(|| AmcError::Data(format!("no label for {} frame {}", r.video_id, r.frame_index)))?;
        scores.push(r.score_norm);
        out.push(*l);
    }
    Ok((scores, out))
}

pub fn frame_report(records: &[ScoreRecord], labels: &[LabelRow], mode: EvalMode) -> Result<EvalReport> {
    let (scores, labels) = join_labels(records, labels)?;
    Ok(match mode {
        EvalMode::FrameAuc => {
            let (auc, curve) = eval::roc_auc(&scores, &labels)?;
            EvalReport::FrameAuc { auc, curve }
        }
        EvalMode::FrameAp => {
            let (ap, curve) = eval::pr_ap(&scores, &labels)?;
            EvalReport::FrameAp { ap, curve }
        }
        EvalMode::Event => return Err(AmcError::Data("event mode needs event intervals, not frame labels".into())),
    })
}

/// Persistence maxima of each video's normalized scores matched against its events.
pub fn event_report(records: &[ScoreRecord], events: &[EventInterval], cfg: &EvalConfig) -> Result<EvalReport> {
    let mut by_video: Vec<(&str, Vec<&ScoreRecord>)> = Vec::new();
    for r in records {
        match by_video.iter_mut().find(|(id, _)| *id == r.video_id) {
            Some((_, v)) => v.push(r),
            None => by_video.push((&r.video_id, vec![r])),
        }
    }
    let mut counts = EventCounts::default();
    for (id, mut recs) in by_video {
        recs.sort_by_key(|r| r.frame_index);
        let seq: Vec<f64> = recs.iter().map(|r| r.score_norm).collect();
        let peaks = eval::detect_events(&seq, cfg.persistence_threshold, cfg.merge_distance)?;
        let frames: Vec<usize> = peaks.iter().map(|&i| recs[i].frame_index).collect();
        let mine: Vec<EventInterval> = events.iter().filter(|e| e.video_id == id).cloned().collect();
        counts += eval::match_events(&frames, &mine);
    }
    // Events of videos without any score are missed.
    counts.total_events = events.len();
    Ok(EvalReport::Event { counts })
}

/// `key = value` lines.
pub fn report_text(report: &EvalReport) -> String {
    match report {
        EvalReport::FrameAuc { auc, curve } => format!("mode = \"frame-auc\"\nauc = {auc}\ncurve_points = {}\n", curve.len()),
        EvalReport::FrameAp { ap, curve } => format!("mode = \"frame-ap\"\nap = {ap}\ncurve_points = {}\n", curve.len()),
        EvalReport::Event { counts } => format!(
            "mode = \"event\"\ntrue_positives = {}\nfalse_alarms = {}\ntotal_events = {}\n",
            counts.true_positives, counts.false_alarms, counts.total_events
        ),
    }
}
