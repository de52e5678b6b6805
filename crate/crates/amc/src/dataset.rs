//! Video datasets in memory and on disk.
//!
//! Layout: `DIR/{train,test}/<video_id>/frame_%06d.png` with
//! `flow_%06d.amcf` for every frame but the last (the flow from frame `t` to
//! `t + 1`), plus `DIR/labels.csv` and `DIR/events.csv` for the test split.

use std::fs;
use std::path::{Path, PathBuf};

use amc_core::data::{preprocess_frame, resize_bilinear, FlowField, FrameTensor, SynthDataset, SynthVideo};
use amc_core::eval::EventInterval;
use amc_core::Tensor;

use crate::error::{AmcError, Result};
use crate::formats::{self, LabelRow};

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: String,
    pub frames: Vec<FrameTensor>,
    /// `flows[t]` is the flow from frame `t` to `t + 1`.
    pub flows: Vec<FlowField>,
    pub labels: Option<Vec<u8>>,
    pub events: Vec<EventInterval>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub videos: Vec<Video>,
}

pub fn frame_name(t: usize) -> String {
    format!("frame_{t:06}.png")
}

pub fn flow_name(t: usize) -> String {
    format!("flow_{t:06}.amcf")
}

/// Resamples a flow field to `height x width`, scaling displacements with the grid.
pub fn resize_flow(flow: &FlowField, height: usize, width: usize) -> Result<FlowField> {
    if (flow.height, flow.width) == (height, width) {
        return Ok(flow.clone());
    }
    let sx = width as f32 / flow.width as f32;
    let sy = height as f32 / flow.height as f32;
    let dx = resize_bilinear(&flow.dx, 1, flow.height, flow.width, height, width);
    let dy = resize_bilinear(&flow.dy, 1, flow.height, flow.width, height, width);
    Ok(FlowField::from_components(
        height,
        width,
        dx.into_iter().map(|v| v * sx).collect(),
        dy.into_iter().map(|v| v * sy).collect(),
    )?)
}

impl Video {
    fn check(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(AmcError::Data(format!("video {} has fewer than 2 frames", self.id)));
        }
        if self.flows.len() != self.frames.len() - 1 {
            return Err(AmcError::Data(format!(
                "video {}: {} frames need {} flows, found {}",
                self.id,
                self.frames.len(),
                self.frames.len() - 1,
                self.flows.len()
            )));
        }
        if let Some(l) = &self.labels {
            if l.len() != self.frames.len() {
                return Err(AmcError::Data(format!("video {}: {} labels for {} frames", self.id, l.len(), self.frames.len())));
            }
        }
        Ok(())
    }
}

impl Dataset {
    /// Converts generated videos to model resolution.
    pub fn from_synth(videos: &[SynthVideo], height: usize, width: usize) -> Result<Self> {
        let videos = videos
            .iter()
            .map(|v| {
                let frames = v
                    .frames
                    .iter()
                    .map(|f| preprocess_frame(f, height, width))
                    .collect::<amc_core::Result<Vec<_>>>()?;
                let flows = v.flows.iter().map(|f| resize_flow(f, height, width)).collect::<Result<Vec<_>>>()?;
                let video = Video {
                    id: v.id.clone(),
                    frames,
                    flows,
                    labels: v.labels.clone(),
                    events: v.events.clone(),
                };
                video.check()?;
                Ok(video)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { videos })
    }

    /// Every `(video, frame)` that has a flow, in video then frame order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.videos
            .iter()
            .enumerate()
            .flat_map(|(v, video)| (0..video.flows.len()).map(move |t| (v, t)))
            .collect()
    }

    /// Stacks the frames and flows of `pairs` into two `N x 3 x H x W` tensors.
    pub fn batch(&self, pairs: &[(usize, usize)]) -> Result<(Tensor, Tensor)> {
        let frames: Vec<Tensor> = pairs.iter().map(|&(v, t)| self.videos[v].frames[t].to_tensor()).collect();
        let flows: Vec<Tensor> = pairs.iter().map(|&(v, t)| self.videos[v].flows[t].to_tensor()).collect();
        Ok((
            Tensor::stack(&frames.iter().collect::<Vec<_>>())?,
            Tensor::stack(&flows.iter().collect::<Vec<_>>())?,
        ))
    }

    /// Reads `dir/<split>` at model resolution. Outside the train split, labels
    /// and events are attached from `dir/labels.csv` and `dir/events.csv`.
    pub fn load(dir: &Path, split: &str, height: usize, width: usize) -> Result<Self> {
        let root = dir.join(split);
        let mut ids: Vec<(String, PathBuf)> = fs::read_dir(&root)
            .map_err(|e| AmcError::io(&root, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
            .collect();
        ids.sort();
        if ids.is_empty() {
            return Err(AmcError::Data(format!("{} contains no video directories", root.display())));
        }
        let labels_path = dir.join("labels.csv");
        let labels = if split != "train" && labels_path.exists() { formats::read_labels(&labels_path)? } else { Vec::new() };
        let events_path = dir.join("events.csv");
        let events = if split != "train" && events_path.exists() { formats::read_events(&events_path)? } else { Vec::new() };

        let mut videos = Vec::with_capacity(ids.len());
        for (id, path) in ids {
            let n = (0..).take_while(|&t| path.join(frame_name(t)).exists()).count();
            if n < 2 {
                return Err(AmcError::Data(format!("{}: expected frame_000000.png and frame_000001.png", path.display())));
            }
            let frames = (0..n)
                .map(|t| {
                    let p = path.join(frame_name(t));
                    let raw = formats::read_image(&p)?;
                    preprocess_frame(&raw, height, width).map_err(|e| AmcError::format(&p, e))
                })
                .collect::<Result<Vec<_>>>()?;
            let flows = (0..n - 1)
                .map(|t| {
                    let p = path.join(flow_name(t));
                    if !p.exists() {
                        return Err(AmcError::Data(format!(
                            "missing flow for frame {}: {} not found",
                            path.join(frame_name(t)).display(),
                            p.display()
                        )));
                    }
                    resize_flow(&formats::read_flow(&p)?, height, width)
                })
                .collect::<Result<Vec<_>>>()?;
            let video_labels = video_labels(&labels, &id, n, &labels_path)?;
            let video = Video {
                events: events.iter().filter(|e| e.video_id == id).cloned().collect(),
                id,
                frames,
                flows,
                labels: video_labels,
            };
            video.check()?;
            videos.push(video);
        }
        Ok(Dataset { videos })
    }
}

fn video_labels(rows: &[LabelRow], id: &str, frames: usize, path: &Path) -> Result<Option<Vec<u8>>> {
    let mine: Vec<&LabelRow> = rows.iter().filter(|r| r.video_id == id).collect();
    if mine.is_empty() {
        return Ok(None);
    }
    let mut out = vec![None; frames];
    for r in mine {
        let slot = out
            .get_mut(r.frame_index)
            .ok_or_else(|| AmcError::format(path, format!("{id} has no frame {}", r.frame_index)))?;
        *slot = Some(r.label);
    }
    out.into_iter()
        .enumerate()
        .map(|(t, l)| l.ok_or_else(|| AmcError::format(path, format!("no label for {id} frame {t}"))))
        .collect::<Result<Vec<u8>>>()
        .map(Some)
}

fn write_video(dir: &Path, v: &SynthVideo) -> Result<()> {
    let vdir = dir.join(&v.id);
    fs::create_dir_all(&vdir).map_err(|e| AmcError::io(&vdir, e))?;
    for (t, f) in v.frames.iter().enumerate() {
        formats::write_png(&vdir.join(frame_name(t)), f)?;
    }
    for (t, f) in v.flows.iter().enumerate() {
        formats::write_flow(&vdir.join(flow_name(t)), f)?;
    }
    Ok(())
}

/// Writes both splits plus the test labels and events.
pub fn write_synthetic(dir: &Path, data: &SynthDataset) -> Result<()> {
    for (split, videos) in [("train", &data.train), ("test", &data.test)] {
        for v in videos.iter() {
            write_video(&dir.join(split), v)?;
        }
    }
    let labels: Vec<LabelRow> = data
        .test
        .iter()
        .flat_map(|v| {
            v.labels.iter().flatten().enumerate().map(|(t, &label)| LabelRow {
                video_id: v.id.clone(),
                frame_index: t,
                label,
            })
        })
        .collect();
    formats::write_csv(&dir.join("labels.csv"), &labels)?;
    let events: Vec<EventInterval> = data.test.iter().flat_map(|v| v.events.iter().cloned()).collect();
    formats::write_events(&dir.join("events.csv"), &events)
}
