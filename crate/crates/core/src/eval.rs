//! Frame-level ROC/PR metrics and event-level counting over score maxima.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive frame range of one anomalous event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInterval {
    pub video_id: String,
    pub start: usize,
    pub end: usize,
}

impl EventInterval {
    pub fn new(video_id: impl Into<String>, start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::Input(alloc::format!("event interval {start}..={end} is reversed")));
        }
        Ok(EventInterval {
            video_id: video_id.into(),
            start,
            end,
        })
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }
}

/// Maximal runs of nonzero labels.
pub fn intervals_from_labels(video_id: &str, labels: &[u8]) -> Vec<EventInterval> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l != 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(EventInterval { video_id: video_id.into(), start: s, end: i - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(EventInterval { video_id: video_id.into(), start: s, end: labels.len() - 1 });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub true_positives: usize,
    pub false_alarms: usize,
    pub total_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EvalReport {
    FrameAuc { auc: f64, curve: Vec<RocPoint> },
    FrameAp { ap: f64, curve: Vec<PrPoint> },
    Event { counts: EventCounts },
}

fn check_scores(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Input(alloc::format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Input(alloc::format!("label {l} is not binary")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Indices by descending score; equal scores keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Area under the ROC curve (Mann-Whitney with midranks) and the curve
/// swept over distinct score thresholds, from `(0, 0)` to `(1, 1)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<RocPoint>)> {
    let (pos, neg) = check_scores(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("ROC-AUC needs both positive and negative labels"));
    }
    let order = descending(scores);
    let n = scores.len();

    // Sum of ascending midranks of positives; groups of tied scores share their mean rank.
    let mut rank_sum = 0.0f64;
    let mut curve = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < n {
        let s = scores[order[i]];
        let mut j = i;
        let mut group_pos = 0;
        while j < n && scores[order[j]] == s {
            group_pos += labels[order[j]] as usize;
            j += 1;
        }
        // Descending positions i..j hold ascending ranks n-j+1 ..= n-i.
        let mid = ((n - j + 1) + (n - i)) as f64 / 2.0;
        rank_sum += mid * group_pos as f64;
        tp += group_pos;
        fp += (j - i) - group_pos;
        curve.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
        i = j;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok((u / (pos as f64 * neg as f64), curve))
}

/// Step-interpolated average precision over the stable descending ranking,
/// with one curve point per ranked item.
pub fn pr_ap(scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<PrPoint>)> {
    let (pos, _) = check_scores(scores, labels)?;
    if pos == 0 {
        return Err(Error::Undefined("average precision needs at least one positive label"));
    }
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut prev_recall = 0.0;
    let mut curve = Vec::with_capacity(scores.len());
    for (k, &i) in descending(scores).iter().enumerate() {
        tp += labels[i] as usize;
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (k + 1) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        curve.push(PrPoint { threshold: scores[i], recall, precision });
    }
    Ok((ap, curve))
}

/// Strict "higher than" order on sequence positions: by value, then the
/// earlier index wins ties.
#[inline]
fn higher(seq: &[f64], a: usize, b: usize) -> bool {
    seq[a] > seq[b] || (seq[a] == seq[b] && a < b)
}

/// Local maxima under the tie-broken order, in index order.
pub fn local_maxima(seq: &[f64]) -> Vec<usize> {
    (0..seq.len())
        .filter(|&i| (i == 0 || higher(seq, i, i - 1)) && (i + 1 == seq.len() || higher(seq, i, i + 1)))
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Each local maximum with its persistence (the global maximum gets
/// infinity), in index order.
pub fn persistence(seq: &[f64]) -> Result<Vec<(usize, f64)>> {
    if seq.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("persistence needs finite scores".into()));
    }
    let n = seq.len();
    let order = descending(seq);

    const UNSEEN: usize = usize::MAX;
    let mut parent = vec![UNSEEN; n];
    // Peak of each component, stored at its root.
    let mut peak = vec![0usize; n];
    let mut pers = vec![f64::NAN; n];
    for &i in &order {
        parent[i] = i;
        peak[i] = i;
        for nb in [i.wrapping_sub(1), i + 1] {
            if nb >= n || parent[nb] == UNSEEN {
                continue;
            }
            let (ri, rn) = (find(&mut parent, i), find(&mut parent, nb));
            if ri == rn {
                continue;
            }
            let (old, young) = if higher(seq, peak[ri], peak[rn]) { (ri, rn) } else { (rn, ri) };
            if peak[young] != i {
                pers[peak[young]] = seq[peak[young]] - seq[i];
            }
            parent[young] = old;
        }
    }
    let maxima = local_maxima(seq);
    Ok(maxima
        .into_iter()
        .map(|m| (m, if pers[m].is_nan() { f64::INFINITY } else { pers[m] }))
        .collect())
}

/// Local maxima with persistence at least `threshold`, dropping any that has a
/// higher local maximum fewer than `merge_distance` frames away.
pub fn detect_events(seq: &[f64], threshold: f64, merge_distance: usize) -> Result<Vec<usize>> {
    if seq.is_empty() {
        return Err(Error::Input("cannot detect events in an empty sequence".into()));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Input("persistence threshold must be non-negative".into()));
    }
    let maxima = persistence(seq)?;
    let peaks: Vec<usize> = maxima.iter().map(|&(m, _)| m).collect();
    Ok(maxima
        .iter()
        .filter(|&&(_, p)| p >= threshold)
        .map(|&(m, _)| m)
        .filter(|&m| {
            !peaks
                .iter()
                .any(|&o| o != m && m.abs_diff(o) < merge_distance && higher(seq, o, m))
        })
        .collect())
}

/// Counts hits against the events of one video. Each event yields at most one
/// true positive; detections outside every event are false alarms.
pub fn match_events(detections: &[usize], events: &[EventInterval]) -> EventCounts {
    let mut hit = vec![false; events.len()];
    let mut false_alarms = 0;
    for &d in detections {
        let mut inside = false;
        for (e, h) in events.iter().zip(hit.iter_mut()) {
            if e.contains(d) {
                inside = true;
                *h = true;
            }
        }
        if !inside {
            false_alarms += 1;
        }
    }
    EventCounts {
        true_positives: hit.iter().filter(|&&h| h).count(),
        false_alarms,
        total_events: events.len(),
    }
}

impl core::ops::AddAssign for EventCounts {
    fn add_assign(&mut self, o: Self) {
        self.true_positives += o.true_positives;
        self.false_alarms += o.false_alarms;
        self.total_events += o.total_events;
    }
}
