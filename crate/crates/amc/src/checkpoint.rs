//! Binary checkpoints: a JSON header followed by named f32 tensors.
//!
//! Layout: `AMCK`, u32 LE version, u64 LE header length, header JSON, u32 LE
//! tensor count, then per tensor a u32 LE name length, the UTF-8 name, a u64
//! LE element count and the f32 LE values.

use std::fs;
use std::path::Path;

use amc_core::scoring::ScoreWeights;
use amc_core::train::TrainState;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, PipelineConfig};
use crate::error::{AmcError, Result};
use crate::pipeline;

const MAGIC: &[u8; 4] = b"AMCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: PipelineConfig,
    epoch: usize,
    score_weights: Option<ScoreWeights>,
    steps: u64,
    gen_adam_step: u64,
    disc_adam_step: u64,
    /// Dropout stream position, as a decimal string (it is a u128).
    rng_word_pos: String,
}

pub struct Checkpoint {
    pub config: PipelineConfig,
    pub epoch: usize,
    pub score_weights: Option<ScoreWeights>,
    pub state: TrainState,
}

fn tensors_of(state: &TrainState) -> Vec<(String, &[f32])> {
    let mut out: Vec<(String, &[f32])> = Vec::new();
    out.extend(state.generator.named_tensors().into_iter().map(|(n, v)| (format!("gen.{n}"), v)));
    out.extend(state.discriminator.named_tensors());
    for (prefix, opt) in [("gen_adam", &state.gen_opt), ("disc_adam", &state.disc_opt)] {
        for (i, m) in opt.m.iter().enumerate() {
            out.push((format!("{prefix}.m.{i}"), m));
        }
        for (i, v) in opt.v.iter().enumerate() {
            out.push((format!("{prefix}.v.{i}"), v));
        }
    }
    out
}

fn tensors_of_mut(state: &mut TrainState) -> Vec<(String, &mut Vec<f32>)> {
    let mut out: Vec<(String, &mut Vec<f32>)> = Vec::new();
    out.extend(
        state
            .generator
            .named_tensors_mut()
            .into_iter()
            .map(|(n, v)| (format!("gen.{n}"), v)),
    );
    out.extend(state.discriminator.named_tensors_mut());
    for (prefix, opt) in [("gen_adam", &mut state.gen_opt), ("disc_adam", &mut state.disc_opt)] {
        for (i, m) in opt.m.iter_mut().enumerate() {
            out.push((format!("{prefix}.m.{i}"), m));
        }
        for (i, v) in opt.v.iter_mut().enumerate() {
            out.push((format!("{prefix}.v.{i}"), v));
        }
    }
    out
}

pub fn save(
    path: &Path,
    config: &PipelineConfig,
    state: &TrainState,
    epoch: usize,
    score_weights: Option<ScoreWeights>,
) -> Result<()> {
    let header = Header {
        config: config.clone(),
        epoch,
        score_weights,
        steps: state.steps,
        gen_adam_step: state.gen_opt.step,
        disc_adam_step: state.disc_opt.step,
        rng_word_pos: state.rng.get_word_pos().to_string(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| AmcError::format(path, e))?;
    let tensors = tensors_of(state);
    let mut buf = Vec::with_capacity(json.len() + 4 * tensors.iter().map(|(_, v)| v.len()).sum::<usize>() + 64);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, values) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| AmcError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| AmcError::format(self.path, "checkpoint is truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| AmcError::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    if r.take(4)? != MAGIC {
        return Err(AmcError::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(AmcError::format(path, format!("unsupported checkpoint version {version}")));
    }
    let len = r.u64()? as usize;
    let header: Header = serde_json::from_slice(r.take(len)?).map_err(|e| AmcError::format(path, e))?;
    header.config.validate()?;

    let mut state = pipeline::new_state(&header.config)?;
    state.steps = header.steps;
    state.gen_opt.step = header.gen_adam_step;
    state.disc_opt.step = header.disc_adam_step;
    let pos: u128 = header
        .rng_word_pos
        .parse()
        .map_err(|_| AmcError::format(path, "bad rng position"))?;
    state.rng.set_word_pos(pos);

    let count = r.u32()? as usize;
    let mut slots = tensors_of_mut(&mut state);
    if count != slots.len() {
        return Err(AmcError::format(
            path,
            format!("checkpoint holds {count} tensors but its config needs {}", slots.len()),
        ));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(n)?).map_err(|_| AmcError::format(path, "tensor name is not UTF-8"))?;
        let len = r.u64()? as usize;
        let raw = r.take(len.checked_mul(4).ok_or_else(|| AmcError::format(path, "tensor too large"))?)?;
        let idx = slots
            .iter()
            .position(|(s, _)| s == name)
            .ok_or_else(|| AmcError::format(path, format!("unexpected tensor {name}")))?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(AmcError::format(path, format!("tensor {name} appears twice")));
        }
        let slot = &mut slots[idx];
        if slot.1.len() != len {
            return Err(AmcError::format(
                path,
                format!("tensor {name} has {len} values, its config needs {}", slot.1.len()),
            ));
        }
        for (d, c) in slot.1.iter_mut().zip(raw.chunks_exact(4)) {
            *d = f32::from_le_bytes(c.try_into().expect("4 bytes"));
        }
    }
    if r.pos != bytes.len() {
        return Err(AmcError::format(path, "trailing bytes after the last tensor"));
    }
    Ok(Checkpoint {
        config: header.config,
        epoch: header.epoch,
        score_weights: header.score_weights,
        state,
    })
}

/// Loads a checkpoint and checks that it was built for `expected`.
pub fn load_compatible(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ck = load(path)?;
    let (got, want) = (&ck.config.model.generator, &expected.generator);
    if (got.height, got.width) != (want.height, want.width) {
        return Err(AmcError::Incompatible {
            path: path.to_path_buf(),
            msg: format!("input {}x{}, expected {}x{}", got.height, got.width, want.height, want.width),
        });
    }
    if ck.config.model != *expected {
        return Err(AmcError::Incompatible {
            path: path.to_path_buf(),
            msg: "layer widths differ".into(),
        });
    }
    Ok(ck)
}
