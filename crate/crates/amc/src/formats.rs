//! On-disk formats: PNG frames, binary flow files, and CSV tables.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use amc_core::data::{FlowField, RawImage};
use amc_core::eval::EventInterval;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AmcError, Result};

pub const FLOW_MAGIC: &[u8; 4] = b"AMCF";

/// Flow file: `AMCF`, u32 LE width, u32 LE height, then row-major
/// `(dx, dy)` f32 LE pairs.
pub fn write_flow(path: &Path, flow: &FlowField) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + 8 * flow.dx.len());
    buf.extend_from_slice(FLOW_MAGIC);
    buf.extend_from_slice(&(flow.width as u32).to_le_bytes());
    buf.extend_from_slice(&(flow.height as u32).to_le_bytes());
    for (x, y) in flow.dx.iter().zip(&flow.dy) {
        buf.extend_from_slice(&x.to_le_bytes());
        buf.extend_from_slice(&y.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| AmcError::io(path, e))
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| AmcError::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != FLOW_MAGIC {
        return Err(AmcError::format(path, "not a flow file (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (width, height) = (u32_at(4), u32_at(8));
    let n = width * height;
    if width == 0 || height == 0 || bytes.len() != 12 + 8 * n {
        return Err(AmcError::format(
            path,
            format!("flow header says {width}x{height} but the file holds {} bytes", bytes.len()),
        ));
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let dx = (0..n).map(|i| f32_at(12 + 8 * i)).collect();
    let dy = (0..n).map(|i| f32_at(16 + 8 * i)).collect();
    FlowField::from_components(height, width, dx, dy).map_err(|e| AmcError::format(path, e))
}

/// Decodes an image as gray (1 channel) or RGB (3 channels); alpha is dropped.
pub fn read_image(path: &Path) -> Result<RawImage> {
    let img = image::open(path).map_err(|e| AmcError::format(path, format!("cannot decode image: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = match img.color().channel_count() {
        1 | 2 => RawImage::new(w, h, 1, img.into_luma8().into_raw()),
        _ => RawImage::new(w, h, 3, img.into_rgb8().into_raw()),
    };
    raw.map_err(|e| AmcError::format(path, e))
}

pub fn write_png(path: &Path, img: &RawImage) -> Result<()> {
    let color = match img.channels {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(AmcError::format(path, format!("cannot write a {c}-channel image"))),
    };
    image::save_buffer_with_format(
        path,
        &img.data,
        img.width as u32,
        img.height as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| AmcError::format(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub video_id: String,
    pub frame_index: usize,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EventRow {
    video_id: String,
    start_frame: usize,
    end_frame: usize,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| AmcError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(|e| AmcError::format(path, e))?;
    }
    w.flush().map_err(|e| AmcError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| AmcError::io(path, e))?;
    csv::Reader::from_reader(BufReader::new(file))
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| AmcError::format(path, format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let rows: Vec<LabelRow> = read_csv(path)?;
    if let Some(r) = rows.iter().find(|r| r.label > 1) {
        return Err(AmcError::format(path, format!("label {} for {}:{} is not 0 or 1", r.label, r.video_id, r.frame_index)));
    }
    Ok(rows)
}

pub fn write_events(path: &Path, events: &[EventInterval]) -> Result<()> {
    let rows: Vec<EventRow> = events
        .iter()
        .map(|e| EventRow { video_id: e.video_id.clone(), start_frame: e.start, end_frame: e.end })
        .collect();
    write_csv(path, &rows)
}

pub fn read_events(path: &Path) -> Result<Vec<EventInterval>> {
    read_csv::<EventRow>(path)?
        .into_iter()
        .map(|r| EventInterval::new(r.video_id, r.start_frame, r.end_frame).map_err(|e| AmcError::format(path, e)))
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| AmcError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| AmcError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.amcf");
        let f = FlowField::from_components(2, 3, vec![1.0, -2.0, 0.0, 3.5, 0.0, 1e-3], vec![0.0, 1.0, 0.0, -4.0, 0.0, 2.0]).unwrap();
        write_flow(&p, &f).unwrap();
        assert_eq!(read_flow(&p).unwrap(), f);
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"AMCF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
    }

    #[test]
    fn truncated_flow_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.amcf");
        fs::write(&p, b"AMCF\x02\0\0\0\x02\0\0\0\0\0").unwrap();
        assert!(read_flow(&p).is_err());
        fs::write(&p, b"XXXX").unwrap();
        assert!(read_flow(&p).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = RawImage::new(3, 2, 3, (0..18).map(|v| v as u8 * 10).collect()).unwrap();
        write_png(&p, &img).unwrap();
        assert_eq!(read_image(&p).unwrap(), img);
    }

    #[test]
    fn events_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let ev = vec![EventInterval::new("a", 3, 7).unwrap(), EventInterval::new("b", 0, 0).unwrap()];
        write_events(&p, &ev).unwrap();
        assert_eq!(read_events(&p).unwrap(), ev);
        assert!(fs::read_to_string(&p).unwrap().starts_with("video_id,start_frame,end_frame"));
    }
}
