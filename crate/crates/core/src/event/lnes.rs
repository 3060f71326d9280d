//! Locally-normalised event surfaces.
//!
//! Each event in a window contributes `max(0, 1 - (t_end - t) / delta_t)` to the
//! channel selected by its polarity (channel 0 negative, channel 1 positive).
//! `Sum` accumulates the weights, `Latest` keeps the largest one.

use super::{EventError, EventWindow};
use crate::par::{self, Execution};

pub const LNES_MAGIC: &[u8; 4] = b"LNS1";
const LNES_HEADER_LEN: usize = 4 + 2 + 2 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LnesMode {
    #[default]
    Sum,
    Latest,
}

/// `height x width x 2` grid, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct LnesSurface {
    pub width: usize,
    pub height: usize,
    pub mode: LnesMode,
    pub t_end: u64,
    pub delta_t: u64,
    pub values: Vec<f32>,
}

impl LnesSurface {
    pub fn get(&self, x: usize, y: usize, channel: usize) -> f32 {
        self.values[(y * self.width + x) * 2 + channel]
    }
}

#[inline]
fn weight(t_end: u64, t: u64, delta_t: u64) -> f32 {
    let age = t_end.saturating_sub(t) as f64 / delta_t as f64;
    (1.0 - age).max(0.0) as f32
}

#[inline]
fn accumulate(slot: &mut f32, w: f32, mode: LnesMode) {
    match mode {
        LnesMode::Sum => *slot += w,
        LnesMode::Latest => *slot = slot.max(w),
    }
}

pub fn encode_lnes(
    window: &EventWindow<'_>,
    width: usize,
    height: usize,
    mode: LnesMode,
) -> Result<LnesSurface, EventError> {
    encode_lnes_with(window, width, height, mode, Execution::default())
}

/// Encodes with an explicit schedule. The parallel path buckets events by
/// row (stable, so per-pixel accumulation stays in timestamp order) and the
/// result is bit-identical to the sequential path.
pub fn encode_lnes_with(
    window: &EventWindow<'_>,
    width: usize,
    height: usize,
    mode: LnesMode,
    exec: Execution,
) -> Result<LnesSurface, EventError> {
    if width != usize::from(window.width) || height != usize::from(window.height) {
        return Err(EventError::DimensionMismatch {
            width: window.width,
            height: window.height,
            expected_w: width,
            expected_h: height,
        });
    }
    let (t_end, dt) = (window.t_end, window.delta_t);
    let mut values = vec![0f32; width * height * 2];
    let events = window.events;

    if exec.is_parallel() && height > 1 && events.len() > 4096 {
        let mut row_start = vec![0u32; height + 1];
        for e in events {
            row_start[usize::from(e.y) + 1] += 1;
        }
        for r in 0..height {
            row_start[r + 1] += row_start[r];
        }
        let mut cursor = row_start.clone();
        let mut order = vec![0u32; events.len()];
        for (i, e) in events.iter().enumerate() {
            let c = &mut cursor[usize::from(e.y)];
            order[*c as usize] = i as u32;
            *c += 1;
        }
        par::for_each_chunk_mut(exec, &mut values, width * 2, |row, out| {
            let span = row_start[row] as usize..row_start[row + 1] as usize;
            for &i in &order[span] {
                let e = &events[i as usize];
                let slot = &mut out[usize::from(e.x) * 2 + e.polarity.channel()];
                accumulate(slot, weight(t_end, e.t, dt), mode);
            }
        });
    } else {
        for e in events {
            let idx = (usize::from(e.y) * width + usize::from(e.x)) * 2 + e.polarity.channel();
            accumulate(&mut values[idx], weight(t_end, e.t, dt), mode);
        }
    }

    Ok(LnesSurface {
        width,
        height,
        mode,
        t_end,
        delta_t: dt,
        values,
    })
}

/// `LNS1` dump: magic, u16 width, u16 height, u8 mode (0 sum, 1 latest),
/// u64 t_end, u64 delta_t, then `height * width * 2` little-endian f32.
pub fn write_lnes(surface: &LnesSurface) -> Vec<u8> {
    let mut out = Vec::with_capacity(LNES_HEADER_LEN + surface.values.len() * 4);
    out.extend_from_slice(LNES_MAGIC);
    out.extend_from_slice(&(surface.width as u16).to_le_bytes());
    out.extend_from_slice(&(surface.height as u16).to_le_bytes());
    out.push(match surface.mode {
        LnesMode::Sum => 0,
        LnesMode::Latest => 1,
    });
    out.extend_from_slice(&surface.t_end.to_le_bytes());
    out.extend_from_slice(&surface.delta_t.to_le_bytes());
    for v in &surface.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_lnes(bytes: &[u8]) -> Result<LnesSurface, EventError> {
    if bytes.len() < LNES_HEADER_LEN || &bytes[..4] != LNES_MAGIC {
        return Err(EventError::MalformedHeader("not an LNS1 surface".into()));
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let height = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let mode = match bytes[8] {
        0 => LnesMode::Sum,
        1 => LnesMode::Latest,
        m => return Err(EventError::MalformedHeader(format!("unknown mode {m}"))),
    };
    let t_end = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
    let delta_t = u64::from_le_bytes(bytes[17..25].try_into().unwrap());
    let body = &bytes[LNES_HEADER_LEN..];
    let n = width * height * 2;
    if body.len() != n * 4 {
        return Err(EventError::TruncatedRecord { index: body.len() / 4 });
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(LnesSurface {
        width,
        height,
        mode,
        t_end,
        delta_t,
        values,
    })
}
