//! Gaussian heatmaps, soft-argmax decoding and bilinear grid sampling.
//!
//! Grid coordinates put pixel centres at integer positions: pixel `(i, j)` of
//! a `W x H` grid sits at `(i, j)` and the grid spans `[0, W-1] x [0, H-1]`.
//!
//! [`bilinear_sample`] takes normalised coordinates with the align-corners
//! mapping (`-1` is node 0, `+1` is node `W-1`). [`crate::camera::normalize_pixel`]
//! divides by `W` rather than `W-1`, so composing the two lands
//! `u * (W-1) / W` rather than `u`. The refinement loop therefore works in
//! node coordinates directly via [`HeatmapStack::decode_patch`].

use nalgebra::Vector2;
use thiserror::Error;

use crate::pose::{Keypoints2D, JOINTS};

pub const HEATMAP_MAGIC: &[u8; 4] = b"HMS1";
const HEATMAP_HEADER_LEN: usize = 10;
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeatmapError {
    #[error("malformed heatmap header: {0}")]
    MalformedHeader(String),
    #[error("heatmap body has {got} bytes, expected {expected}")]
    Truncated { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// `joints x height x width` non-negative grid, joint-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    pub joints: usize,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl HeatmapStack {
    pub fn zeros(joints: usize, width: usize, height: usize) -> Self {
        Self {
            joints,
            width,
            height,
            values: vec![0.0; joints * width * height],
        }
    }

    pub fn channel(&self, j: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.values[j * n..(j + 1) * n]
    }

    pub fn channel_mut(&mut self, j: usize) -> &mut [f32] {
        let n = self.width * self.height;
        &mut self.values[j * n..(j + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.joints == other.joints && self.width == other.width && self.height == other.height
    }

    /// Bilinear value of channel `j` at grid position `(gx, gy)`; zero outside
    /// the grid.
    pub fn sample(&self, j: usize, gx: f64, gy: f64) -> f64 {
        sample_nodes(self.channel(j), self.width, self.height, 1, gx, gy, 0)
    }

    /// Soft-argmax over the `(2r+1)^2` grid nodes around the node nearest
    /// `center` (grid coordinates); nodes outside the grid count as zero.
    /// Returns the decoded grid position and confidence, or `(center, 0)` when
    /// the patch holds no evidence.
    pub fn decode_patch(&self, j: usize, center: Vector2<f64>, radius: usize, temperature: f64) -> (Vector2<f64>, f64) {
        if !(center.x.is_finite() && center.y.is_finite()) {
            return (center, 0.0);
        }
        let side = 2 * radius + 1;
        let r = radius as i64;
        let (cx, cy) = (center.x.round() as i64, center.y.round() as i64);
        let ch = self.channel(j);
        let mut patch = Vec::with_capacity(side * side);
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                let inside = x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height;
                patch.push(if inside { ch[y as usize * self.width + x as usize] } else { 0.0 });
            }
        }
        let (local, conf) = soft_argmax(&patch, side, side, temperature);
        if conf == 0.0 {
            return (center, 0.0);
        }
        (Vector2::new((cx - r) as f64, (cy - r) as f64) + local, conf)
    }
}

/// Per-joint decoded 2D evidence for one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedKeypoints2D {
    pub coords: [Vector2<f64>; JOINTS],
    /// In `[0, 1]`; zero means no evidence.
    pub confidence: [f64; JOINTS],
}

impl DecodedKeypoints2D {
    pub fn empty() -> Self {
        Self {
            coords: [Vector2::zeros(); JOINTS],
            confidence: [0.0; JOINTS],
        }
    }

    /// Keypoints with unit confidence where valid, zero elsewhere.
    pub fn from_keypoints(kp: &Keypoints2D) -> Self {
        let mut out = Self::empty();
        for j in 0..JOINTS {
            if kp.valid[j] {
                out.coords[j] = kp.coords[j];
                out.confidence[j] = 1.0;
            }
        }
        out
    }

    /// Decodes every channel of a full stack, mapping grid coordinates back to
    /// pixels by dividing by `scale` (grid size over image size).
    pub fn decode(stack: &HeatmapStack, temperature: f64, scale: Vector2<f64>) -> Self {
        let mut out = Self::empty();
        for j in 0..stack.joints.min(JOINTS) {
            let (u, c) = soft_argmax(stack.channel(j), stack.width, stack.height, temperature);
            out.coords[j] = u.component_div(&scale);
            out.confidence[j] = c;
        }
        out
    }

    /// Integer-pixel argmax decode, the coarse counterpart of [`Self::decode`].
    pub fn decode_argmax(stack: &HeatmapStack, scale: Vector2<f64>) -> Self {
        let mut out = Self::empty();
        for j in 0..stack.joints.min(JOINTS) {
            let ch = stack.channel(j);
            let (idx, peak) = ch
                .iter()
                .enumerate()
                .fold((0, 0f32), |best, (i, v)| if *v > best.1 { (i, *v) } else { best });
            if peak > 0.0 {
                let g = Vector2::new((idx % stack.width) as f64, (idx / stack.width) as f64);
                out.coords[j] = g.component_div(&scale);
                out.confidence[j] = f64::from(peak).min(1.0);
            }
        }
        out
    }
}

/// Renders `exp(-|x - kp_j|^2 / (2 sigma^2))` at every pixel centre; invalid
/// joints give all-zero channels.
pub fn render_gaussian(kp: &Keypoints2D, sigma: f64, width: usize, height: usize) -> HeatmapStack {
    assert!(sigma > 0.0, "sigma must be positive");
    let mut stack = HeatmapStack::zeros(JOINTS, width, height);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut gx = vec![0f64; width];
    let mut gy = vec![0f64; height];
    for j in 0..JOINTS {
        let Some(c) = kp.get(j) else { continue };
        // separable: exp(-(dx^2 + dy^2) k) = exp(-dx^2 k) exp(-dy^2 k)
        for (x, g) in gx.iter_mut().enumerate() {
            let d = x as f64 - c.x;
            *g = (-d * d * inv).exp();
        }
        for (y, g) in gy.iter_mut().enumerate() {
            let d = y as f64 - c.y;
            *g = (-d * d * inv).exp();
        }
        let ch = stack.channel_mut(j);
        for (y, row) in ch.chunks_exact_mut(width).enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                *v = (gy[y] * gx[x]) as f32;
            }
        }
    }
    stack
}

/// Expected pixel position under temperature-scaled softmax weights.
///
/// Weights are `exp(h / T) - 1`, i.e. the softmax with the contribution of a
/// zero-valued pixel removed, so empty background carries no weight and does
/// not pull the estimate towards the image centre. An all-zero channel
/// decodes to the image centre with confidence 0. Confidence is the peak
/// value clamped to `[0, 1]`.
pub fn soft_argmax<T: Copy + Into<f64>>(values: &[T], width: usize, height: usize, temperature: f64) -> (Vector2<f64>, f64) {
    assert_eq!(values.len(), width * height, "channel size");
    assert!(temperature > 0.0, "temperature must be positive");
    let center = Vector2::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let peak = values.iter().map(|v| (*v).into()).fold(0.0f64, f64::max);
    if !(peak > 0.0) {
        return (center, 0.0);
    }
    let floor = (-peak / temperature).exp();
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (y, row) in values.chunks_exact(width).enumerate() {
        let mut rw = 0.0;
        let mut rx = 0.0;
        for (x, v) in row.iter().enumerate() {
            let w = (((*v).into() - peak) / temperature).exp() - floor;
            if w > 0.0 {
                rw += w;
                rx += w * x as f64;
            }
        }
        sw += rw;
        sx += rx;
        sy += rw * y as f64;
    }
    if !(sw > 0.0) {
        return (center, 0.0);
    }
    (Vector2::new(sx / sw, sy / sw), peak.min(1.0))
}

/// Samples an `H x W x C` channel-last grid at normalised coordinates with
/// align-corners mapping. Points outside `[-1, 1]^2` return zeros.
pub fn bilinear_sample(grid: &[f64], width: usize, height: usize, channels: usize, u_hat: Vector2<f64>) -> Vec<f64> {
    assert_eq!(grid.len(), width * height * channels, "grid size");
    assert!(!grid.is_empty(), "grid must be non-empty");
    if !(u_hat.x.abs() <= 1.0 && u_hat.y.abs() <= 1.0) {
        return vec![0.0; channels];
    }
    let gx = (u_hat.x + 1.0) / 2.0 * (width - 1) as f64;
    let gy = (u_hat.y + 1.0) / 2.0 * (height - 1) as f64;
    (0..channels)
        .map(|c| sample_nodes(grid, width, height, channels, gx, gy, c))
        .collect()
}

fn sample_nodes(grid: &[impl Copy + Into<f64>], width: usize, height: usize, channels: usize, gx: f64, gy: f64, c: usize) -> f64 {
    let (wm, hm) = ((width - 1) as f64, (height - 1) as f64);
    if !(gx >= 0.0 && gy >= 0.0 && gx <= wm && gy <= hm) {
        return 0.0;
    }
    let x0 = (gx.floor() as usize).min(width.saturating_sub(2));
    let y0 = (gy.floor() as usize).min(height.saturating_sub(2));
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
    let at = |x: usize, y: usize| -> f64 { grid[(y * width + x) * channels + c].into() };
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// `HMS1` dump: magic, u16 joints, u16 width, u16 height, then little-endian
/// f32 values joint-major, row-major.
pub fn write_heatmaps(stack: &HeatmapStack) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEATMAP_HEADER_LEN + stack.values.len() * 4);
    out.extend_from_slice(HEATMAP_MAGIC);
    for d in [stack.joints, stack.width, stack.height] {
        out.extend_from_slice(&(d as u16).to_le_bytes());
    }
    for v in &stack.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_heatmaps(bytes: &[u8]) -> Result<HeatmapStack, HeatmapError> {
    if bytes.len() < HEATMAP_HEADER_LEN {
        return Err(HeatmapError::MalformedHeader("short header".into()));
    }
    if &bytes[..4] != HEATMAP_MAGIC {
        return Err(HeatmapError::MalformedHeader("bad magic".into()));
    }
    let dim = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
    let (joints, width, height) = (dim(4), dim(6), dim(8));
    let body = &bytes[HEATMAP_HEADER_LEN..];
    let expected = joints * width * height * 4;
    if body.len() != expected {
        return Err(HeatmapError::Truncated {
            expected,
            got: body.len(),
        });
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(HeatmapError::MalformedHeader("values must be finite and non-negative".into()));
    }
    Ok(HeatmapStack {
        joints,
        width,
        height,
        values,
    })
}
