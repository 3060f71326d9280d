use nalgebra::Vector2;

use super::AnnotationError;

pub const DEPTH_MAGIC: &[u8; 4] = b"DPM1";
pub const DEPTH_HEADER_LEN: usize = 12;
pub const DEFAULT_FILL_WINDOW: usize = 5;

/// Depth in whole millimetres per pixel, row-major; zero marks a hole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    pub width: u16,
    pub height: u16,
    pub frame_id: u32,
    pub values: Vec<u16>,
}

impl DepthMap {
    pub fn empty(width: u16, height: u16, frame_id: u32) -> Self {
        Self {
            width,
            height,
            frame_id,
            values: vec![0; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: i64, y: i64) -> u16 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return 0;
        }
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn hole_count(&self) -> usize {
        self.values.iter().filter(|v| **v == 0).count()
    }
}

/// Depth at the pixel nearest `u`, falling back to the mean of nonzero depths
/// in the `window x window` neighbourhood. `None` when nothing is measured.
pub fn fill_depth(dm: &DepthMap, u: &Vector2<f64>, window: usize) -> Option<f64> {
    if !u.x.is_finite() || !u.y.is_finite() {
        return None;
    }
    let (x, y) = (u.x.round() as i64, u.y.round() as i64);
    let direct = dm.get(x, y);
    if direct > 0 {
        return Some(f64::from(direct));
    }
    let r = (window / 2) as i64;
    let (mut sum, mut n) = (0.0, 0usize);
    for yy in y - r..=y + r {
        for xx in x - r..=x + r {
            let d = dm.get(xx, yy);
            if d > 0 {
                sum += f64::from(d);
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn write_depth(dm: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(DEPTH_HEADER_LEN + 2 * dm.values.len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&dm.width.to_le_bytes());
    out.extend_from_slice(&dm.height.to_le_bytes());
    out.extend_from_slice(&dm.frame_id.to_le_bytes());
    for v in &dm.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_depth(bytes: &[u8]) -> Result<DepthMap, AnnotationError> {
    if bytes.len() < DEPTH_HEADER_LEN || &bytes[..4] != DEPTH_MAGIC {
        return Err(AnnotationError::MalformedDepth("bad magic or short header".into()));
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]);
    let height = u16::from_le_bytes([bytes[6], bytes[7]]);
    let frame_id = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let n = width as usize * height as usize;
    let body = &bytes[DEPTH_HEADER_LEN..];
    if body.len() != 2 * n {
        return Err(AnnotationError::MalformedDepth(format!(
            "body has {} bytes, expected {}",
            body.len(),
            2 * n
        )));
    }
    let values = body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    Ok(DepthMap {
        width,
        height,
        frame_id,
        values,
    })
}
