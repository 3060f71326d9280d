use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::annotation::DepthMap;
use crate::camera::{CameraModel, StereoRig};
use crate::event::{Event, EventStream, Polarity};
use crate::par::{self, Execution};
use crate::pose::{HandPose3D, JOINTS};

pub const SPLAT_RADIUS_PX: f64 = 3.0;
pub const DEFAULT_SAMPLE_STEP_US: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventParams {
    /// Path length in pixels between consecutive events of one joint.
    pub contrast_step: f64,
    /// Background events per second per pixel.
    pub noise_rate: f64,
    pub seed: u64,
    /// Time step used to trace projected paths.
    pub sample_step_us: u64,
}

impl Default for EventParams {
    fn default() -> Self {
        Self {
            contrast_step: 1.0,
            noise_rate: 0.0,
            seed: 0,
            sample_step_us: DEFAULT_SAMPLE_STEP_US,
        }
    }
}

/// Sort key giving a schedule-independent order: time, then source (joints
/// first, noise last), then emission index.
type Keyed = ((u64, usize, usize), Event);

fn push_event(out: &mut Vec<Keyed>, cam: &CameraModel, u: Vector2<f64>, t: f64, joint: usize, index: usize, dx: f64) {
    let (x, y) = (u.x.round(), u.y.round());
    if x < 0.0 || y < 0.0 || x >= cam.width as f64 || y >= cam.height as f64 {
        return;
    }
    let t = t.max(0.0).floor() as u64;
    let polarity = if dx >= 0.0 { Polarity::Positive } else { Polarity::Negative };
    out.push((
        (t, joint, index),
        Event {
            t,
            x: x as u16,
            y: y as u16,
            polarity,
        },
    ));
}

fn render_view<F>(pose_at: &F, duration_us: u64, cam: &CameraModel, params: &EventParams, view: u64) -> EventStream
where
    F: Fn(f64) -> HandPose3D,
{
    let mut out: Vec<Keyed> = Vec::new();
    let step = params.sample_step_us.max(1);
    let project = |p: &HandPose3D, j: usize| {
        if !p.valid[j] {
            return None;
        }
        cam.project(&p.joints[j]).ok().map(|(u, _)| u)
    };
    let p0 = pose_at(0.0);
    let mut prev: [Option<Vector2<f64>>; JOINTS] = std::array::from_fn(|j| project(&p0, j));
    let mut acc = [0.0f64; JOINTS];
    let mut emitted = [0usize; JOINTS];
    let mut t_prev = 0.0;
    let mut t = 0u64;
    while t < duration_us {
        t = (t + step).min(duration_us);
        let tf = t as f64;
        let pose = pose_at(tf);
        for j in 0..JOINTS {
            let cur = project(&pose, j);
            if let (Some(a), Some(b)) = (prev[j], cur) {
                let seg = b - a;
                let len = seg.norm();
                if len > 0.0 {
                    let mut s0 = 0.0;
                    while acc[j] + (1.0 - s0) * len >= params.contrast_step {
                        let s = s0 + (params.contrast_step - acc[j]) / len;
                        push_event(&mut out, cam, a + seg * s, t_prev + (tf - t_prev) * s, j, emitted[j], seg.x);
                        emitted[j] += 1;
                        acc[j] = 0.0;
                        s0 = s;
                    }
                    acc[j] += (1.0 - s0) * len;
                }
            }
            prev[j] = cur;
        }
        t_prev = tf;
    }

    if params.noise_rate > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(view + 1)));
        let area = cam.width as f64 * cam.height as f64;
        let mean = params.noise_rate * duration_us as f64 * 1e-6 * area;
        let n = Poisson::new(mean).map_or(0, |d| d.sample(&mut rng) as usize);
        for i in 0..n {
            let t = rng.random_range(0..=duration_us);
            let e = Event {
                t,
                x: rng.random_range(0..cam.width) as u16,
                y: rng.random_range(0..cam.height) as u16,
                polarity: if rng.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative },
            };
            out.push(((t, JOINTS, i), e));
        }
    }
    out.sort_unstable_by_key(|(k, _)| *k);
    EventStream::new(cam.width as u16, cam.height as u16, out.into_iter().map(|(_, e)| e).collect())
        .expect("simulated events are sorted and in bounds")
}

/// Events for both views. Each joint's projected path is traced and an event
/// is emitted every `contrast_step` pixels of travel, with polarity from the
/// sign of the horizontal motion; uniform Poisson noise is added on top.
pub fn render_events<F>(
    pose_at: F,
    duration_us: u64,
    rig: &StereoRig,
    params: &EventParams,
    exec: Execution,
) -> (EventStream, EventStream)
where
    F: Fn(f64) -> HandPose3D + Sync,
{
    assert!(params.contrast_step > 0.0, "contrast step must be positive");
    par::join(
        exec,
        || render_view(&pose_at, duration_us, &rig.left, params, 0),
        || render_view(&pose_at, duration_us, &rig.right, params, 1),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HoleMask {
    #[default]
    None,
    /// `count` disks of the given radius at seeded positions.
    Random { count: usize, radius: f64 },
    Full,
}

/// Splats each joint's camera-frame depth into a disk around its projection.
/// Overlapping disks resolve to the nearest joint centre, then the nearer
/// depth. Holes are then carved according to `holes`.
pub fn render_depth(pose: &HandPose3D, cam: &CameraModel, frame_id: u32, holes: &HoleMask, seed: u64) -> DepthMap {
    let (w, h) = (cam.width as u16, cam.height as u16);
    let mut dm = DepthMap::empty(w, h, frame_id);
    if matches!(holes, HoleMask::Full) {
        return dm;
    }
    let mut owner = vec![(f64::INFINITY, f64::INFINITY); dm.values.len()];
    let r = SPLAT_RADIUS_PX;
    for j in (0..JOINTS).filter(|j| pose.valid[*j]) {
        let Ok((u, z)) = cam.project(&pose.joints[j]) else { continue };
        let (x0, x1) = ((u.x - r).ceil().max(0.0) as i64, (u.x + r).floor().min(w as f64 - 1.0) as i64);
        let (y0, y1) = ((u.y - r).ceil().max(0.0) as i64, (u.y + r).floor().min(h as f64 - 1.0) as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = (Vector2::new(x as f64, y as f64) - u).norm();
                if d > r {
                    continue;
                }
                let i = y as usize * w as usize + x as usize;
                if (d, z) < owner[i] {
                    owner[i] = (d, z);
                    dm.values[i] = z.round().clamp(1.0, u16::MAX as f64) as u16;
                }
            }
        }
    }
    if let HoleMask::Random { count, radius } = *holes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(frame_id) << 32));
        for _ in 0..count {
            let c = Vector2::new(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
            carve_disk(&mut dm, c, radius);
        }
    }
    dm
}

pub fn carve_disk(dm: &mut DepthMap, center: Vector2<f64>, radius: f64) {
    let (w, h) = (dm.width as i64, dm.height as i64);
    let (x0, x1) = (((center.x - radius).ceil() as i64).max(0), ((center.x + radius).floor() as i64).min(w - 1));
    let (y0, y1) = (((center.y - radius).ceil() as i64).max(0), ((center.y + radius).floor() as i64).min(h - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            if (Vector2::new(x as f64, y as f64) - center).norm() <= radius {
                dm.values[(y * w + x) as usize] = 0;
            }
        }
    }
}
