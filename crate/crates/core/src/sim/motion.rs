use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::annotation::{HandPoseTrack, TrackFrame};
use crate::camera::CameraModel;
use crate::pose::{HandPose3D, JOINTS, JOINTS_PER_HAND};

/// Right-hand template in mm: wrist at the origin, fingers towards -y and
/// slightly towards the camera.
const RIGHT_HAND: [[f64; 3]; JOINTS_PER_HAND] = [
    [0.0, 0.0, 0.0],
    [-20.0, -15.0, -3.0],
    [-35.0, -30.0, -6.0],
    [-45.0, -45.0, -9.0],
    [-52.0, -58.0, -12.0],
    [-18.0, -65.0, -8.0],
    [-20.0, -90.0, -12.0],
    [-21.0, -108.0, -15.0],
    [-22.0, -122.0, -17.0],
    [0.0, -70.0, -8.0],
    [0.0, -98.0, -12.0],
    [0.0, -118.0, -15.0],
    [0.0, -133.0, -17.0],
    [16.0, -65.0, -8.0],
    [18.0, -90.0, -12.0],
    [19.0, -108.0, -15.0],
    [20.0, -121.0, -17.0],
    [30.0, -55.0, -7.0],
    [34.0, -75.0, -10.0],
    [36.0, -88.0, -12.0],
    [38.0, -100.0, -14.0],
];

/// Wrist positions of the base pose, left hand first.
pub const BASE_WRISTS: [[f64; 3]; 2] = [[-80.0, 60.0, 400.0], [80.0, 60.0, 400.0]];

/// Two open hands facing the rig about 40 cm away. The left hand is the
/// mirrored template.
pub fn base_pose() -> [Vector3<f64>; JOINTS] {
    std::array::from_fn(|j| {
        let hand = j / JOINTS_PER_HAND;
        let t = RIGHT_HAND[j % JOINTS_PER_HAND];
        let mirror = if hand == 0 { -1.0 } else { 1.0 };
        let w = BASE_WRISTS[hand];
        Vector3::new(w[0] + mirror * t[0], w[1] + t[1], w[2] + t[2])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub amplitude: [f64; 3],
    pub freq_hz: f64,
    pub phase: f64,
}

impl Oscillation {
    pub fn at(&self, t_s: f64) -> Vector3<f64> {
        Vector3::from(self.amplitude) * (TAU * self.freq_hz * t_s + self.phase).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Articulation {
    pub joint: usize,
    pub wave: Oscillation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandSet {
    Bimanual,
    /// Only the right hand (joints 21..42) is present.
    Single,
}

/// Parametric two-hand motion.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec {
    pub duration_us: u64,
    pub frame_rate: f64,
    pub base: [Vector3<f64>; JOINTS],
    pub articulations: Vec<Articulation>,
    /// Rigid translation of each hand, left first.
    pub hand_paths: [Oscillation; 2],
    pub hands: HandSet,
    pub seed: u64,
}

impl MotionSpec {
    /// Static base pose.
    pub fn still(duration_us: u64, frame_rate: f64) -> Self {
        let zero = Oscillation {
            amplitude: [0.0; 3],
            freq_hz: 0.0,
            phase: 0.0,
        };
        Self {
            duration_us,
            frame_rate,
            base: base_pose(),
            articulations: Vec::new(),
            hand_paths: [zero; 2],
            hands: HandSet::Bimanual,
            seed: 0,
        }
    }

    /// Base pose with seeded finger articulation of up to `articulation_mm`
    /// per non-wrist joint and a translation of each hand along a seeded
    /// direction.
    pub fn seeded(
        duration_us: u64,
        frame_rate: f64,
        seed: u64,
        articulation_mm: f64,
        translation_mm: f64,
        translation_hz: f64,
        hands: HandSet,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut articulations = Vec::new();
        if articulation_mm > 0.0 {
            for j in 0..JOINTS {
                if j % JOINTS_PER_HAND == 0 {
                    continue;
                }
                let dir = random_unit(&mut rng);
                let amp = articulation_mm * rng.random_range(0.5..1.0);
                articulations.push(Articulation {
                    joint: j,
                    wave: Oscillation {
                        amplitude: (dir * amp).into(),
                        freq_hz: rng.random_range(0.5..1.5),
                        phase: rng.random_range(0.0..TAU),
                    },
                });
            }
        }
        let hand_paths = std::array::from_fn(|_| {
            let dir = random_unit(&mut rng);
            Oscillation {
                amplitude: (dir * translation_mm).into(),
                freq_hz: translation_hz,
                phase: rng.random_range(0.0..TAU),
            }
        });
        Self {
            duration_us,
            frame_rate,
            base: base_pose(),
            articulations,
            hand_paths,
            hands,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.duration_us == 0 {
            return Err(SimError::InvalidSpec("duration must be positive".into()));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(SimError::InvalidSpec("frame rate must be positive".into()));
        }
        if self.articulations.iter().any(|a| a.joint >= JOINTS) {
            return Err(SimError::InvalidSpec("articulation joint out of range".into()));
        }
        Ok(())
    }

    pub fn pose_at(&self, t_us: f64) -> HandPose3D {
        let t = t_us * 1e-6;
        let shift = [self.hand_paths[0].at(t), self.hand_paths[1].at(t)];
        let mut joints: [Vector3<f64>; JOINTS] = std::array::from_fn(|j| self.base[j] + shift[j / JOINTS_PER_HAND]);
        for a in &self.articulations {
            joints[a.joint] += a.wave.at(t);
        }
        let mut pose = HandPose3D::new(joints);
        if self.hands == HandSet::Single {
            for j in 0..JOINTS_PER_HAND {
                pose.valid[j] = false;
                pose.joints[j] = Vector3::repeat(f64::NAN);
            }
        }
        pose
    }

    /// Frame timestamps `round(k * 1e6 / frame_rate)` up to the duration.
    pub fn frame_times(&self) -> Vec<u64> {
        (0u64..)
            .map(|k| (k as f64 * 1e6 / self.frame_rate).round() as u64)
            .take_while(|t| *t <= self.duration_us)
            .collect()
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub const FRUSTUM_CHECK_STEP_US: u64 = 1000;

/// Samples the motion at the frame rate. Every joint must stay inside every
/// listed camera's image, checked at each frame and every millisecond.
pub fn synth_trajectory(spec: &MotionSpec, cameras: &[&CameraModel]) -> Result<HandPoseTrack, SimError> {
    spec.validate()?;
    let check = |t: u64| -> Result<HandPose3D, SimError> {
        let pose = spec.pose_at(t as f64);
        for j in (0..JOINTS).filter(|j| pose.valid[*j]) {
            for (view, cam) in cameras.iter().enumerate() {
                let inside = cam.project(&pose.joints[j]).is_ok_and(|(u, _)| cam.in_image(&u));
                if !inside {
                    return Err(SimError::OutOfFrustum { joint: j, t_us: t, view });
                }
            }
        }
        Ok(pose)
    };
    for t in (0..=spec.duration_us).step_by(FRUSTUM_CHECK_STEP_US as usize) {
        check(t)?;
    }
    let frames = spec
        .frame_times()
        .into_iter()
        .enumerate()
        .map(|(i, t)| Ok(TrackFrame::measured(i as u32, t, check(t)?)))
        .collect::<Result<Vec<_>, SimError>>()?;
    HandPoseTrack::new(frames).map_err(|e| SimError::InvalidSpec(e.to_string()))
}
