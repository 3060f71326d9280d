//! Synthetic stereo event streams with exact 3D, 2D and depth ground truth.
//!
//! Events come from projected keypoint motion rather than photometric
//! rendering, and background clutter is spatially uniform Poisson noise. The
//! lighting condition is modelled purely as a noise-rate tier.

mod export;
mod motion;
mod render;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{export_dataset, read_manifest, FileEntry, Manifest, MANIFEST_FILE};
pub use motion::{base_pose, synth_trajectory, Articulation, HandSet, MotionSpec, Oscillation, BASE_WRISTS, FRUSTUM_CHECK_STEP_US};
pub use render::{carve_disk, render_depth, render_events, EventParams, HoleMask, DEFAULT_SAMPLE_STEP_US, SPLAT_RADIUS_PX};

use crate::annotation::{project_annotations, project_view, DepthMap, HandPoseTrack, Kp2dFrame, ViewLabels};
use crate::camera::{reference_rig, CameraModel, Distortion, StereoRig};
use crate::event::EventStream;
use crate::par::{self, Execution};

/// Noise rates above this are tagged as low light.
pub const LOW_LIGHT_THRESHOLD: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("joint {joint} leaves the image of camera {view} at t = {t_us} us")]
    OutOfFrustum { joint: usize, t_us: u64, view: usize },
    #[error("invalid motion spec: {0}")]
    InvalidSpec(String),
}

/// Virtual depth sensor between the event cameras: 640x480, f = 500 px.
pub fn reference_depth_camera() -> CameraModel {
    CameraModel {
        translation: Vector3::new(-32.0, 0.0, 0.0),
        ..CameraModel::pinhole(640, 480, 500.0, 320.0, 240.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lighting {
    Normal,
    Low,
}

impl Lighting {
    pub fn from_noise_rate(rate: f64) -> Self {
        if rate > LOW_LIGHT_THRESHOLD {
            Self::Low
        } else {
            Self::Normal
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Low => "low",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioTags {
    pub lighting: Lighting,
    pub hands: HandSet,
}

impl ScenarioTags {
    /// `"<lighting> <hands>"`, e.g. `normal bimanual`.
    pub fn label(&self) -> String {
        let hands = match self.hands {
            HandSet::Bimanual => "bimanual",
            HandSet::Single => "single",
        };
        format!("{} {hands}", self.lighting.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub duration_us: u64,
    pub frame_rate: f64,
    pub seed: u64,
    pub hands: HandSet,
    pub articulation_mm: f64,
    pub translation_mm: f64,
    pub translation_hz: f64,
    pub contrast_step: f64,
    pub noise_rate: f64,
    pub sample_step_us: u64,
    /// Event-camera distortion, `[k1, k2, p1, p2, k3]`.
    pub distortion: [f64; 5],
    pub depth_holes: HoleMask,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_us: 5_000_000,
            frame_rate: 30.0,
            seed: 1,
            hands: HandSet::Bimanual,
            articulation_mm: 8.0,
            translation_mm: 30.0,
            translation_hz: 0.3,
            contrast_step: 1.0,
            noise_rate: 0.0,
            sample_step_us: DEFAULT_SAMPLE_STEP_US,
            distortion: [0.0; 5],
            depth_holes: HoleMask::None,
        }
    }
}

impl SimConfig {
    pub fn motion(&self) -> MotionSpec {
        MotionSpec::seeded(
            self.duration_us,
            self.frame_rate,
            self.seed,
            self.articulation_mm,
            self.translation_mm,
            self.translation_hz,
            self.hands,
        )
    }

    pub fn event_params(&self) -> EventParams {
        EventParams {
            contrast_step: self.contrast_step,
            noise_rate: self.noise_rate,
            seed: self.seed,
            sample_step_us: self.sample_step_us,
        }
    }

    pub fn tags(&self) -> ScenarioTags {
        ScenarioTags {
            lighting: Lighting::from_noise_rate(self.noise_rate),
            hands: self.hands,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.contrast_step > 0.0) {
            return Err(SimError::InvalidSpec("contrast step must be positive".into()));
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return Err(SimError::InvalidSpec("noise rate must be non-negative".into()));
        }
        if self.duration_us > u32::MAX as u64 * 1000 {
            return Err(SimError::InvalidSpec("duration too long".into()));
        }
        self.motion().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub config: SimConfig,
    pub rig: StereoRig,
    pub depth_camera: CameraModel,
    pub left: EventStream,
    pub right: EventStream,
    /// Ground truth, every valid joint flagged original.
    pub track: HandPoseTrack,
    /// `[left, right]` 2D ground truth per frame.
    pub stereo_2d: Vec<[ViewLabels; 2]>,
    /// Ground-truth keypoints in the depth camera per frame.
    pub depth_keypoints: Vec<Kp2dFrame>,
    pub depth: Vec<DepthMap>,
    pub tags: ScenarioTags,
}

pub fn simulate(config: &SimConfig, exec: Execution) -> Result<SimOutput, SimError> {
    config.validate()?;
    let rig = reference_rig(Distortion(config.distortion));
    let depth_camera = reference_depth_camera();
    let spec = config.motion();
    let track = synth_trajectory(&spec, &[&rig.left, &rig.right, &depth_camera])?;
    let (left, right) = render_events(|t| spec.pose_at(t), config.duration_us, &rig, &config.event_params(), exec);
    let stereo_2d = project_annotations(&track, &rig);
    let depth_keypoints = track
        .frames()
        .iter()
        .map(|f| Kp2dFrame {
            frame_id: f.frame_id,
            t_us: f.t_us,
            kp: project_view(&f.pose, &depth_camera).kp,
        })
        .collect();
    let depth = par::map(exec, track.frames(), |f| {
        render_depth(&f.pose, &depth_camera, f.frame_id, &config.depth_holes, config.seed)
    });
    Ok(SimOutput {
        config: config.clone(),
        rig,
        depth_camera,
        left,
        right,
        track,
        stereo_2d,
        depth_keypoints,
        depth,
        tags: config.tags(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::JOINTS;
    use crate::solver::triangulate;

    fn short() -> SimConfig {
        SimConfig {
            duration_us: 1_000_000,
            ..SimConfig::default()
        }
    }

    #[test]
    fn simulation_is_deterministic_across_schedules() {
        let cfg = SimConfig {
            noise_rate: 0.002,
            depth_holes: HoleMask::Random { count: 20, radius: 4.0 },
            ..short()
        };
        let a = simulate(&cfg, Execution::Sequential).unwrap();
        let b = simulate(&cfg, Execution::default()).unwrap();
        assert_eq!(a, b);
        assert!(!a.left.is_empty() && !a.right.is_empty());
        assert_eq!(a.tags.label(), "normal bimanual");
    }

    #[test]
    fn events_follow_joint_paths() {
        let out = simulate(&short(), Execution::default()).unwrap();
        let spec = out.config.motion();
        for (stream, cam) in [(&out.left, &out.rig.left), (&out.right, &out.rig.right)] {
            assert!(stream.events().windows(2).all(|w| w[0].t <= w[1].t));
            for e in stream.events().iter().step_by(7) {
                assert!(e.t <= out.config.duration_us);
                let near = (e.t.saturating_sub(1)..=e.t + 1).any(|t| {
                    let pose = spec.pose_at(t as f64);
                    (0..JOINTS).any(|j| {
                        let (u, _) = cam.project(&pose.joints[j]).unwrap();
                        (u - nalgebra::Vector2::new(e.x as f64, e.y as f64)).norm() <= out.config.contrast_step + 1.0
                    })
                });
                assert!(near, "event {e:?} is far from every joint");
            }
        }
    }

    #[test]
    fn exported_2d_triangulates_to_track() {
        let out = simulate(&short(), Execution::default()).unwrap();
        for (f, [l, r]) in out.track.frames().iter().zip(&out.stereo_2d) {
            let est = triangulate(&l.kp, &r.kp, &[1.0; JOINTS], &[1.0; JOINTS], &out.rig);
            for j in 0..JOINTS {
                assert!((est.joints[j] - f.pose.joints[j]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn single_hand_and_low_light_tags() {
        let cfg = SimConfig {
            hands: HandSet::Single,
            noise_rate: 0.02,
            duration_us: 200_000,
            ..SimConfig::default()
        };
        let out = simulate(&cfg, Execution::default()).unwrap();
        assert_eq!(out.tags.label(), "low single");
        assert!(out.track.frames().iter().all(|f| f.pose.valid_count() == 21));
    }
}
