use nalgebra::Vector3;

use super::depth::{fill_depth, DepthMap};
use super::AnnotationError;
use crate::camera::{CameraModel, StereoRig};
use crate::pose::{HandPose3D, Keypoints2D, JOINTS};

pub const DEFAULT_MAX_GAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VisibilityFlag {
    Original,
    Interpolated,
    Invalid,
}

impl VisibilityFlag {
    pub fn as_char(self) -> char {
        match self {
            Self::Original => 'O',
            Self::Interpolated => 'I',
            Self::Invalid => 'X',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'O' => Some(Self::Original),
            'I' => Some(Self::Interpolated),
            'X' => Some(Self::Invalid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackFrame {
    pub frame_id: u32,
    pub t_us: u64,
    pub pose: HandPose3D,
    pub flags: [VisibilityFlag; JOINTS],
}

impl TrackFrame {
    /// Frame whose flags are `Original` for valid joints and `Invalid` otherwise.
    pub fn measured(frame_id: u32, t_us: u64, pose: HandPose3D) -> Self {
        let flags = pose
            .valid
            .map(|v| if v { VisibilityFlag::Original } else { VisibilityFlag::Invalid });
        Self {
            frame_id,
            t_us,
            pose,
            flags,
        }
    }
}

/// Time-ordered 3D labels with per-joint visibility flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HandPoseTrack {
    frames: Vec<TrackFrame>,
}

impl HandPoseTrack {
    pub fn new(frames: Vec<TrackFrame>) -> Result<Self, AnnotationError> {
        if let Some(i) = frames.windows(2).position(|w| w[1].t_us <= w[0].t_us) {
            return Err(AnnotationError::NonMonotonicTime { frame: i + 1 });
        }
        for (i, f) in frames.iter().enumerate() {
            for j in 0..JOINTS {
                let invalid = f.flags[j] == VisibilityFlag::Invalid;
                if invalid == f.pose.valid[j] {
                    return Err(AnnotationError::InconsistentFlags { frame: i, joint: j });
                }
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[TrackFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn count(&self, flag: VisibilityFlag) -> usize {
        self.frames.iter().flat_map(|f| f.flags.iter()).filter(|f| **f == flag).count()
    }
}

/// Back-projects each valid 2D keypoint through the depth camera using the
/// hole-filled depth at that pixel.
pub fn lift_keypoints(
    kp: &Keypoints2D,
    dm: &DepthMap,
    cam: &CameraModel,
    window: usize,
) -> (HandPose3D, [VisibilityFlag; JOINTS]) {
    let mut pose = HandPose3D::invalid();
    let mut flags = [VisibilityFlag::Invalid; JOINTS];
    for j in 0..JOINTS {
        let Some(u) = kp.get(j) else { continue };
        let Some(z) = fill_depth(dm, &u, window) else { continue };
        if let Ok(p) = cam.back_project(&u, z) {
            pose.joints[j] = p;
            pose.valid[j] = true;
            flags[j] = VisibilityFlag::Original;
        }
    }
    (pose, flags)
}

/// Fills runs of at most `max_gap` invalid frames that have valid anchors on
/// both sides, per joint, by linear interpolation in time.
pub fn interpolate_track(track: &HandPoseTrack, max_gap: usize) -> HandPoseTrack {
    let mut frames = track.frames.clone();
    let n = frames.len();
    for j in 0..JOINTS {
        let mut i = 0;
        while i < n {
            if frames[i].pose.valid[j] {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && !frames[i].pose.valid[j] {
                i += 1;
            }
            let len = i - start;
            if start == 0 || i == n || len > max_gap {
                continue;
            }
            let (a, b) = (&track.frames[start - 1], &track.frames[i]);
            let (pa, pb) = (a.pose.joints[j], b.pose.joints[j]);
            let span = (b.t_us - a.t_us) as f64;
            for f in frames.iter_mut().take(i).skip(start) {
                let s = (f.t_us - a.t_us) as f64 / span;
                f.pose.joints[j] = lerp(&pa, &pb, s);
                f.pose.valid[j] = true;
                f.flags[j] = VisibilityFlag::Interpolated;
            }
        }
    }
    HandPoseTrack { frames }
}

pub fn lerp(a: &Vector3<f64>, b: &Vector3<f64>, s: f64) -> Vector3<f64> {
    a + (b - a) * s
}

/// Per-view state of a projected label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewFlag {
    Visible,
    OutOfImage,
    BehindCamera,
    /// The 3D joint itself is invalid.
    Absent,
}

impl ViewFlag {
    pub fn as_char(self) -> char {
        match self {
            Self::Visible => 'V',
            Self::OutOfImage => 'F',
            Self::BehindCamera => 'B',
            Self::Absent => '-',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'V' => Some(Self::Visible),
            'F' => Some(Self::OutOfImage),
            'B' => Some(Self::BehindCamera),
            '-' => Some(Self::Absent),
            _ => None,
        }
    }
}

/// 2D labels for one view. `kp.valid` is set for visible joints only;
/// out-of-image joints keep their coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewLabels {
    pub kp: Keypoints2D,
    pub flags: [ViewFlag; JOINTS],
}

pub fn project_view(pose: &HandPose3D, cam: &CameraModel) -> ViewLabels {
    let mut kp = Keypoints2D::invalid();
    let mut flags = [ViewFlag::Absent; JOINTS];
    for j in 0..JOINTS {
        if !pose.valid[j] {
            continue;
        }
        match cam.project(&pose.joints[j]) {
            Ok((u, _)) => {
                kp.coords[j] = u;
                if cam.in_image(&u) {
                    kp.valid[j] = true;
                    flags[j] = ViewFlag::Visible;
                } else {
                    flags[j] = ViewFlag::OutOfImage;
                }
            }
            Err(_) => flags[j] = ViewFlag::BehindCamera,
        }
    }
    ViewLabels { kp, flags }
}

/// Stereo 2D labels for every frame, `[left, right]`.
pub fn project_annotations(track: &HandPoseTrack, rig: &StereoRig) -> Vec<[ViewLabels; 2]> {
    track
        .frames
        .iter()
        .map(|f| [project_view(&f.pose, &rig.left), project_view(&f.pose, &rig.right)])
        .collect()
}
