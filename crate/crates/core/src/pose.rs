//! Two-hand joint layouts shared by every stage.
//!
//! Joints follow the 21-point hand convention per hand (0 wrist, 1–4 thumb,
//! 5–8 index, 9–12 middle, 13–16 ring, 17–20 little finger). Left-hand joints
//! occupy indices 0–20 and right-hand joints 21–41.

use nalgebra::{Vector2, Vector3};

pub const JOINTS_PER_HAND: usize = 21;
pub const JOINTS: usize = 2 * JOINTS_PER_HAND;

/// Index of the wrist within one hand.
pub const WRIST: usize = 0;
/// Index of the middle-finger MCP joint within one hand.
pub const MIDDLE_MCP: usize = 9;

/// 3D pose in millimetres, world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose3D {
    pub joints: [Vector3<f64>; JOINTS],
    pub valid: [bool; JOINTS],
}

impl HandPose3D {
    pub fn new(joints: [Vector3<f64>; JOINTS]) -> Self {
        Self {
            joints,
            valid: [true; JOINTS],
        }
    }

    pub fn invalid() -> Self {
        Self {
            joints: [Vector3::repeat(f64::NAN); JOINTS],
            valid: [false; JOINTS],
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Applies `x -> rotation * x + translation` to every joint.
    pub fn transformed(&self, rotation: &nalgebra::Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let mut out = *self;
        for j in out.joints.iter_mut() {
            *j = rotation * *j + translation;
        }
        out
    }
}

/// 2D keypoints in pixels for one view, with per-joint validity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoints2D {
    pub coords: [Vector2<f64>; JOINTS],
    pub valid: [bool; JOINTS],
}

impl Keypoints2D {
    pub fn new(coords: [Vector2<f64>; JOINTS]) -> Self {
        Self {
            coords,
            valid: [true; JOINTS],
        }
    }

    pub fn invalid() -> Self {
        Self {
            coords: [Vector2::repeat(f64::NAN); JOINTS],
            valid: [false; JOINTS],
        }
    }

    pub fn get(&self, j: usize) -> Option<Vector2<f64>> {
        self.valid[j].then_some(self.coords[j])
    }
}
