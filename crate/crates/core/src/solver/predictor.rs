use nalgebra::{Matrix3, Vector3};

use super::RefinementState;
use crate::camera::StereoRig;
use crate::heatmap::DecodedKeypoints2D;
use crate::pose::{HandPose3D, JOINTS};

pub const DEFAULT_DAMPING: f64 = 1e-6;

/// Proposes a per-joint 3D correction from the current state and the 2D
/// targets decoded around its reprojections.
///
/// Implementations must return finite residuals and a zero residual for any
/// joint whose confidences are zero in both views.
pub trait ResidualPredictor: Sync {
    fn predict(
        &self,
        state: &RefinementState,
        left: &DecodedKeypoints2D,
        right: &DecodedKeypoints2D,
        rig: &StereoRig,
    ) -> [Vector3<f64>; JOINTS];
}

/// One damped Gauss–Newton step per joint on the confidence-weighted squared
/// reprojection error. The Jacobian uses the distortion-free projection.
#[derive(Debug, Clone, Copy)]
pub struct GaussNewton {
    pub damping: f64,
}

impl Default for GaussNewton {
    fn default() -> Self {
        Self {
            damping: DEFAULT_DAMPING,
        }
    }
}

impl GaussNewton {
    pub fn step(&self, p: &Vector3<f64>, j: usize, targets: [&DecodedKeypoints2D; 2], rig: &StereoRig) -> Vector3<f64> {
        let mut h = Matrix3::zeros();
        let mut g = Vector3::zeros();
        let mut total = 0.0;
        for (cam, t) in rig.views().into_iter().zip(targets) {
            let c = t.confidence[j];
            if !(c > 0.0) {
                continue;
            }
            let Ok((u, _)) = cam.project(p) else { continue };
            let jac = cam.pinhole_jacobian(p);
            let r = u - t.coords[j];
            h += jac.transpose() * jac * c;
            g += jac.transpose() * r * c;
            total += c;
        }
        if total == 0.0 {
            return Vector3::zeros();
        }
        h += Matrix3::identity() * self.damping;
        match h.cholesky() {
            Some(ch) => {
                let d = -ch.solve(&g);
                if d.iter().all(|v| v.is_finite()) {
                    d
                } else {
                    Vector3::zeros()
                }
            }
            None => Vector3::zeros(),
        }
    }
}

impl ResidualPredictor for GaussNewton {
    fn predict(
        &self,
        state: &RefinementState,
        left: &DecodedKeypoints2D,
        right: &DecodedKeypoints2D,
        rig: &StereoRig,
    ) -> [Vector3<f64>; JOINTS] {
        let mut out = [Vector3::zeros(); JOINTS];
        for (j, d) in out.iter_mut().enumerate() {
            if state.pose.valid[j] {
                *d = self.step(&state.pose.joints[j], j, [left, right], rig);
            }
        }
        out
    }
}

/// Returns `ground_truth - current` for every joint that has evidence.
#[derive(Debug, Clone, Copy)]
pub struct OraclePredictor {
    pub ground_truth: HandPose3D,
}

impl ResidualPredictor for OraclePredictor {
    fn predict(
        &self,
        state: &RefinementState,
        left: &DecodedKeypoints2D,
        right: &DecodedKeypoints2D,
        _rig: &StereoRig,
    ) -> [Vector3<f64>; JOINTS] {
        let mut out = [Vector3::zeros(); JOINTS];
        for (j, d) in out.iter_mut().enumerate() {
            let evidence = left.confidence[j] + right.confidence[j] > 0.0;
            if evidence && state.pose.valid[j] && self.ground_truth.valid[j] {
                *d = self.ground_truth.joints[j] - state.pose.joints[j];
            }
        }
        out
    }
}
