use nalgebra::{Matrix4x3, Vector2, Vector3, Vector4};

use crate::camera::{CameraModel, StereoRig};
use crate::pose::{HandPose3D, Keypoints2D, JOINTS};

/// Joints whose stacked system exceeds this singular-value ratio are flagged
/// invalid.
pub const MAX_CONDITION: f64 = 1e12;

/// Appends the two linear constraints a calibrated observation places on a
/// world point, written in undistorted normalised coordinates and scaled by
/// the observation confidence.
fn rows(cam: &CameraModel, u: &Vector2<f64>, conf: f64) -> Option<[(Vector3<f64>, f64); 2]> {
    let n = cam.normalized_ray(u).ok()?;
    let r = &cam.rotation;
    let t = &cam.translation;
    let r1 = r.row(0).transpose();
    let r2 = r.row(1).transpose();
    let r3 = r.row(2).transpose();
    Some([
        ((r3 * n.x - r1) * conf, (t.x - n.x * t.z) * conf),
        ((r3 * n.y - r2) * conf, (t.y - n.y * t.z) * conf),
    ])
}

fn solve_joint(rig: &StereoRig, obs: [(Option<Vector2<f64>>, f64); 2]) -> Option<Vector3<f64>> {
    let mut a = Matrix4x3::zeros();
    let mut b = Vector4::zeros();
    for (v, (cam, (u, conf))) in rig.views().into_iter().zip(obs).enumerate() {
        let u = u.filter(|_| conf > 0.0)?;
        let [row_x, row_y] = rows(cam, &u, conf)?;
        a.set_row(2 * v, &row_x.0.transpose());
        b[2 * v] = row_x.1;
        a.set_row(2 * v + 1, &row_y.0.transpose());
        b[2 * v + 1] = row_y.1;
    }
    let svd = a.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return None;
    }
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let ch = ata.cholesky()?;
    let mut x = ch.solve(&atb);
    // one round of iterative refinement on the normal equations
    x += ch.solve(&(a.transpose() * (b - a * x)));
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Confidence-weighted linear triangulation of every joint. Joints without
/// positive confidence in both views, or with an ill-conditioned system, come
/// back invalid.
pub fn triangulate(
    left: &Keypoints2D,
    right: &Keypoints2D,
    conf_left: &[f64; JOINTS],
    conf_right: &[f64; JOINTS],
    rig: &StereoRig,
) -> HandPose3D {
    let mut pose = HandPose3D::invalid();
    for j in 0..JOINTS {
        let obs = [(left.get(j), conf_left[j]), (right.get(j), conf_right[j])];
        if let Some(p) = solve_joint(rig, obs) {
            pose.joints[j] = p;
            pose.valid[j] = true;
        }
    }
    pose
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reprojection {
    pub left: Keypoints2D,
    pub right: Keypoints2D,
    /// `[left, right]` per joint; false for invalid joints.
    pub in_front: [[bool; 2]; JOINTS],
}

/// Projects every valid joint into both views. Behind-camera joints are
/// flagged per view instead of failing.
pub fn reproject_all(pose: &HandPose3D, rig: &StereoRig) -> Reprojection {
    let mut out = Reprojection {
        left: Keypoints2D::invalid(),
        right: Keypoints2D::invalid(),
        in_front: [[false; 2]; JOINTS],
    };
    for j in 0..JOINTS {
        if !pose.valid[j] {
            continue;
        }
        for (v, cam) in rig.views().into_iter().enumerate() {
            if let Ok((u, _)) = cam.project(&pose.joints[j]) {
                let kp = if v == 0 { &mut out.left } else { &mut out.right };
                kp.coords[j] = u;
                kp.valid[j] = true;
                out.in_front[j][v] = true;
            }
        }
    }
    out
}
