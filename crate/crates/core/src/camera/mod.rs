//! Calibrated pinhole cameras with Brown–Conrady distortion.
//!
//! Conventions: world points are in millimetres, `R`/`T` map world to camera
//! coordinates (`X_c = R X_w + T`), pixel coordinates place pixel centres on
//! integer positions.

mod calib;

pub use calib::{read_calibration, write_calibration, Calibration, CalibrationError};

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};
use thiserror::Error;

/// Minimum camera-frame depth accepted by [`CameraModel::project`].
pub const MIN_DEPTH_MM: f64 = 1e-6;
pub const UNDISTORT_MAX_ITERS: usize = 20;
pub const UNDISTORT_TOL: f64 = 1e-10;
const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("point is behind the camera (z = {z} mm)")]
    BehindCamera { z: f64 },
    #[error("depth must be positive, got {0} mm")]
    NonPositiveDepth(f64),
    #[error("undistortion did not converge in {UNDISTORT_MAX_ITERS} iterations")]
    UndistortDivergence,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("stereo rig optical centres coincide")]
    ZeroBaseline,
}

/// Radial `k1, k2, k3` and tangential `p1, p2` coefficients, stored in the
/// order `[k1, k2, p1, p2, k3]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Distortion(pub [f64; 5]);

impl Distortion {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    /// Forward model on normalised image coordinates.
    pub fn apply(&self, p: Vector2<f64>) -> Vector2<f64> {
        let [k1, k2, p1, p2, k3] = self.0;
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        Vector2::new(
            x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
            y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y,
        )
    }
}

/// Inverts [`Distortion::apply`] by fixed-point iteration.
pub fn undistort(distorted: Vector2<f64>, dist: &Distortion) -> Result<Vector2<f64>, CameraError> {
    if !distorted.iter().all(|v| v.is_finite()) || !dist.0.iter().all(|v| v.is_finite()) {
        return Err(CameraError::UndistortDivergence);
    }
    if dist.is_zero() {
        return Ok(distorted);
    }
    let [k1, k2, p1, p2, k3] = dist.0;
    let mut p = distorted;
    for _ in 0..UNDISTORT_MAX_ITERS {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        let dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        let next = Vector2::new((distorted.x - dx) / radial, (distorted.y - dy) / radial);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(CameraError::UndistortDivergence);
        }
        let delta = (next - p).amax();
        p = next;
        if delta < UNDISTORT_TOL {
            return Ok(p);
        }
    }
    Err(CameraError::UndistortDivergence)
}

/// Maps pixel coordinates onto `[-1, 1]^2` by `2 * (u_x / W, u_y / H) - 1`.
pub fn normalize_pixel(u: Vector2<f64>, width: f64, height: f64) -> Vector2<f64> {
    Vector2::new(2.0 * u.x / width - 1.0, 2.0 * u.y / height - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub dist: Distortion,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation, mm.
    pub translation: Vector3<f64>,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        dist: Distortion,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, CameraError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            dist,
            rotation,
            translation,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Distortion-free camera at the world origin looking down +z.
    pub fn pinhole(width: u32, height: u32, f: f64, cx: f64, cy: f64) -> Self {
        Self {
            fx: f,
            fy: f,
            cx,
            cy,
            dist: Distortion::default(),
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |m: &str| Err(CameraError::InvalidCamera(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .chain(self.dist.0.iter())
            .chain(self.rotation.iter())
            .chain(self.translation.iter())
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter");
        }
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if ortho >= ROTATION_TOL || (self.rotation.determinant() - 1.0).abs() >= ROTATION_TOL {
            return bad("rotation is not a proper orthonormal matrix");
        }
        Ok(())
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Optical centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// World point to pixel, returning the camera-frame depth alongside.
    pub fn project(&self, p: &Vector3<f64>) -> Result<(Vector2<f64>, f64), CameraError> {
        let pc = self.to_camera(p);
        if !(pc.z > MIN_DEPTH_MM) {
            return Err(CameraError::BehindCamera { z: pc.z });
        }
        let n = self.dist.apply(Vector2::new(pc.x / pc.z, pc.y / pc.z));
        Ok((Vector2::new(self.fx * n.x + self.cx, self.fy * n.y + self.cy), pc.z))
    }

    /// Pixel to undistorted normalised image coordinates.
    pub fn normalized_ray(&self, u: &Vector2<f64>) -> Result<Vector2<f64>, CameraError> {
        let d = Vector2::new((u.x - self.cx) / self.fx, (u.y - self.cy) / self.fy);
        undistort(d, &self.dist)
    }

    /// Lifts a pixel at the given camera-frame depth back into the world.
    pub fn back_project(&self, u: &Vector2<f64>, depth: f64) -> Result<Vector3<f64>, CameraError> {
        if !(depth > 0.0) {
            return Err(CameraError::NonPositiveDepth(depth));
        }
        let n = self.normalized_ray(u)?;
        let pc = Vector3::new(n.x * depth, n.y * depth, depth);
        Ok(self.rotation.transpose() * (pc - self.translation))
    }

    /// Jacobian of the distortion-free projection with respect to the world
    /// point.
    pub fn pinhole_jacobian(&self, p: &Vector3<f64>) -> Matrix2x3<f64> {
        let pc = self.to_camera(p);
        let iz = 1.0 / pc.z;
        let d = Matrix2x3::new(
            self.fx * iz,
            0.0,
            -self.fx * pc.x * iz * iz,
            0.0,
            self.fy * iz,
            -self.fy * pc.y * iz * iz,
        );
        d * self.rotation
    }

    pub fn in_image(&self, u: &Vector2<f64>) -> bool {
        u.x >= 0.0 && u.y >= 0.0 && u.x <= (self.width - 1) as f64 && u.y <= (self.height - 1) as f64
    }

    /// Extrinsics that keep projections unchanged after world points are
    /// mapped by `x -> rotation * x + translation`.
    pub fn with_world_transform(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let r = self.rotation * rotation.transpose();
        Self {
            rotation: r,
            translation: self.translation - r * translation,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub left: CameraModel,
    pub right: CameraModel,
}

impl StereoRig {
    pub fn new(left: CameraModel, right: CameraModel) -> Result<Self, CameraError> {
        left.validate()?;
        right.validate()?;
        if (left.center() - right.center()).norm() <= 1e-9 {
            return Err(CameraError::ZeroBaseline);
        }
        Ok(Self { left, right })
    }

    pub fn views(&self) -> [&CameraModel; 2] {
        [&self.left, &self.right]
    }

    pub fn baseline(&self) -> f64 {
        (self.left.center() - self.right.center()).norm()
    }

    pub fn with_world_transform(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            left: self.left.with_world_transform(rotation, translation),
            right: self.right.with_world_transform(rotation, translation),
        }
    }
}

/// Reference rig: 1280x720 event cameras, f = 800 px, 64 mm horizontal
/// baseline, left camera at the world origin.
pub fn reference_rig(dist: Distortion) -> StereoRig {
    let mut left = CameraModel::pinhole(1280, 720, 800.0, 640.0, 360.0);
    left.dist = dist;
    let right = CameraModel {
        translation: Vector3::new(-64.0, 0.0, 0.0),
        ..left
    };
    StereoRig::new(left, right).expect("reference rig is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn distorted_cam() -> CameraModel {
        let mut c = CameraModel::pinhole(1280, 720, 800.0, 640.0, 360.0);
        c.dist = Distortion([-0.05, 0.01, 2e-4, -1e-4, 0.0]);
        c.rotation = *Rotation3::from_euler_angles(0.02, -0.05, 0.01).matrix();
        c.translation = Vector3::new(10.0, -5.0, 3.0);
        c.validate().unwrap();
        c
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let c = distorted_cam();
        let p = c.rotation.transpose() * (Vector3::new(0.0, 0.0, 420.0) - c.translation);
        let (u, z) = c.project(&p).unwrap();
        assert!((u - Vector2::new(640.0, 360.0)).norm() < 1e-9);
        assert!((z - 420.0).abs() < 1e-9);
    }

    #[test]
    fn pinhole_arithmetic() {
        let c = CameraModel::pinhole(10, 10, 1.0, 0.0, 0.0);
        let (u, z) = c.project(&Vector3::new(1.0, 2.0, 2.0)).unwrap();
        assert_eq!(u, Vector2::new(0.5, 1.0));
        assert_eq!(z, 2.0);
        assert!(matches!(
            c.project(&Vector3::new(0.0, 0.0, 0.0)),
            Err(CameraError::BehindCamera { .. })
        ));
    }

    #[test]
    fn zero_distortion_equals_pinhole() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = CameraModel::pinhole(1280, 720, 800.0, 640.0, 360.0);
        for _ in 0..1000 {
            let p = Vector3::new(
                rng.random_range(-300.0..300.0),
                rng.random_range(-200.0..200.0),
                rng.random_range(100.0..900.0),
            );
            let (u, _) = c.project(&p).unwrap();
            let expect = Vector2::new(800.0 * p.x / p.z + 640.0, 800.0 * p.y / p.z + 360.0);
            assert!((u - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn back_project_basics() {
        let c = CameraModel::pinhole(1280, 720, 800.0, 640.0, 360.0);
        assert_eq!(
            c.back_project(&Vector2::new(640.0, 360.0), 600.0).unwrap(),
            Vector3::new(0.0, 0.0, 600.0)
        );
        assert_eq!(
            c.back_project(&Vector2::new(1.0, 1.0), 0.0),
            Err(CameraError::NonPositiveDepth(0.0))
        );
    }

    #[test]
    fn back_project_round_trip_with_distortion() {
        let c = distorted_cam();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let u = Vector2::new(rng.random_range(0.0..1279.0), rng.random_range(0.0..719.0));
            let d = rng.random_range(150.0..1500.0);
            let p = c.back_project(&u, d).unwrap();
            let (back, z) = c.project(&p).unwrap();
            assert!((z - d).abs() < 1e-9);
            worst = worst.max((back - u).norm());
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn undistort_inverts_forward_model() {
        let d = Distortion([-0.1, 0.0, 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = Vector2::new(rng.random_range(-0.6..0.6), rng.random_range(-0.4..0.4));
            let back = undistort(d.apply(p), &d).unwrap();
            assert!((back - p).amax() < 1e-8);
        }
        let p = Vector2::new(0.3, -0.2);
        assert_eq!(undistort(p, &Distortion::default()).unwrap(), p);
        assert_eq!(
            undistort(Vector2::new(f64::NAN, 0.0), &d),
            Err(CameraError::UndistortDivergence)
        );
        // strong barrel distortion far off-axis does not settle
        let wild = Distortion([-0.9, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            undistort(Vector2::new(3.0, 3.0), &wild),
            Err(CameraError::UndistortDivergence)
        );
    }

    #[test]
    fn normalize_pixel_corners_and_midpoint() {
        assert_eq!(normalize_pixel(Vector2::new(0.0, 0.0), 1280.0, 720.0), Vector2::new(-1.0, -1.0));
        assert_eq!(normalize_pixel(Vector2::new(1280.0, 720.0), 1280.0, 720.0), Vector2::new(1.0, 1.0));
        assert_eq!(normalize_pixel(Vector2::new(640.0, 360.0), 1280.0, 720.0), Vector2::new(0.0, 0.0));
        // affine
        let (a, b, t) = (Vector2::new(3.0, 700.0), Vector2::new(-50.0, 20.0), 0.3);
        let lhs = normalize_pixel(a * t + b * (1.0 - t), 1280.0, 720.0);
        let rhs = normalize_pixel(a, 1280.0, 720.0) * t + normalize_pixel(b, 1280.0, 720.0) * (1.0 - t);
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn rigid_consistency() {
        let c = distorted_cam();
        let q = *Rotation3::from_euler_angles(0.4, -0.2, 1.1).matrix();
        let s = Vector3::new(120.0, -40.0, 7.0);
        let moved = c.with_world_transform(&q, &s);
        assert!((moved.rotation.transpose() * moved.rotation - Matrix3::identity()).amax() < 1e-9);
        let p = Vector3::new(20.0, -30.0, 450.0);
        let (a, _) = c.project(&p).unwrap();
        let (b, _) = moved.project(&(q * p + s)).unwrap();
        assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn validation() {
        let mut c = CameraModel::pinhole(10, 10, 1.0, 0.0, 0.0);
        c.rotation[(0, 0)] = 1.01;
        assert!(c.validate().is_err());
        let flip = CameraModel {
            rotation: Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)),
            ..CameraModel::pinhole(10, 10, 1.0, 0.0, 0.0)
        };
        assert!(flip.validate().is_err());
        let c = CameraModel::pinhole(10, 10, 1.0, 0.0, 0.0);
        assert_eq!(StereoRig::new(c, c), Err(CameraError::ZeroBaseline));
        assert!((reference_rig(Distortion::default()).baseline() - 64.0).abs() < 1e-12);
    }
}
