//! TOML calibration documents.
//!
//! ```toml
//! [left]
//! width = 1280
//! height = 720
//! fx = 800.0
//! fy = 800.0
//! cx = 640.0
//! cy = 360.0
//! dist = [0.0, 0.0, 0.0, 0.0, 0.0]   # k1, k2, p1, p2, k3
//! R = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]   # row-major, world -> camera
//! T = [0.0, 0.0, 0.0]                # mm
//!
//! [right]
//! # same fields
//!
//! [depth]   # optional depth-sensor camera used by the annotation pipeline
//! # same fields
//! ```

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CameraError, CameraModel, Distortion, StereoRig};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("calibration serialise error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub rig: StereoRig,
    pub depth: Option<CameraModel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRecord {
    width: u32,
    height: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    dist: [f64; 5],
    #[serde(rename = "R")]
    r: [f64; 9],
    #[serde(rename = "T")]
    t: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    left: CameraRecord,
    right: CameraRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<CameraRecord>,
}

impl From<&CameraModel> for CameraRecord {
    fn from(c: &CameraModel) -> Self {
        let mut r = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[i * 3 + j] = c.rotation[(i, j)];
            }
        }
        Self {
            width: c.width,
            height: c.height,
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            dist: c.dist.0,
            r,
            t: c.translation.into(),
        }
    }
}

impl TryFrom<CameraRecord> for CameraModel {
    type Error = CameraError;

    fn try_from(r: CameraRecord) -> Result<Self, CameraError> {
        CameraModel::new(
            r.width,
            r.height,
            r.fx,
            r.fy,
            r.cx,
            r.cy,
            Distortion(r.dist),
            Matrix3::from_row_slice(&r.r),
            Vector3::from(r.t),
        )
    }
}

pub fn read_calibration(text: &str) -> Result<Calibration, CalibrationError> {
    let doc: CalibrationDoc = toml::from_str(text)?;
    let rig = StereoRig::new(doc.left.try_into()?, doc.right.try_into()?)?;
    let depth = doc.depth.map(CameraModel::try_from).transpose()?;
    Ok(Calibration { rig, depth })
}

pub fn write_calibration(calib: &Calibration) -> Result<String, CalibrationError> {
    let doc = CalibrationDoc {
        left: (&calib.rig.left).into(),
        right: (&calib.rig.right).into(),
        depth: calib.depth.as_ref().map(Into::into),
    };
    Ok(toml::to_string(&doc)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::reference_rig;
    use nalgebra::Rotation3;

    #[test]
    fn round_trip_is_exact() {
        let mut rig = reference_rig(Distortion([-0.031, 0.0042, 1e-4, -3e-5, 0.0]));
        rig.right.rotation = *Rotation3::from_euler_angles(0.001, 0.0123, -0.002).matrix();
        let mut depth = rig.left;
        depth.width = 320;
        let calib = Calibration { rig, depth: Some(depth) };
        let text = write_calibration(&calib).unwrap();
        assert_eq!(read_calibration(&text).unwrap(), calib);
    }

    #[test]
    fn missing_field_is_rejected() {
        let calib = Calibration { rig: reference_rig(Distortion::default()), depth: None };
        let text = write_calibration(&calib).unwrap();
        let broken: String = text.lines().filter(|l| !l.starts_with("fy")).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_calibration(&broken), Err(CalibrationError::Parse(_))));
    }

    #[test]
    fn invalid_rotation_is_rejected() {
        let calib = Calibration { rig: reference_rig(Distortion::default()), depth: None };
        let text = write_calibration(&calib).unwrap().replacen("R = [1.0", "R = [1.5", 1);
        assert!(matches!(read_calibration(&text), Err(CalibrationError::Camera(_))));
    }
}
