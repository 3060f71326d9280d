use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SimConfig, SimOutput};
use crate::annotation::{write_depth, write_kp2d, AnnotationFile};
use crate::camera::{write_calibration, Calibration};
use crate::event::{write_events, EventFormat};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub role: String,
    /// Relative to the dataset directory.
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub scenario: String,
    pub seed: u64,
    pub frames: usize,
    pub events_left: usize,
    pub events_right: usize,
    pub config: SimConfig,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn path_of(&self, role: &str) -> Option<&str> {
        self.files.iter().find(|f| f.role == role).map(|f| f.path.as_str())
    }
}

fn invalid(e: impl ToString) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

/// Writes events (`binary_v1`), calibration, the ground-truth annotation with
/// stereo 2D labels, depth-camera keypoints, depth maps and a manifest.
pub fn export_dataset(out: &SimOutput, dir: &Path) -> io::Result<Manifest> {
    fs::create_dir_all(dir.join("depth"))?;
    let mut files = Vec::new();
    let mut put = |role: &str, rel: String, bytes: &[u8]| -> io::Result<()> {
        fs::write(dir.join(&rel), bytes)?;
        files.push(FileEntry {
            role: role.to_string(),
            path: rel,
            bytes: bytes.len() as u64,
        });
        Ok(())
    };
    put("events_left", "left.evs".into(), &write_events(&out.left, EventFormat::BinaryV1))?;
    put("events_right", "right.evs".into(), &write_events(&out.right, EventFormat::BinaryV1))?;
    let calib = Calibration {
        rig: out.rig,
        depth: Some(out.depth_camera),
    };
    put("calibration", "calib.toml".into(), write_calibration(&calib).map_err(invalid)?.as_bytes())?;

    let mut ann = AnnotationFile::from_track(&out.track, Some(&out.stereo_2d));
    ann.meta.insert("scenario".into(), out.tags.label());
    ann.meta.insert("source".into(), "simulator".into());
    put("ground_truth", "gt.ann".into(), ann.to_text().as_bytes())?;
    put("keypoints_depth", "kp2d.csv".into(), write_kp2d(&out.depth_keypoints).as_bytes())?;
    for dm in &out.depth {
        put("depth", format!("depth/{:06}.dpm", dm.frame_id), &write_depth(dm))?;
    }

    let manifest = Manifest {
        scenario: out.tags.label(),
        seed: out.config.seed,
        frames: out.track.len(),
        events_left: out.left.len(),
        events_right: out.right.len(),
        config: out.config.clone(),
        files,
    };
    fs::write(dir.join(MANIFEST_FILE), toml::to_string(&manifest).map_err(invalid)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> io::Result<Manifest> {
    toml::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?).map_err(invalid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{read_depth, read_kp2d};
    use crate::camera::read_calibration;
    use crate::event::parse_events;
    use crate::par::Execution;
    use crate::sim::{simulate, HoleMask};

    #[test]
    fn export_round_trip() {
        let cfg = SimConfig {
            duration_us: 400_000,
            noise_rate: 0.001,
            depth_holes: HoleMask::Random { count: 5, radius: 3.0 },
            ..SimConfig::default()
        };
        let out = simulate(&cfg, Execution::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = export_dataset(&out, dir.path()).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), m);

        for entry in &m.files {
            let meta = fs::metadata(dir.path().join(&entry.path)).unwrap();
            assert_eq!(meta.len(), entry.bytes, "{}", entry.path);
        }
        assert_eq!(m.files.iter().filter(|f| f.role == "depth").count(), out.track.len());

        let left = parse_events(&fs::read(dir.path().join(m.path_of("events_left").unwrap())).unwrap(), EventFormat::BinaryV1).unwrap();
        assert_eq!(left, out.left);
        let calib = read_calibration(&fs::read_to_string(dir.path().join("calib.toml")).unwrap()).unwrap();
        assert_eq!(calib.rig, out.rig);
        let ann = AnnotationFile::from_text(&fs::read_to_string(dir.path().join("gt.ann")).unwrap()).unwrap();
        assert_eq!(ann.frames.len(), out.track.len());
        assert_eq!(ann.track().unwrap(), out.track);
        let kp = read_kp2d(&fs::read_to_string(dir.path().join("kp2d.csv")).unwrap()).unwrap();
        assert_eq!(kp, out.depth_keypoints);
        let dm = read_depth(&fs::read(dir.path().join("depth/000003.dpm")).unwrap()).unwrap();
        assert_eq!(dm, out.depth[3]);
    }
}
