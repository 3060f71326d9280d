//! Semi-automatic label generation: lift 2D keypoints with depth, fill short
//! gaps in 3D, and project the result into both event cameras.
//!
//! # Text formats
//!
//! Annotation files are line oriented:
//!
//! ```text
//! evhand-annotation 1
//! meta max_gap 5
//! frame <frame_id> <t_us>
//! <X> <Y> <Z> <O|I|X>        42 lines, mm, NaN when invalid
//! view left                  optional, followed by
//! <u> <v> <V|F|B|->          42 lines, px
//! view right
//! ...
//! ```
//!
//! Keypoint files are CSV with one row per frame:
//! `frame_id,t_us,u0,v0,...,u41,v41`, `NaN` marking a missing joint.

mod depth;
mod track;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

pub use depth::{fill_depth, read_depth, write_depth, DepthMap, DEFAULT_FILL_WINDOW, DEPTH_HEADER_LEN, DEPTH_MAGIC};
pub use track::{
    interpolate_track, lerp, lift_keypoints, project_annotations, project_view, HandPoseTrack, TrackFrame, ViewFlag,
    ViewLabels, VisibilityFlag, DEFAULT_MAX_GAP,
};

use crate::camera::CameraModel;
use crate::par::{self, Execution};
use crate::pose::{HandPose3D, Keypoints2D, JOINTS};

pub const ANNOTATION_HEADER: &str = "evhand-annotation 1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("malformed depth map: {0}")]
    MalformedDepth(String),
    #[error("frame {frame}: timestamps must increase")]
    NonMonotonicTime { frame: usize },
    #[error("frame {frame}, joint {joint}: flag disagrees with validity")]
    InconsistentFlags { frame: usize, joint: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("depth map for frame {0} is missing")]
    MissingDepth(u32),
}

fn parse_err(line: usize, reason: impl Into<String>) -> AnnotationError {
    AnnotationError::Parse {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedFrame {
    pub frame: TrackFrame,
    /// `[left, right]` stereo labels.
    pub views: Option<[ViewLabels; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationFile {
    pub meta: BTreeMap<String, String>,
    pub frames: Vec<AnnotatedFrame>,
}

impl AnnotationFile {
    pub fn from_track(track: &HandPoseTrack, views: Option<&[[ViewLabels; 2]]>) -> Self {
        let frames = track
            .frames()
            .iter()
            .enumerate()
            .map(|(i, f)| AnnotatedFrame {
                frame: *f,
                views: views.map(|v| v[i]),
            })
            .collect();
        Self {
            meta: BTreeMap::new(),
            frames,
        }
    }

    pub fn track(&self) -> Result<HandPoseTrack, AnnotationError> {
        HandPoseTrack::new(self.frames.iter().map(|f| f.frame).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{ANNOTATION_HEADER}").unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "meta {k} {v}").unwrap();
        }
        for f in &self.frames {
            writeln!(s, "frame {} {}", f.frame.frame_id, f.frame.t_us).unwrap();
            for j in 0..JOINTS {
                let p = &f.frame.pose.joints[j];
                let (x, y, z) = if f.frame.pose.valid[j] { (p.x, p.y, p.z) } else { (f64::NAN, f64::NAN, f64::NAN) };
                writeln!(s, "{x:?} {y:?} {z:?} {}", f.frame.flags[j].as_char()).unwrap();
            }
            if let Some(views) = &f.views {
                for (name, v) in ["left", "right"].iter().zip(views) {
                    writeln!(s, "view {name}").unwrap();
                    for j in 0..JOINTS {
                        let c = &v.kp.coords[j];
                        writeln!(s, "{:?} {:?} {}", c.x, c.y, v.flags[j].as_char()).unwrap();
                    }
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, AnnotationError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()).peekable();
        match lines.next() {
            Some((_, ANNOTATION_HEADER)) => {}
            Some((n, _)) => return Err(parse_err(n, "missing header")),
            None => return Err(parse_err(0, "empty file")),
        }
        let mut out = Self::default();
        while let Some((n, line)) = lines.next() {
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("meta") => {
                    let key = tok.next().ok_or_else(|| parse_err(n, "meta without key"))?;
                    let value = tok.collect::<Vec<_>>().join(" ");
                    out.meta.insert(key.to_string(), value);
                }
                Some("frame") => {
                    let frame_id = parse_num(tok.next(), n)?;
                    let t_us = parse_num(tok.next(), n)?;
                    let mut pose = HandPose3D::invalid();
                    let mut flags = [VisibilityFlag::Invalid; JOINTS];
                    for j in 0..JOINTS {
                        let (n, l) = lines.next().ok_or_else(|| parse_err(n, "truncated frame"))?;
                        let f: Vec<&str> = l.split_whitespace().collect();
                        if f.len() != 4 {
                            return Err(parse_err(n, "expected X Y Z flag"));
                        }
                        let p = Vector3::new(parse_f(f[0], n)?, parse_f(f[1], n)?, parse_f(f[2], n)?);
                        let flag = single_char(f[3]).and_then(VisibilityFlag::from_char).ok_or_else(|| parse_err(n, "bad flag"))?;
                        flags[j] = flag;
                        if flag != VisibilityFlag::Invalid {
                            if !p.iter().all(|v| v.is_finite()) {
                                return Err(parse_err(n, "non-finite coordinate on a valid joint"));
                            }
                            pose.joints[j] = p;
                            pose.valid[j] = true;
                        }
                    }
                    let mut views = Vec::new();
                    while let Some((_, l)) = lines.peek() {
                        if !l.starts_with("view ") {
                            break;
                        }
                        let (n, l) = lines.next().unwrap();
                        let expected = if views.is_empty() { "view left" } else { "view right" };
                        if l != expected || views.len() == 2 {
                            return Err(parse_err(n, format!("expected '{expected}'")));
                        }
                        let mut v = ViewLabels {
                            kp: Keypoints2D::invalid(),
                            flags: [ViewFlag::Absent; JOINTS],
                        };
                        for j in 0..JOINTS {
                            let (n, l) = lines.next().ok_or_else(|| parse_err(n, "truncated view"))?;
                            let f: Vec<&str> = l.split_whitespace().collect();
                            if f.len() != 3 {
                                return Err(parse_err(n, "expected u v flag"));
                            }
                            v.kp.coords[j] = Vector2::new(parse_f(f[0], n)?, parse_f(f[1], n)?);
                            v.flags[j] = single_char(f[2]).and_then(ViewFlag::from_char).ok_or_else(|| parse_err(n, "bad view flag"))?;
                            v.kp.valid[j] = v.flags[j] == ViewFlag::Visible;
                        }
                        views.push(v);
                    }
                    let views = match views.len() {
                        0 => None,
                        2 => Some([views[0], views[1]]),
                        _ => return Err(parse_err(n, "frame needs both views or none")),
                    };
                    out.frames.push(AnnotatedFrame {
                        frame: TrackFrame {
                            frame_id,
                            t_us,
                            pose,
                            flags,
                        },
                        views,
                    });
                }
                _ => return Err(parse_err(n, "expected 'meta' or 'frame'")),
            }
        }
        out.track()?;
        Ok(out)
    }
}

fn single_char(s: &str) -> Option<char> {
    let mut c = s.chars();
    let first = c.next()?;
    c.next().is_none().then_some(first)
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T, AnnotationError> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(line, "bad integer"))
}

fn parse_f(tok: &str, line: usize) -> Result<f64, AnnotationError> {
    tok.parse().map_err(|_| parse_err(line, format!("bad number '{tok}'")))
}

/// 2D keypoints in the depth camera for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kp2dFrame {
    pub frame_id: u32,
    pub t_us: u64,
    pub kp: Keypoints2D,
}

pub fn write_kp2d(frames: &[Kp2dFrame]) -> String {
    let mut s = String::from("frame_id,t_us");
    for j in 0..JOINTS {
        write!(s, ",u{j},v{j}").unwrap();
    }
    s.push('\n');
    for f in frames {
        write!(s, "{},{}", f.frame_id, f.t_us).unwrap();
        for j in 0..JOINTS {
            match f.kp.get(j) {
                Some(u) => write!(s, ",{:?},{:?}", u.x, u.y).unwrap(),
                None => s.push_str(",NaN,NaN"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn read_kp2d(text: &str) -> Result<Vec<Kp2dFrame>, AnnotationError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if i == 0 {
            if !line.starts_with("frame_id,t_us") {
                return Err(parse_err(n, "missing keypoint header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 2 + 2 * JOINTS {
            return Err(parse_err(n, format!("expected {} fields", 2 + 2 * JOINTS)));
        }
        let mut kp = Keypoints2D::invalid();
        for j in 0..JOINTS {
            let u = Vector2::new(parse_f(f[2 + 2 * j], n)?, parse_f(f[3 + 2 * j], n)?);
            if u.x.is_finite() && u.y.is_finite() {
                kp.coords[j] = u;
                kp.valid[j] = true;
            }
        }
        out.push(Kp2dFrame {
            frame_id: parse_num(Some(f[0]), n)?,
            t_us: parse_num(Some(f[1]), n)?,
            kp,
        });
    }
    Ok(out)
}

/// Lifts every frame (in parallel) and assembles the measured track.
pub fn lift_sequence(
    frames: &[Kp2dFrame],
    depth: &[DepthMap],
    cam: &CameraModel,
    window: usize,
    exec: Execution,
) -> Result<HandPoseTrack, AnnotationError> {
    let by_id: BTreeMap<u32, &DepthMap> = depth.iter().map(|d| (d.frame_id, d)).collect();
    let lifted = par::map(exec, frames, |f| {
        let dm = by_id.get(&f.frame_id).ok_or(AnnotationError::MissingDepth(f.frame_id))?;
        let (pose, flags) = lift_keypoints(&f.kp, dm, cam, window);
        Ok(TrackFrame {
            frame_id: f.frame_id,
            t_us: f.t_us,
            pose,
            flags,
        })
    });
    HandPoseTrack::new(lifted.into_iter().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{reference_rig, Distortion};

    fn sample_track() -> HandPoseTrack {
        let mut a = HandPose3D::new(std::array::from_fn(|j| Vector3::new(j as f64 * 1.5 - 30.0, 0.1 * j as f64, 400.0 + j as f64)));
        a.valid[4] = false;
        a.joints[4] = Vector3::repeat(f64::NAN);
        let mut b = a;
        b.joints[0].x += 1.0 / 3.0;
        HandPoseTrack::new(vec![TrackFrame::measured(3, 100, a), TrackFrame::measured(4, 33_433, b)]).unwrap()
    }

    #[test]
    fn annotation_text_round_trip() {
        let track = sample_track();
        let views = project_annotations(&track, &reference_rig(Distortion::default()));
        let mut file = AnnotationFile::from_track(&track, Some(&views));
        file.meta.insert("max_gap".into(), "5".into());
        file.meta.insert("scenario".into(), "normal bimanual".into());
        let text = file.to_text();
        let back = AnnotationFile::from_text(&text).unwrap();
        assert_eq!(back.meta, file.meta);
        assert_eq!(back.frames.len(), 2);
        for (a, b) in back.frames.iter().zip(&file.frames) {
            assert_eq!(a.frame.flags, b.frame.flags);
            assert_eq!(a.frame.pose.valid, b.frame.pose.valid);
            for j in 0..JOINTS {
                if b.frame.pose.valid[j] {
                    assert_eq!(a.frame.pose.joints[j], b.frame.pose.joints[j]);
                }
            }
            assert_eq!(a.views.unwrap()[1].flags, b.views.unwrap()[1].flags);
        }
        assert_eq!(back.to_text(), text);

        let no_views = AnnotationFile::from_track(&track, None);
        assert_eq!(AnnotationFile::from_text(&no_views.to_text()).unwrap().frames[0].views, None);
    }

    #[test]
    fn annotation_parse_errors() {
        assert!(AnnotationFile::from_text("").is_err());
        assert!(AnnotationFile::from_text("nonsense").is_err());
        let text = AnnotationFile::from_track(&sample_track(), None).to_text();
        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(matches!(AnnotationFile::from_text(&truncated), Err(AnnotationError::Parse { .. })));
        let bad_flag = text.replacen(" O\n", " Q\n", 1);
        assert!(AnnotationFile::from_text(&bad_flag).is_err());
    }

    #[test]
    fn kp2d_round_trip() {
        let mut kp = Keypoints2D::new(std::array::from_fn(|j| Vector2::new(j as f64 + 0.1, 2.0 * j as f64 / 3.0)));
        kp.valid[7] = false;
        let frames = vec![
            Kp2dFrame { frame_id: 0, t_us: 0, kp },
            Kp2dFrame { frame_id: 1, t_us: 33_333, kp: Keypoints2D::invalid() },
        ];
        let back = read_kp2d(&write_kp2d(&frames)).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].kp.valid, kp.valid);
        assert_eq!(back[0].kp.coords[3], kp.coords[3]);
        assert_eq!(back[1].kp.valid, [false; JOINTS]);
        assert!(read_kp2d("frame_id,t_us\n1,2,3\n").is_err());
    }
}
