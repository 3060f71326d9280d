//! Wrist-centric, palm-normalised stereo 2D gesture features.
//!
//! A frame vector has 168 entries laid out as four blocks of 21 joints:
//! left-view left hand, left-view right hand, right-view left hand, right-view
//! right hand. Each block lists joints 0 to 20 with `x` before `y`.

use nalgebra::Vector2;
use thiserror::Error;

use crate::par::{self, Execution};
use crate::pose::{Keypoints2D, JOINTS, JOINTS_PER_HAND, MIDDLE_MCP, WRIST};

pub const FEATURE_DIM: usize = 2 * JOINTS * 2;
pub const PALM_EPSILON: f64 = 1e-5;
pub const NUM_CLASSES: usize = 38;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("missing wrist for hand {hand} in view {view} at frame {frame}")]
    MissingWrist { frame: usize, view: usize, hand: usize },
    #[error("expected {expected} joints, got {got}")]
    JointCountMismatch { expected: usize, got: usize },
    #[error("timestamps must increase (frame {0})")]
    NonMonotonicTime(usize),
    #[error("label {0} outside 0..38")]
    LabelOutOfRange(usize),
    #[error("empty sequence")]
    Empty,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Wrist-centres one hand: subtracts the wrist from every valid joint. Invalid
/// joints map to the origin.
pub fn wrist_center(hand: &[Option<Vector2<f64>>]) -> Option<Vec<Vector2<f64>>> {
    let wrist = hand.get(WRIST).copied().flatten()?;
    Some(hand.iter().map(|p| p.map_or(Vector2::zeros(), |p| p - wrist)).collect())
}

/// Scale-normalises one wrist-centred hand: divides by the palm length plus epsilon.
pub fn scale_normalize(centered: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let palm = centered.get(MIDDLE_MCP).map_or(0.0, |p| p.norm());
    centered.iter().map(|p| p / (palm + PALM_EPSILON)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFrame {
    pub t_us: u64,
    pub vector: Vec<f64>,
}

/// Normalised 168-vector of one stereo frame; `frame` is only used in errors.
pub fn frame_vector(views: [&Keypoints2D; 2], frame: usize) -> Result<Vec<f64>, FeatureError> {
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for (view, kp) in views.into_iter().enumerate() {
        for hand in 0..2 {
            let base = hand * JOINTS_PER_HAND;
            let pts: Vec<Option<Vector2<f64>>> = (base..base + JOINTS_PER_HAND).map(|j| kp.get(j)).collect();
            let centered = wrist_center(&pts).ok_or(FeatureError::MissingWrist { frame, view, hand })?;
            for p in scale_normalize(&centered) {
                out.push(p.x);
                out.push(p.y);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureSequence {
    pub frames: Vec<NormalizedFrame>,
    pub label: Option<usize>,
}

/// One stereo 2D observation: timestamp, left view, right view.
pub type StereoFrame = (u64, Keypoints2D, Keypoints2D);

pub fn build_sequence(frames: &[StereoFrame], label: Option<usize>) -> Result<GestureSequence, FeatureError> {
    if frames.is_empty() {
        return Err(FeatureError::Empty);
    }
    if let Some(l) = label.filter(|l| *l >= NUM_CLASSES) {
        return Err(FeatureError::LabelOutOfRange(l));
    }
    if let Some(i) = frames.windows(2).position(|w| w[1].0 <= w[0].0) {
        return Err(FeatureError::NonMonotonicTime(i + 1));
    }
    let frames = frames
        .iter()
        .enumerate()
        .map(|(i, (t, l, r))| {
            Ok(NormalizedFrame {
                t_us: *t,
                vector: frame_vector([l, r], i)?,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(GestureSequence { frames, label })
}

/// Builds several sequences, one per recording.
pub fn build_sequences(
    recordings: &[(Vec<StereoFrame>, Option<usize>)],
    exec: Execution,
) -> Vec<Result<GestureSequence, FeatureError>> {
    par::map(exec, recordings, |(frames, label)| build_sequence(frames, *label))
}

impl GestureSequence {
    pub fn mean_vector(&self) -> Vec<f64> {
        let mut acc = vec![0.0; FEATURE_DIM];
        for f in &self.frames {
            for (a, v) in acc.iter_mut().zip(&f.vector) {
                *a += v;
            }
        }
        let n = self.frames.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// One line per frame, `t_us` then 168 values; an optional `label` line last.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for f in &self.frames {
            s.push_str(&f.t_us.to_string());
            for v in &f.vector {
                s.push(' ');
                s.push_str(&format!("{v:e}"));
            }
            s.push('\n');
        }
        if let Some(l) = self.label {
            s.push_str(&format!("label {l}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let mut frames = Vec::new();
        let mut label = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| FeatureError::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            if let Some(rest) = line.strip_prefix("label ") {
                let l: usize = rest.trim().parse().map_err(|_| err("bad label"))?;
                if l >= NUM_CLASSES {
                    return Err(FeatureError::LabelOutOfRange(l));
                }
                label = Some(l);
                continue;
            }
            if label.is_some() {
                return Err(err("frame after label line"));
            }
            let mut it = line.split_whitespace();
            let t_us: u64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad timestamp"))?;
            let vector: Vec<f64> = it.map(|v| v.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| err("bad value"))?;
            if vector.len() != FEATURE_DIM {
                return Err(err("expected 168 values"));
            }
            frames.push(NormalizedFrame { t_us, vector });
        }
        if frames.is_empty() {
            return Err(FeatureError::Empty);
        }
        if let Some(i) = frames.windows(2).position(|w| w[1].t_us <= w[0].t_us) {
            return Err(FeatureError::NonMonotonicTime(i + 1));
        }
        Ok(Self { frames, label })
    }
}

/// Nearest class centroid over time-averaged sequence vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidClassifier {
    pub centroids: Vec<(usize, Vec<f64>)>,
}

impl CentroidClassifier {
    /// Unlabelled sequences are ignored.
    pub fn fit<'a>(sequences: impl IntoIterator<Item = &'a GestureSequence>) -> Self {
        let mut sums: std::collections::BTreeMap<usize, (Vec<f64>, usize)> = Default::default();
        for s in sequences {
            let Some(label) = s.label else { continue };
            let e = sums.entry(label).or_insert_with(|| (vec![0.0; FEATURE_DIM], 0));
            for (a, v) in e.0.iter_mut().zip(s.mean_vector()) {
                *a += v;
            }
            e.1 += 1;
        }
        let centroids = sums
            .into_iter()
            .map(|(l, (sum, n))| (l, sum.into_iter().map(|v| v / n as f64).collect()))
            .collect();
        Self { centroids }
    }

    pub fn predict(&self, seq: &GestureSequence) -> Option<usize> {
        let m = seq.mean_vector();
        self.centroids
            .iter()
            .map(|(l, c)| (*l, c.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(l, _)| l)
    }
}

/// Leave-one-out top-1 accuracy of the centroid classifier over labelled
/// sequences; `None` with fewer than two labelled sequences.
pub fn leave_one_out_accuracy(sequences: &[GestureSequence]) -> Option<f64> {
    let labelled: Vec<&GestureSequence> = sequences.iter().filter(|s| s.label.is_some()).collect();
    if labelled.len() < 2 {
        return None;
    }
    let correct = (0..labelled.len())
        .filter(|&i| {
            let rest = labelled.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, s)| *s);
            CentroidClassifier::fit(rest).predict(labelled[i]) == labelled[i].label
        })
        .count();
    Some(correct as f64 / labelled.len() as f64)
}
