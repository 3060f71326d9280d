//! The refinement loop `P <- P + eta_k * dP_k`.
//!
//! Each iteration reprojects the current pose, decodes a target per joint and
//! view by soft-argmax over a patch of heatmap evidence centred on the
//! reprojection, asks a [`ResidualPredictor`] for a correction and applies it
//! with the configured step ratio.
//!
//! A joint's error is the confidence-weighted mean distance between its
//! reprojections and the targets decoded around them, so it depends on that
//! joint's position and heatmap channel only. With backtracking on, a joint's
//! step is halved (up to `max_halvings` times) until its error does not
//! increase, otherwise the joint stays put. The pose error (mean over joints
//! with evidence) is therefore non-increasing by construction.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{GaussNewton, OraclePredictor, ResidualPredictor, SolverError};
use crate::camera::{CameraModel, StereoRig};
use crate::heatmap::{DecodedKeypoints2D, HeatmapStack, DEFAULT_TEMPERATURE};
use crate::par::{self, Execution};
use crate::pose::{HandPose3D, JOINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    #[default]
    GaussNewton,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    pub n_iters: usize,
    /// One ratio per iteration, each in `(0, 1]`.
    pub step_ratio: Vec<f64>,
    pub backtracking: bool,
    pub max_halvings: u32,
    /// Patch half-width in heatmap pixels.
    pub patch_radius: usize,
    pub temperature: f64,
    pub predictor: PredictorKind,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self::with_iters(3)
    }
}

impl RefinementConfig {
    pub fn with_iters(n_iters: usize) -> Self {
        Self {
            n_iters,
            step_ratio: vec![1.0; n_iters],
            backtracking: true,
            max_halvings: 8,
            patch_radius: 8,
            temperature: DEFAULT_TEMPERATURE,
            predictor: PredictorKind::GaussNewton,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if self.step_ratio.len() != self.n_iters {
            return bad(format!(
                "{} step ratios for {} iterations",
                self.step_ratio.len(),
                self.n_iters
            ));
        }
        if let Some(r) = self.step_ratio.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return bad(format!("step ratio {r} outside (0, 1]"));
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive".into());
        }
        Ok(())
    }
}

/// Confidence-weighted reprojection errors, px.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ViewErrors {
    pub left: f64,
    pub right: f64,
    /// Mean over joints with evidence of each joint's weighted error.
    pub weighted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub errors: ViewErrors,
    pub step_norm_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementState {
    pub pose: HandPose3D,
    /// Completed iterations.
    pub k: usize,
    pub initial: ViewErrors,
    pub trace: Vec<IterationRecord>,
    /// Targets decoded around the final pose.
    pub targets: [DecodedKeypoints2D; 2],
}

#[derive(Clone, Copy)]
struct JointEvidence {
    target: [Vector2<f64>; 2],
    conf: [f64; 2],
    dist: [f64; 2],
}

impl JointEvidence {
    fn error(&self) -> Option<f64> {
        let c = self.conf[0] + self.conf[1];
        (c > 0.0).then(|| (self.conf[0] * self.dist[0] + self.conf[1] * self.dist[1]) / c)
    }
}

struct Evidence<'a> {
    rig: &'a StereoRig,
    maps: [&'a HeatmapStack; 2],
    scale: [Vector2<f64>; 2],
    radius: usize,
    temperature: f64,
}

impl Evidence<'_> {
    fn joint(&self, j: usize, p: &Vector3<f64>) -> JointEvidence {
        let mut ev = JointEvidence {
            target: [Vector2::zeros(); 2],
            conf: [0.0; 2],
            dist: [0.0; 2],
        };
        for v in 0..2 {
            let cam: &CameraModel = self.rig.views()[v];
            let Ok((u, _)) = cam.project(p) else { continue };
            let s = self.scale[v];
            let (g, c) = self.maps[v].decode_patch(j, u.component_mul(&s), self.radius, self.temperature);
            let t = g.component_div(&s);
            ev.target[v] = t;
            ev.conf[v] = c;
            ev.dist[v] = (u - t).norm();
        }
        ev
    }

    fn all(&self, pose: &HandPose3D) -> [Option<JointEvidence>; JOINTS] {
        let mut out = [None; JOINTS];
        for (j, e) in out.iter_mut().enumerate() {
            if pose.valid[j] {
                *e = Some(self.joint(j, &pose.joints[j]));
            }
        }
        out
    }
}

fn summarize(ev: &[Option<JointEvidence>; JOINTS]) -> ViewErrors {
    let mut num = [0.0; 2];
    let mut den = [0.0; 2];
    let (mut sum, mut n) = (0.0, 0usize);
    for e in ev.iter().flatten() {
        for v in 0..2 {
            num[v] += e.conf[v] * e.dist[v];
            den[v] += e.conf[v];
        }
        if let Some(err) = e.error() {
            sum += err;
            n += 1;
        }
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    ViewErrors {
        left: ratio(num[0], den[0]),
        right: ratio(num[1], den[1]),
        weighted: ratio(sum, n as f64),
    }
}

fn targets_of(ev: &[Option<JointEvidence>; JOINTS]) -> [DecodedKeypoints2D; 2] {
    let mut out = [DecodedKeypoints2D::empty(); 2];
    for (j, e) in ev.iter().enumerate() {
        if let Some(e) = e {
            for v in 0..2 {
                out[v].coords[j] = e.target[v];
                out[v].confidence[j] = e.conf[v];
            }
        }
    }
    out
}

fn grid_scale(stack: &HeatmapStack, cam: &CameraModel) -> Vector2<f64> {
    Vector2::new(
        stack.width as f64 / f64::from(cam.width),
        stack.height as f64 / f64::from(cam.height),
    )
}

/// Runs `cfg.n_iters` refinement iterations from `init`.
///
/// Heatmap grids may be smaller than the images; grid coordinates are pixel
/// coordinates times `grid size / image size` per axis.
pub fn refine(
    init: &HandPose3D,
    heatmaps_left: &HeatmapStack,
    heatmaps_right: &HeatmapStack,
    rig: &StereoRig,
    cfg: &RefinementConfig,
    predictor: &dyn ResidualPredictor,
) -> Result<RefinementState, SolverError> {
    cfg.validate()?;
    for hm in [heatmaps_left, heatmaps_right] {
        if hm.joints != JOINTS {
            return Err(SolverError::JointCountMismatch {
                expected: JOINTS,
                got: hm.joints,
            });
        }
    }
    let evidence = Evidence {
        rig,
        maps: [heatmaps_left, heatmaps_right],
        scale: [grid_scale(heatmaps_left, &rig.left), grid_scale(heatmaps_right, &rig.right)],
        radius: cfg.patch_radius,
        temperature: cfg.temperature,
    };

    let mut current = evidence.all(init);
    let initial = summarize(&current);
    let mut state = RefinementState {
        pose: *init,
        k: 0,
        initial,
        trace: Vec::with_capacity(cfg.n_iters),
        targets: targets_of(&current),
    };

    for k in 0..cfg.n_iters {
        let [tl, tr] = state.targets;
        let delta = predictor.predict(&state, &tl, &tr, rig);
        let eta = cfg.step_ratio[k];
        let mut step_sq = 0.0;
        let mut next = state.pose;

        for j in 0..JOINTS {
            let Some(ev) = current[j] else { continue };
            let step = delta[j] * eta;
            if !step.iter().all(|v| v.is_finite()) || step == Vector3::zeros() {
                continue;
            }
            let p = state.pose.joints[j];
            let accepted = if cfg.backtracking {
                let Some(err) = ev.error() else { continue };
                let mut alpha = 1.0;
                let mut found = None;
                for _ in 0..=cfg.max_halvings {
                    let cand = p + step * alpha;
                    let cand_ev = evidence.joint(j, &cand);
                    if cand_ev.error().is_some_and(|e| e <= err) {
                        found = Some((cand, cand_ev));
                        break;
                    }
                    alpha *= 0.5;
                }
                found
            } else {
                let cand = p + step;
                Some((cand, evidence.joint(j, &cand)))
            };
            if let Some((cand, cand_ev)) = accepted {
                step_sq += (cand - p).norm_squared();
                next.joints[j] = cand;
                current[j] = Some(cand_ev);
            }
        }

        state.pose = next;
        state.k = k + 1;
        state.targets = targets_of(&current);
        state.trace.push(IterationRecord {
            errors: summarize(&current),
            step_norm_mm: step_sq.sqrt(),
        });
    }
    Ok(state)
}

/// Refines independent frames with the configured built-in predictor.
/// `ground_truth` is required for [`PredictorKind::Oracle`].
pub fn refine_batch(
    frames: &[(HandPose3D, HeatmapStack, HeatmapStack)],
    ground_truth: Option<&[HandPose3D]>,
    rig: &StereoRig,
    cfg: &RefinementConfig,
    exec: Execution,
) -> Result<Vec<RefinementState>, SolverError> {
    if cfg.predictor == PredictorKind::Oracle && ground_truth.is_none_or(|gt| gt.len() != frames.len()) {
        return Err(SolverError::InvalidConfig(
            "oracle predictor needs one ground-truth pose per frame".into(),
        ));
    }
    par::map_range(exec, frames.len(), |i| {
        let (init, l, r) = &frames[i];
        match cfg.predictor {
            PredictorKind::GaussNewton => refine(init, l, r, rig, cfg, &GaussNewton::default()),
            PredictorKind::Oracle => {
                let gt = ground_truth.expect("checked above")[i];
                refine(init, l, r, rig, cfg, &OraclePredictor { ground_truth: gt })
            }
        }
    })
    .into_iter()
    .collect()
}

/// Trace rows: `iteration mean_err_L_px mean_err_R_px step_norm_mm weighted_err_px`.
/// Iteration 0 is the initial pose with a zero step.
pub fn write_trace(out: &mut String, frame_id: u32, state: &RefinementState) {
    use std::fmt::Write;
    let row = |out: &mut String, k: usize, e: &ViewErrors, step: f64| {
        let _ = writeln!(out, "{frame_id} {k} {} {} {} {}", e.left, e.right, step, e.weighted);
    };
    row(out, 0, &state.initial, 0.0);
    for (k, r) in state.trace.iter().enumerate() {
        row(out, k + 1, &r.errors, r.step_norm_mm);
    }
}
