use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use evhand_core::annotation::{project_annotations, AnnotationFile, HandPoseTrack, TrackFrame, VisibilityFlag};
use evhand_core::camera::{CameraModel, StereoRig};
use evhand_core::heatmap::{read_heatmaps, render_gaussian, write_heatmaps, DecodedKeypoints2D, HeatmapStack};
use evhand_core::par::{self, Execution};
use evhand_core::solver::{
    refine, triangulate, write_trace, GaussNewton, OraclePredictor, PredictorKind, RefinementState,
};
use evhand_core::{HandPose3D, Keypoints2D, JOINTS};
use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{read_annotation, read_calib, read_text, write};
use crate::config::{InitKind, SolveInput, SolveRun};
use crate::error::{CliResult, Context, Failure};

pub const PRED_FILE: &str = "pred.ann";
pub const TRACE_FILE: &str = "trace.txt";
const FRAMES_FILE: &str = "frames.txt";

struct Job {
    frame_id: u32,
    t_us: u64,
    labels: Option<[Keypoints2D; 2]>,
    ground_truth: Option<HandPose3D>,
}

/// Frame ids and timestamps listed in a heatmap directory.
pub fn load_heatmap_dir(dir: &Path) -> CliResult<Vec<(u32, u64)>> {
    let path = dir.join(FRAMES_FILE);
    let text = read_text(&path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let mut it = l.split_whitespace();
            let id = it.next().and_then(|v| v.parse().ok());
            let t = it.next().and_then(|v| v.parse().ok());
            id.zip(t)
                .ok_or_else(|| Failure::data(format!("{}:{}: expected `frame_id t_us`", path.display(), i + 1)))
        })
        .collect()
}

fn heatmap_path(dir: &Path, view: &str, frame_id: u32) -> std::path::PathBuf {
    dir.join(view).join(format!("{frame_id:06}.hms"))
}

fn grid_scale(stack: &HeatmapStack, cam: &CameraModel) -> Vector2<f64> {
    Vector2::new(
        stack.width as f64 / f64::from(cam.width),
        stack.height as f64 / f64::from(cam.height),
    )
}

fn render_view(labels: &Keypoints2D, cam: &CameraModel, scale: f64, sigma: f64, noise: Option<(&Normal<f64>, &mut ChaCha8Rng)>) -> HeatmapStack {
    let w = (f64::from(cam.width) * scale).round().max(1.0) as usize;
    let h = (f64::from(cam.height) * scale).round().max(1.0) as usize;
    let s = Vector2::new(w as f64 / f64::from(cam.width), h as f64 / f64::from(cam.height));
    let mut kp = *labels;
    let mut noise = noise;
    for j in 0..JOINTS {
        if !kp.valid[j] {
            continue;
        }
        if let Some((dist, rng)) = noise.as_mut() {
            kp.coords[j] += Vector2::new(dist.sample(*rng), dist.sample(*rng));
        }
        kp.coords[j] = kp.coords[j].component_mul(&s);
    }
    render_gaussian(&kp, sigma, w, h)
}

fn initial_pose(init: InitKind, job: &Job, maps: [&HeatmapStack; 2], rig: &StereoRig, temperature: f64) -> HandPose3D {
    let decoded: [DecodedKeypoints2D; 2] = std::array::from_fn(|v| {
        let scale = grid_scale(maps[v], rig.views()[v]);
        match init {
            InitKind::Labels => DecodedKeypoints2D::from_keypoints(&job.labels.expect("labels checked")[v]),
            InitKind::SoftArgmax => DecodedKeypoints2D::decode(maps[v], temperature, scale),
            InitKind::Argmax => DecodedKeypoints2D::decode_argmax(maps[v], scale),
        }
    });
    let kp = decoded.map(|d| {
        let mut kp = Keypoints2D::invalid();
        for j in 0..JOINTS {
            if d.confidence[j] > 0.0 {
                kp.coords[j] = d.coords[j];
                kp.valid[j] = true;
            }
        }
        kp
    });
    triangulate(&kp[0], &kp[1], &decoded[0].confidence, &decoded[1].confidence, rig)
}

/// Triangulates and refines every frame; writes `pred.ann` and `trace.txt`.
pub fn solve(run: &SolveRun, exec: Execution) -> CliResult<String> {
    let rig = read_calib(&run.calib)?.rig;
    let cfg = &run.refinement;
    cfg.validate().map_err(Failure::usage)?;

    let mut meta = Vec::new();
    let jobs: Vec<Job> = match &run.input {
        SolveInput::Annotation { path, .. } => {
            let ann = read_annotation(path)?;
            if let Some(s) = ann.meta.get("scenario") {
                meta.push(("scenario".to_string(), s.clone()));
            }
            ann.frames
                .iter()
                .map(|f| {
                    let views = f.views.ok_or_else(|| {
                        Failure::data(format!("{}: frame {} has no stereo labels", path.display(), f.frame.frame_id))
                    })?;
                    Ok(Job {
                        frame_id: f.frame.frame_id,
                        t_us: f.frame.t_us,
                        labels: Some(views.map(|v| v.kp)),
                        ground_truth: Some(f.frame.pose),
                    })
                })
                .collect::<CliResult<_>>()?
        }
        SolveInput::Heatmaps { dir } => load_heatmap_dir(dir)?
            .into_iter()
            .map(|(frame_id, t_us)| Job {
                frame_id,
                t_us,
                labels: None,
                ground_truth: None,
            })
            .collect(),
    };
    if run.init == InitKind::Labels && jobs.iter().any(|j| j.labels.is_none()) {
        return Err(Failure::usage("label initialisation needs an annotation input"));
    }
    if cfg.predictor == PredictorKind::Oracle && jobs.iter().any(|j| j.ground_truth.is_none()) {
        return Err(Failure::usage("the oracle predictor needs an annotation input"));
    }

    let results = par::map(exec, &jobs, |job| -> CliResult<(HandPose3D, RefinementState)> {
        let [left, right] = match &run.input {
            SolveInput::Annotation {
                scale,
                sigma,
                peak_noise_px,
                seed,
                ..
            } => {
                let labels = job.labels.expect("annotation jobs carry labels");
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(job.frame_id).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let dist = Normal::new(0.0, *peak_noise_px).map_err(Failure::usage)?;
                let noisy = *peak_noise_px > 0.0;
                let l = render_view(&labels[0], &rig.left, *scale, *sigma, noisy.then_some((&dist, &mut rng)));
                let r = render_view(&labels[1], &rig.right, *scale, *sigma, noisy.then_some((&dist, &mut rng)));
                [l, r]
            }
            SolveInput::Heatmaps { dir } => {
                let load = |view: &str| {
                    let path = heatmap_path(dir, view, job.frame_id);
                    read_heatmaps(&fs::read(&path).data_at(&path)?).data_at(&path)
                };
                [load("left")?, load("right")?]
            }
        };
        if run.dump_heatmaps {
            write(&heatmap_path(&run.out.join("heatmaps"), "left", job.frame_id), write_heatmaps(&left))?;
            write(&heatmap_path(&run.out.join("heatmaps"), "right", job.frame_id), write_heatmaps(&right))?;
        }
        let init = initial_pose(run.init, job, [&left, &right], &rig, cfg.temperature);
        let state = match cfg.predictor {
            PredictorKind::GaussNewton => refine(&init, &left, &right, &rig, cfg, &GaussNewton::default()),
            PredictorKind::Oracle => {
                let ground_truth = job.ground_truth.expect("checked above");
                refine(&init, &left, &right, &rig, cfg, &OraclePredictor { ground_truth })
            }
        }
        .map_err(|e| Failure::data(format!("frame {}: {e}", job.frame_id)))?;
        Ok((init, state))
    })
    .into_iter()
    .collect::<CliResult<Vec<_>>>()?;

    let mut frames = Vec::with_capacity(jobs.len());
    let mut trace = String::from("frame_id\titeration\tmean_err_L_px\tmean_err_R_px\tstep_norm_mm\tweighted_err_px\n");
    let (mut first, mut last) = (0.0, 0.0);
    for (job, (_, state)) in jobs.iter().zip(&results) {
        let pose = state.pose;
        if (0..JOINTS).any(|j| pose.valid[j] && !pose.joints[j].iter().all(|v| v.is_finite())) {
            return Err(Failure::numeric(format!("frame {}: refinement produced a non-finite joint", job.frame_id)));
        }
        let flags = std::array::from_fn(|j| if pose.valid[j] { VisibilityFlag::Original } else { VisibilityFlag::Invalid });
        frames.push(TrackFrame {
            frame_id: job.frame_id,
            t_us: job.t_us,
            pose,
            flags,
        });
        let mut rows = String::new();
        write_trace(&mut rows, job.frame_id, state);
        trace.push_str(&rows.replace(' ', "\t"));
        first += state.initial.weighted;
        last += state.trace.last().map_or(state.initial.weighted, |r| r.errors.weighted);
    }
    let track = HandPoseTrack::new(frames).map_err(Failure::data)?;
    let views = project_annotations(&track, &rig);
    let mut file = AnnotationFile::from_track(&track, Some(&views));
    file.meta.extend(meta);
    file.meta.insert("source".into(), "solve".into());
    file.meta.insert("iterations".into(), cfg.n_iters.to_string());
    write(&run.out.join(PRED_FILE), file.to_text())?;
    write(&run.out.join(TRACE_FILE), trace)?;
    if run.dump_heatmaps {
        let list: String = jobs.iter().map(|j| format!("{} {}\n", j.frame_id, j.t_us)).collect();
        write(&run.out.join("heatmaps").join(FRAMES_FILE), list)?;
    }

    let n = jobs.len().max(1) as f64;
    let mut s = format!("solved {} frames", jobs.len());
    write!(s, "; mean weighted reprojection error {:.4} px -> {:.4} px", first / n, last / n).unwrap();
    Ok(s)
}
