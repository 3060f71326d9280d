use std::fs;

use evhand_core::annotation::{
    interpolate_track, lift_sequence, project_annotations, read_depth, read_kp2d, AnnotationFile, VisibilityFlag,
};
use evhand_core::par::{self, Execution};

use super::{read_calib, read_text, write};
use crate::config::AnnotateRun;
use crate::error::{CliResult, Context, Failure};

pub const ANNOTATION_FILE: &str = "annotation.ann";

pub fn annotate(run: &AnnotateRun, exec: Execution) -> CliResult<String> {
    let calib = read_calib(&run.calib)?;
    let depth_cam = calib
        .depth
        .ok_or_else(|| Failure::data(format!("{}: no [depth] camera", run.calib.display())))?;
    let frames = read_kp2d(&read_text(&run.kp2d)?).data_at(&run.kp2d)?;
    let depth = par::map(exec, &frames, |f| {
        let path = run.depth_dir.join(format!("{:06}.dpm", f.frame_id));
        read_depth(&fs::read(&path).data_at(&path)?).data_at(&path)
    })
    .into_iter()
    .collect::<CliResult<Vec<_>>>()?;

    let lifted = lift_sequence(&frames, &depth, &depth_cam, run.window, exec).data_at(&run.kp2d)?;
    let track = interpolate_track(&lifted, run.max_gap);
    let views = project_annotations(&track, &calib.rig);
    let mut file = AnnotationFile::from_track(&track, Some(&views));
    file.meta.insert("source".into(), "annotate".into());
    file.meta.insert("max_gap".into(), run.max_gap.to_string());
    file.meta.insert("window".into(), run.window.to_string());
    if let Some(s) = &run.scenario {
        file.meta.insert("scenario".into(), s.clone());
    }
    write(&run.out.join(ANNOTATION_FILE), file.to_text())?;
    Ok(format!(
        "annotated {} frames: {} original, {} interpolated, {} invalid joints",
        track.len(),
        track.count(VisibilityFlag::Original),
        track.count(VisibilityFlag::Interpolated),
        track.count(VisibilityFlag::Invalid)
    ))
}
