use std::fmt::Write as _;

use evhand_core::features::{build_sequences, leave_one_out_accuracy, StereoFrame};
use evhand_core::par::Execution;

use super::{read_annotation, write};
use crate::config::FeaturesRun;
use crate::error::{CliResult, Failure};

pub const ACCURACY_FILE: &str = "accuracy.txt";

/// One `.seq` file per input (or per window of `window_frames` frames).
pub fn features(run: &FeaturesRun, exec: Execution) -> CliResult<String> {
    let mut recordings = Vec::new();
    let mut names = Vec::new();
    for path in &run.inputs {
        let ann = read_annotation(path)?;
        let label = match ann.meta.get("label") {
            Some(l) => Some(
                l.parse::<usize>()
                    .map_err(|_| Failure::data(format!("{}: bad label {l:?}", path.display())))?,
            ),
            None => None,
        };
        let frames = ann
            .frames
            .iter()
            .map(|f| {
                let [l, r] = f.views.ok_or_else(|| {
                    Failure::data(format!("{}: frame {} has no stereo labels", path.display(), f.frame.frame_id))
                })?;
                Ok((f.frame.t_us, l.kp, r.kp))
            })
            .collect::<CliResult<Vec<StereoFrame>>>()?;
        let stem = path.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned());
        let chunk = if run.window_frames == 0 { frames.len().max(1) } else { run.window_frames };
        for (k, part) in frames.chunks(chunk).enumerate() {
            let name = if run.window_frames == 0 { stem.clone() } else { format!("{stem}_w{k:04}") };
            names.push((path.clone(), name));
            recordings.push((part.to_vec(), label));
        }
    }

    let sequences = build_sequences(&recordings, exec)
        .into_iter()
        .zip(&names)
        .map(|(r, (path, _))| r.map_err(|e| Failure::data(format!("{}: {e}", path.display()))))
        .collect::<CliResult<Vec<_>>>()?;
    for (seq, (_, name)) in sequences.iter().zip(&names) {
        write(&run.out.join(format!("{name}.seq")), seq.to_text())?;
    }

    let mut summary = format!("wrote {} sequences", sequences.len());
    if run.classify {
        let labelled = sequences.iter().filter(|s| s.label.is_some()).count();
        let mut text = format!("sequences\t{}\nlabelled\t{labelled}\n", sequences.len());
        match leave_one_out_accuracy(&sequences) {
            Some(acc) => {
                writeln!(text, "loo_accuracy\t{acc:?}").unwrap();
                write!(summary, "; leave-one-out accuracy {:.1} %", acc * 100.0).unwrap();
            }
            None => {
                text.push_str("loo_accuracy\tNaN\n");
                summary.push_str("; fewer than two labelled sequences, no accuracy");
            }
        }
        write(&run.out.join(ACCURACY_FILE), text)?;
    }
    Ok(summary)
}
