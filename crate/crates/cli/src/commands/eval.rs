use std::collections::BTreeMap;

use super::{read_annotation, write};
use crate::config::EvalRun;
use crate::error::{CliResult, Failure};
use crate::report::{build_rows, compare, format_pck, format_report, scenario_of, Accumulator};

pub const REPORT_FILE: &str = "report.tsv";
pub const PCK_FILE: &str = "pck.tsv";

/// Scores each prediction against its ground truth, grouped by the ground
/// truth's `scenario` meta entry.
pub fn eval(run: &EvalRun) -> CliResult<String> {
    let mut groups: BTreeMap<String, Accumulator> = BTreeMap::new();
    for pair in &run.pairs {
        let pred = read_annotation(&pair.pred)?;
        let gt = read_annotation(&pair.gt)?;
        groups.entry(scenario_of(&gt)).or_default().merge(&compare(&pred, &gt));
    }
    let rows = build_rows(&groups, run.pck_thresholds)
        .map_err(|e| Failure::numeric(format!("no comparable joints: {e}")))?;
    write(&run.out.join(REPORT_FILE), format_report(&rows))?;
    write(&run.out.join(PCK_FILE), format_pck(&rows))?;
    let all = rows.last().expect("build_rows ends with the pooled row");
    Ok(format!(
        "M-3D {:.6} mm, PA-M3D {:.6} mm, PCK-AUC {:.4} over {} joints",
        all.m3d_mm,
        all.pa_m3d_mm.unwrap_or(f64::NAN),
        all.curve.auc,
        all.joints
    ))
}
