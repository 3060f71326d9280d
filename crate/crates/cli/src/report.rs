//! Evaluation report: per-scenario error tables and PCK curves as plain
//! columnar text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use evhand_core::annotation::AnnotationFile;
use evhand_core::metrics::{pa_mpjpe, pck_curve, MetricError, PckCurve};
use evhand_core::JOINTS;

pub const ALL: &str = "all";
pub const UNLABELLED: &str = "unlabelled";

/// Errors pooled over frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accumulator {
    pub frames: usize,
    /// Ground-truth joints that should have been predicted.
    pub expected: usize,
    pub errors_3d: Vec<f64>,
    pub errors_2d: Vec<f64>,
    /// One value per frame with enough joints for alignment.
    pub pa_per_frame: Vec<f64>,
}

impl Accumulator {
    pub fn merge(&mut self, other: &Accumulator) {
        self.frames += other.frames;
        self.expected += other.expected;
        self.errors_3d.extend_from_slice(&other.errors_3d);
        self.errors_2d.extend_from_slice(&other.errors_2d);
        self.pa_per_frame.extend_from_slice(&other.pa_per_frame);
    }
}

pub fn scenario_of(file: &AnnotationFile) -> String {
    file.meta.get("scenario").cloned().unwrap_or_else(|| UNLABELLED.to_string())
}

/// Matches frames by id. Joints count where the ground truth is valid; a
/// prediction missing such a joint lowers the coverage only.
pub fn compare(pred: &AnnotationFile, gt: &AnnotationFile) -> Accumulator {
    let by_id: BTreeMap<u32, _> = pred.frames.iter().map(|f| (f.frame.frame_id, f)).collect();
    let mut acc = Accumulator::default();
    for g in &gt.frames {
        acc.frames += 1;
        acc.expected += g.frame.pose.valid_count();
        let Some(p) = by_id.get(&g.frame.frame_id) else { continue };
        let mask: Vec<bool> = (0..JOINTS).map(|j| g.frame.pose.valid[j] && p.frame.pose.valid[j]).collect();
        for j in (0..JOINTS).filter(|j| mask[*j]) {
            acc.errors_3d.push((p.frame.pose.joints[j] - g.frame.pose.joints[j]).norm());
        }
        if mask.iter().filter(|m| **m).count() >= 3 {
            if let Ok(e) = pa_mpjpe(&p.frame.pose.joints, &g.frame.pose.joints, &mask) {
                acc.pa_per_frame.push(e);
            }
        }
        if let (Some(pv), Some(gv)) = (&p.views, &g.views) {
            for (a, b) in pv.iter().zip(gv) {
                for j in (0..JOINTS).filter(|j| a.kp.valid[*j] && b.kp.valid[*j]) {
                    acc.errors_2d.push((a.kp.coords[j] - b.kp.coords[j]).norm());
                }
            }
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub frames: usize,
    pub joints: usize,
    pub coverage: f64,
    pub m2d_px: Option<f64>,
    pub m3d_mm: f64,
    pub pa_m3d_mm: Option<f64>,
    pub curve: PckCurve,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn row(scenario: &str, acc: &Accumulator, n_thresholds: usize) -> Result<ReportRow, MetricError> {
    let m3d_mm = mean(&acc.errors_3d).ok_or(MetricError::EmptyMask)?;
    Ok(ReportRow {
        scenario: scenario.to_string(),
        frames: acc.frames,
        joints: acc.errors_3d.len(),
        coverage: acc.errors_3d.len() as f64 / acc.expected.max(1) as f64,
        m2d_px: mean(&acc.errors_2d),
        m3d_mm,
        pa_m3d_mm: mean(&acc.pa_per_frame),
        curve: pck_curve(&acc.errors_3d, n_thresholds)?,
    })
}

/// One row per scenario followed by the pooled `all` row.
pub fn build_rows(per_scenario: &BTreeMap<String, Accumulator>, n_thresholds: usize) -> Result<Vec<ReportRow>, MetricError> {
    let mut rows = Vec::new();
    let mut all = Accumulator::default();
    for (name, acc) in per_scenario {
        if !acc.errors_3d.is_empty() {
            rows.push(row(name, acc, n_thresholds)?);
        }
        all.merge(acc);
    }
    rows.push(row(ALL, &all, n_thresholds)?);
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |v| format!("{v:?}"))
}

/// Tab-separated: `scenario frames joints coverage M-2D M-3D PA-M3D PCK-AUC`.
pub fn format_report(rows: &[ReportRow]) -> String {
    let mut s = String::from("scenario\tframes\tjoints\tcoverage\tM-2D_px\tM-3D_mm\tPA-M3D_mm\tPCK-AUC\n");
    for r in rows {
        writeln!(
            s,
            "{}\t{}\t{}\t{:?}\t{}\t{:?}\t{}\t{:?}",
            r.scenario,
            r.frames,
            r.joints,
            r.coverage,
            opt(r.m2d_px),
            r.m3d_mm,
            opt(r.pa_m3d_mm),
            r.curve.auc
        )
        .unwrap();
    }
    s
}

/// Tab-separated: threshold in mm, then one PCK column per row.
pub fn format_pck(rows: &[ReportRow]) -> String {
    let mut s = String::from("threshold_mm");
    for r in rows {
        s.push('\t');
        s.push_str(&r.scenario);
    }
    s.push('\n');
    let Some(first) = rows.first() else { return s };
    for (i, t) in first.curve.thresholds.iter().enumerate() {
        write!(s, "{t:?}").unwrap();
        for r in rows {
            write!(s, "\t{:?}", r.curve.pck[i]).unwrap();
        }
        s.push('\n');
    }
    s
}
