mod annotate;
mod encode;
mod eval;
mod features;
mod simulate;
mod solve;

use std::fs;
use std::path::Path;

use evhand_core::annotation::AnnotationFile;
use evhand_core::camera::{read_calibration, Calibration};

pub use annotate::annotate;
pub use encode::{encode, window_ends, INDEX_FILE};
pub use eval::{eval, PCK_FILE, REPORT_FILE};
pub use features::features;
pub use simulate::simulate;
pub use solve::{load_heatmap_dir, solve, PRED_FILE, TRACE_FILE};

use crate::error::{CliResult, Context};

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).data_at(path)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).data_at(dir)?;
    }
    fs::write(path, bytes).data_at(path)
}

fn read_calib(path: &Path) -> CliResult<Calibration> {
    read_calibration(&read_text(path)?).data_at(path)
}

fn read_annotation(path: &Path) -> CliResult<AnnotationFile> {
    let file = AnnotationFile::from_text(&read_text(path)?).data_at(path)?;
    file.track().data_at(path)?;
    Ok(file)
}
