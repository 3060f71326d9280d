//! Fully resolved run configurations. Every subcommand materialises its
//! defaults into one of these before doing any work and saves it as
//! `run.toml` next to its outputs; `evhand replay` executes a saved one.

use std::fs;
use std::path::{Path, PathBuf};

use evhand_core::event::LnesMode;
use evhand_core::sim::SimConfig;
use evhand_core::solver::RefinementConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliResult, Context, Failure};

pub const SNAPSHOT_FILE: &str = "run.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 1 runs every loop sequentially.
    pub threads: usize,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Simulate(SimulateRun),
    Encode(EncodeRun),
    Annotate(AnnotateRun),
    Solve(SolveRun),
    Eval(EvalRun),
    Features(FeaturesRun),
}

impl Task {
    pub fn out(&self) -> &Path {
        match self {
            Task::Simulate(r) => &r.out,
            Task::Encode(r) => &r.out,
            Task::Annotate(r) => &r.out,
            Task::Solve(r) => &r.out,
            Task::Eval(r) => &r.out,
            Task::Features(r) => &r.out,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Task::Simulate(r) => r.out = out,
            Task::Encode(r) => r.out = out,
            Task::Annotate(r) => r.out = out,
            Task::Solve(r) => r.out = out,
            Task::Eval(r) => r.out = out,
            Task::Features(r) => r.out = out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRun {
    pub out: PathBuf,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFileFormat {
    Binary,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeRun {
    pub events: PathBuf,
    pub format: EventFileFormat,
    /// Sensor size, needed for CSV input only.
    pub width: Option<u16>,
    pub height: Option<u16>,
    pub out: PathBuf,
    pub delta_t_us: u64,
    pub mode: LnesMode,
    /// Window ends are `stride_us, 2 * stride_us, ...` up to the last event.
    pub stride_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateRun {
    pub kp2d: PathBuf,
    /// Holds `NNNNNN.dpm` per frame id.
    pub depth_dir: PathBuf,
    pub calib: PathBuf,
    pub out: PathBuf,
    pub window: usize,
    pub max_gap: usize,
    /// Stored as the `scenario` meta entry.
    pub scenario: Option<String>,
}

/// Where the first estimate comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Triangulate the annotation's 2D labels.
    Labels,
    /// Triangulate the soft-argmax decode of the heatmaps.
    SoftArgmax,
    /// Triangulate the integer argmax of the heatmaps.
    Argmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SolveInput {
    /// Heatmaps are rendered from the stereo labels of an annotation file.
    Annotation {
        path: PathBuf,
        /// Heatmap size over image size.
        scale: f64,
        sigma: f64,
        /// Std-dev of Gaussian noise added to each rendered peak, image px.
        peak_noise_px: f64,
        seed: u64,
    },
    /// `left/NNNNNN.hms`, `right/NNNNNN.hms` and `frames.txt` (`frame_id t_us`).
    Heatmaps { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRun {
    pub input: SolveInput,
    pub calib: PathBuf,
    pub out: PathBuf,
    pub init: InitKind,
    /// Also write the heatmaps used, in the `heatmaps` input layout.
    pub dump_heatmaps: bool,
    pub refinement: RefinementConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalPair {
    pub pred: PathBuf,
    pub gt: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRun {
    pub pairs: Vec<EvalPair>,
    pub out: PathBuf,
    pub pck_thresholds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesRun {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    /// Frames per sequence; 0 keeps each input whole.
    pub window_frames: usize,
    pub classify: bool,
}

impl RunConfig {
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| Failure::data(format!("cannot serialise run config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).data_at(path)?;
        Self::from_toml(&text).data_at(path)
    }

    /// Writes `run.toml` into the output directory.
    pub fn save(&self) -> CliResult<PathBuf> {
        let dir = self.task.out();
        fs::create_dir_all(dir).data_at(dir)?;
        let path = dir.join(SNAPSHOT_FILE);
        fs::write(&path, self.to_toml()?).data_at(&path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use evhand_core::sim::HoleMask;

    #[test]
    fn every_task_round_trips_through_toml() {
        let tasks = vec![
            Task::Simulate(SimulateRun {
                out: "ds".into(),
                sim: SimConfig {
                    depth_holes: HoleMask::Random { count: 3, radius: 2.5 },
                    ..SimConfig::default()
                },
            }),
            Task::Encode(EncodeRun {
                events: "e.csv".into(),
                format: EventFileFormat::Csv,
                width: Some(64),
                height: Some(48),
                out: "lnes".into(),
                delta_t_us: 33_000,
                mode: LnesMode::Latest,
                stride_us: 10_000,
            }),
            Task::Annotate(AnnotateRun {
                kp2d: "kp.csv".into(),
                depth_dir: "depth".into(),
                calib: "calib.toml".into(),
                out: "ann".into(),
                window: 5,
                max_gap: 5,
                scenario: Some("normal bimanual".into()),
            }),
            Task::Solve(SolveRun {
                input: SolveInput::Annotation {
                    path: "gt.ann".into(),
                    scale: 0.25,
                    sigma: 2.0,
                    peak_noise_px: 0.5,
                    seed: 3,
                },
                calib: "calib.toml".into(),
                out: "solve".into(),
                init: InitKind::Argmax,
                dump_heatmaps: true,
                refinement: RefinementConfig::default(),
            }),
            Task::Solve(SolveRun {
                input: SolveInput::Heatmaps { dir: "hm".into() },
                calib: "calib.toml".into(),
                out: "solve".into(),
                init: InitKind::SoftArgmax,
                dump_heatmaps: false,
                refinement: RefinementConfig::with_iters(0),
            }),
            Task::Eval(EvalRun {
                pairs: vec![EvalPair {
                    pred: "p.ann".into(),
                    gt: "g.ann".into(),
                }],
                out: "eval".into(),
                pck_thresholds: 100,
            }),
            Task::Features(FeaturesRun {
                inputs: vec!["a.ann".into(), "b.ann".into()],
                out: "feat".into(),
                window_frames: 0,
                classify: true,
            }),
        ];
        for task in tasks {
            let cfg = RunConfig { threads: 2, task };
            let text = cfg.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = RunConfig {
            threads: 1,
            task: Task::Eval(EvalRun {
                pairs: vec![],
                out: "x".into(),
                pck_thresholds: 100,
            }),
        };
        let text = cfg.to_toml().unwrap().replace("pck_thresholds", "thresholds");
        assert!(RunConfig::from_toml(&text).is_err());
    }
}
