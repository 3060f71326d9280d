//! The `evhand` command line.
//!
//! Every subcommand resolves its flags into a [`RunConfig`], writes it to
//! `run.toml` in its output directory and then runs it. Stages talk to each
//! other only through files.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
//! malformed input data, 3 numeric failure.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use evhand_core::event::LnesMode;
use evhand_core::par::Execution;
use evhand_core::sim::{HandSet, HoleMask, SimConfig};
use evhand_core::solver::{PredictorKind, RefinementConfig};

use args::{Cli, Command, FormatArg, HandsArg, InitArg, ModeArg, PredictorArg};
use config::{
    AnnotateRun, EncodeRun, EvalPair, EvalRun, EventFileFormat, FeaturesRun, InitKind, RunConfig, SimulateRun,
    SolveInput, SolveRun, Task,
};
use error::{CliResult, Context, ExitKind, Failure};

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitKind::Usage as i32 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<String> {
    let cfg = match cli.command {
        Command::Replay(a) => {
            let mut cfg = RunConfig::read(&a.config)?;
            if let Some(out) = a.out {
                cfg.task.set_out(absolute(&out)?);
            }
            cfg
        }
        cmd => RunConfig {
            threads: cli.threads,
            task: resolve(cmd)?,
        },
    };
    cfg.save()?;
    execute(&cfg)
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
}

/// Turns parsed flags into a fully resolved task.
pub fn resolve(cmd: Command) -> CliResult<Task> {
    Ok(match cmd {
        Command::Simulate(a) => {
            let mut sim = match &a.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).data_at(p)?;
                    toml::from_str::<SimConfig>(&text).at(ExitKind::Usage, p)?
                }
                None => SimConfig::default(),
            };
            if let Some(d) = a.duration_s {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Failure::usage("--duration-s must be positive"));
                }
                sim.duration_us = (d * 1e6).round() as u64;
            }
            if let Some(v) = a.frame_rate {
                sim.frame_rate = v;
            }
            if let Some(v) = a.seed {
                sim.seed = v;
            }
            if let Some(h) = a.hands {
                sim.hands = match h {
                    HandsArg::Bimanual => HandSet::Bimanual,
                    HandsArg::Single => HandSet::Single,
                };
            }
            if let Some(v) = a.articulation_mm {
                sim.articulation_mm = v;
            }
            if let Some(v) = a.translation_mm {
                sim.translation_mm = v;
            }
            if let Some(v) = a.noise_rate {
                sim.noise_rate = v;
            }
            if let Some(v) = a.contrast_step {
                sim.contrast_step = v;
            }
            if let Some(d) = a.distortion {
                sim.distortion = d.try_into().map_err(|_| Failure::usage("--distortion takes 5 values"))?;
            }
            if let Some(h) = &a.holes {
                sim.depth_holes = parse_holes(h)?;
            }
            sim.validate().map_err(Failure::usage)?;
            Task::Simulate(SimulateRun {
                out: absolute(&a.out)?,
                sim,
            })
        }
        Command::Encode(a) => {
            let format = match a.format {
                FormatArg::Binary => EventFileFormat::Binary,
                FormatArg::Csv => EventFileFormat::Csv,
            };
            if format == EventFileFormat::Csv && (a.width.is_none() || a.height.is_none()) {
                return Err(Failure::usage("CSV input needs --width and --height"));
            }
            if a.delta_t_us == 0 || a.delta_t_us > evhand_core::event::MAX_DELTA_T_US {
                return Err(Failure::usage("--delta-t-us must be in (0, 2^32]"));
            }
            let stride_us = a.stride_us.unwrap_or(a.delta_t_us);
            if stride_us == 0 {
                return Err(Failure::usage("--stride-us must be positive"));
            }
            Task::Encode(EncodeRun {
                events: absolute(&a.events)?,
                format,
                width: a.width,
                height: a.height,
                out: absolute(&a.out)?,
                delta_t_us: a.delta_t_us,
                mode: match a.mode {
                    ModeArg::Sum => LnesMode::Sum,
                    ModeArg::Latest => LnesMode::Latest,
                },
                stride_us,
            })
        }
        Command::Annotate(a) => Task::Annotate(AnnotateRun {
            kp2d: absolute(&a.kp2d)?,
            depth_dir: absolute(&a.depth_dir)?,
            calib: absolute(&a.calib)?,
            out: absolute(&a.out)?,
            window: a.window,
            max_gap: a.max_gap,
            scenario: a.scenario,
        }),
        Command::Solve(a) => {
            let from_annotation = a.annotation.is_some();
            let input = match (&a.annotation, &a.heatmaps) {
                (Some(p), _) => {
                    if !(a.scale > 0.0 && a.scale <= 1.0) {
                        return Err(Failure::usage("--scale must be in (0, 1]"));
                    }
                    if !(a.sigma > 0.0) || !(a.peak_noise_px >= 0.0) {
                        return Err(Failure::usage("--sigma must be positive and --peak-noise-px non-negative"));
                    }
                    SolveInput::Annotation {
                        path: absolute(p)?,
                        scale: a.scale,
                        sigma: a.sigma,
                        peak_noise_px: a.peak_noise_px,
                        seed: a.seed,
                    }
                }
                (None, Some(d)) => SolveInput::Heatmaps { dir: absolute(d)? },
                (None, None) => return Err(Failure::usage("one of --annotation or --heatmaps is required")),
            };
            let init = match a.init {
                Some(InitArg::Labels) => InitKind::Labels,
                Some(InitArg::SoftArgmax) => InitKind::SoftArgmax,
                Some(InitArg::Argmax) => InitKind::Argmax,
                None if from_annotation => InitKind::Labels,
                None => InitKind::SoftArgmax,
            };
            if init == InitKind::Labels && !from_annotation {
                return Err(Failure::usage("--init labels needs --annotation"));
            }
            let predictor = match a.predictor {
                PredictorArg::GaussNewton => PredictorKind::GaussNewton,
                PredictorArg::Oracle => PredictorKind::Oracle,
            };
            if predictor == PredictorKind::Oracle && !from_annotation {
                return Err(Failure::usage("the oracle predictor needs --annotation"));
            }
            let step_ratio = match a.step_ratio.len() {
                1 => vec![a.step_ratio[0]; a.iters],
                n if n == a.iters => a.step_ratio,
                n => return Err(Failure::usage(format!("{n} step ratios for {} iterations", a.iters))),
            };
            let refinement = RefinementConfig {
                n_iters: a.iters,
                step_ratio,
                backtracking: !a.no_backtracking,
                max_halvings: a.max_halvings,
                patch_radius: a.patch_radius.unwrap_or(if from_annotation { 12 } else { 8 }),
                temperature: a.temperature.unwrap_or(if from_annotation {
                    1.0
                } else {
                    evhand_core::heatmap::DEFAULT_TEMPERATURE
                }),
                predictor,
            };
            refinement.validate().map_err(Failure::usage)?;
            Task::Solve(SolveRun {
                input,
                calib: absolute(&a.calib)?,
                out: absolute(&a.out)?,
                init,
                dump_heatmaps: a.dump_heatmaps,
                refinement,
            })
        }
        Command::Eval(a) => {
            if a.pred.len() != a.gt.len() {
                return Err(Failure::usage("--pred and --gt must be given the same number of times"));
            }
            if a.pck_thresholds < 2 {
                return Err(Failure::usage("--pck-thresholds must be at least 2"));
            }
            let pairs = a
                .pred
                .iter()
                .zip(&a.gt)
                .map(|(p, g)| {
                    Ok(EvalPair {
                        pred: absolute(p)?,
                        gt: absolute(g)?,
                    })
                })
                .collect::<CliResult<_>>()?;
            Task::Eval(EvalRun {
                pairs,
                out: absolute(&a.out)?,
                pck_thresholds: a.pck_thresholds,
            })
        }
        Command::Features(a) => Task::Features(FeaturesRun {
            inputs: a.inputs.iter().map(|p| absolute(p)).collect::<CliResult<_>>()?,
            out: absolute(&a.out)?,
            window_frames: a.window_frames,
            classify: a.classify,
        }),
        Command::Replay(_) => return Err(Failure::usage("replay cannot be nested")),
    })
}

fn parse_holes(s: &str) -> CliResult<HoleMask> {
    let bad = || Failure::usage(format!("bad --holes value {s:?}; use none, full or random:COUNT:RADIUS"));
    match s.split(':').collect::<Vec<_>>().as_slice() {
        ["none"] => Ok(HoleMask::None),
        ["full"] => Ok(HoleMask::Full),
        ["random", count, radius] => Ok(HoleMask::Random {
            count: count.parse().map_err(|_| bad())?,
            radius: radius.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

/// Runs a resolved configuration and returns a one-line summary.
pub fn execute(cfg: &RunConfig) -> CliResult<String> {
    let exec = if cfg.threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    with_threads(cfg.threads, || match &cfg.task {
        Task::Simulate(r) => commands::simulate(r, exec),
        Task::Encode(r) => commands::encode(r, exec),
        Task::Annotate(r) => commands::annotate(r, exec),
        Task::Solve(r) => commands::solve(r, exec),
        Task::Eval(r) => commands::eval(r),
        Task::Features(r) => commands::features(r, exec),
    })
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> CliResult<R> + Send) -> CliResult<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R>(_threads: usize, f: impl FnOnce() -> CliResult<R>) -> CliResult<R> {
    f()
}
