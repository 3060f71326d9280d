//! Geometry, data pipeline and evaluation core for stereo event-camera hand
//! pose estimation.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`event`]: event streams, the `binary_v1`/CSV codecs, temporal windows and
//!   LNES surface encoding.
//! - [`camera`]: Brown–Conrady pinhole cameras, stereo rigs and calibration files.
//! - [`heatmap`]: Gaussian heatmap rendering, soft-argmax decoding and bilinear
//!   grid sampling.
//! - [`solver`]: confidence-weighted stereo triangulation and the
//!   reprojection-guided iterative refinement loop.
//! - [`annotation`]: depth back-projection, gap interpolation and stereo
//!   label projection.
//! - [`metrics`] and [`losses`]: the evaluation suite and loss formulas.
//! - [`features`]: wrist-centric, palm-normalised gesture feature sequences.
//! - [`sim`]: a synthetic stereo event and ground-truth generator.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Every parallel path is deterministic: results are bit-identical to the
//! sequential schedule.

pub mod annotation;
pub mod camera;
pub mod event;
pub mod features;
pub mod heatmap;
pub mod losses;
pub mod metrics;
pub mod par;
pub mod pose;
pub mod sim;
pub mod solver;

pub use pose::{HandPose3D, Keypoints2D, JOINTS, JOINTS_PER_HAND};
