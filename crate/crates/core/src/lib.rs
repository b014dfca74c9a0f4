//! Salient object detection by inner and inter label propagation over a
//! superpixel graph.
//!
//! The pipeline runs in stages:
//!
//! 1. [`imaging`]: decode, L0 gradient-minimization smoothing, CIE LAB conversion.
//! 2. [`segmentation`]: SLIC superpixels, region statistics, adjacency, border regions.
//! 3. [`graph`]: the 2-layer/geodesic affinity matrix and the clamped label
//!    propagation engine seeded from selected boundary regions.
//! 4. [`fusion`]: the compactness gate and the co-transduction of boundary
//!    and objectness labels for maps the gate rejects.
//! 5. [`objectness`]: window sampling with the MS/CC/ED cues that produce
//!    the objectness label set.
//! 6. [`coherence`]: regional to pixel saliency up-sampling and PNG output.
//!
//! [`evaluation`] implements the benchmark metrics (PR curves, adaptive
//! threshold F-measure, overlap, MAE) and [`pipeline`] wires everything
//! into single-image and batch runs driven by a [`config::PipelineConfig`].

pub mod coherence;
pub mod config;
mod error;
pub mod evaluation;
mod fft;
pub mod fixtures;
pub mod fusion;
pub mod graph;
pub mod imaging;
pub mod objectness;
pub mod pipeline;
pub mod segmentation;

pub use error::{Error, Result};
