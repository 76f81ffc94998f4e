//! Uniform manifold approximation and projection, built from scratch.
//!
//! The batch pipeline is `knn` → `fuzzy` → `spectral` → `optimize`, with the
//! optional `densmap` regularizer; `progressive` and `parametric` are
//! alternative drivers over the same graph machinery. [`pipeline::run`] wires
//! everything together.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod dataio;
pub mod densmap;
pub mod error;
pub mod fuzzy;
pub mod kernel;
pub mod knn;
pub mod metrics;
pub mod optimize;
pub mod parametric;
pub mod pipeline;
pub mod progressive;
pub mod spectral;
pub mod synthetic;

pub use config::{Mode, ParametricParams, RunConfig, StreamParams};
pub use data::{DataMatrix, Embedding};
pub use error::{Error, Result};
pub use fuzzy::FuzzyGraph;
pub use kernel::KernelParams;
pub use knn::NeighborGraph;
pub use metrics::QualityReport;
pub use optimize::{EpochReport, OptimizerState};
pub use pipeline::{run, run_with, Event, PipelineError, RunResult, Stage};
