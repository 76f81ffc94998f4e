//! Run configuration shared by every embedding mode.

use crate::error::{param, Result};
use crate::kernel::KernelParams;

/// Which optimizer drives the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Spectral initialization followed by sampling-based SGD over all points.
    Batch,
    /// Feed the data in fixed-size chunks through the streaming embedder.
    Progressive,
    /// Train a feed-forward encoder and embed every point through it.
    Parametric,
}

/// Settings for progressive (streaming) ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamParams {
    /// Points per streamed chunk when the pipeline splits a dataset.
    pub batch_size: usize,
    /// Epochs of local re-optimization per ingested chunk.
    pub epochs: usize,
    /// Fixed step size; streaming does not decay it.
    pub learning_rate: f64,
    /// Standard deviation of the noise added to nearest-neighbor initialization.
    pub noise_std: f64,
    /// Also move positive partners, not just the anchors.
    pub update_positives: bool,
}

impl Default for StreamParams {
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 50,
            learning_rate: 0.3,
            noise_std: 1e-2,
            update_positives: false,
        }
    }
}

/// Settings for the parametric encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricParams {
    pub hidden: usize,
    /// Mini-batch size; clamped to the dataset size.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for ParametricParams {
    fn default() -> Self {
        Self {
            hidden: 100,
            batch_size: 256,
            learning_rate: 1e-3,
            momentum: 0.9,
        }
    }
}

/// Every hyperparameter of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Neighbors per point in the input-space graph.
    pub k: usize,
    /// Kernel shape parameter `a` of `q = 1 / (1 + a d^(2b))`.
    pub a: f64,
    /// Kernel shape parameter `b`.
    pub b: f64,
    /// Negative samples drawn per fired positive pair.
    pub negative_samples: usize,
    /// Stabilizer added to squared distances in the repulsive gradient.
    pub eps: f64,
    /// Epoch budget.
    pub epochs: usize,
    /// DensMAP regularization weight; `None` disables the regularizer.
    pub densmap_lambda: Option<f64>,
    pub seed: u64,
    /// Move negative samples as well as anchors.
    pub update_negatives: bool,
    /// Reweight repulsion by the expected effective weight. Requires
    /// `update_negatives`.
    pub effective_weights: bool,
    /// Embedding dimensionality.
    pub dim: usize,
    /// Per-update gradient norm cap; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Evaluate the exact O(n^2) loss every epoch (only when n <= 2000).
    pub track_loss: bool,
    pub mode: Mode,
    pub stream: StreamParams,
    pub parametric: ParametricParams,
}

/// Upper bound on `n` for the quadratic loss evaluator.
pub const EXACT_LOSS_MAX_POINTS: usize = 2000;

/// Regularization weight used when DensMAP is requested without a value.
pub const DEFAULT_DENSMAP_LAMBDA: f64 = 2.0;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 15,
            a: 1.929,
            b: 0.7915,
            negative_samples: 5,
            eps: 0.001,
            epochs: 200,
            densmap_lambda: None,
            seed: 0,
            update_negatives: false,
            effective_weights: false,
            dim: 2,
            grad_clip: Some(4.0),
            track_loss: true,
            mode: Mode::Batch,
            stream: StreamParams::default(),
            parametric: ParametricParams::default(),
        }
    }
}

impl RunConfig {
    pub fn kernel(&self) -> KernelParams {
        KernelParams {
            a: self.a,
            b: self.b,
            eps: self.eps,
        }
    }

    /// Checks the data-independent invariants.
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(param(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(param(format!("a must be positive, got {}", self.a)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(param(format!("b must be positive, got {}", self.b)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(param(format!("eps must be positive, got {}", self.eps)));
        }
        if self.dim < 1 {
            return Err(param("embedding dimension must be at least 1"));
        }
        if self.epochs < 1 {
            return Err(param("epoch budget must be at least 1"));
        }
        if let Some(lambda) = self.densmap_lambda {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(param(format!("densmap lambda must be >= 0, got {lambda}")));
            }
        }
        if let Some(clip) = self.grad_clip {
            if !(clip > 0.0) {
                return Err(param(format!("gradient clip must be positive, got {clip}")));
            }
        }
        if self.effective_weights && !self.update_negatives {
            return Err(param(
                "effective weights require negative-sample updates (--update-negatives true)",
            ));
        }
        let s = &self.stream;
        if s.batch_size < 1 {
            return Err(param("stream batch size must be at least 1"));
        }
        if !(s.learning_rate > 0.0) || !(s.noise_std >= 0.0) {
            return Err(param("stream learning rate must be > 0 and noise std >= 0"));
        }
        let pm = &self.parametric;
        if pm.hidden < 1 || pm.batch_size < 1 {
            return Err(param("hidden width and batch size must be at least 1"));
        }
        if !(pm.learning_rate > 0.0) || !(0.0..1.0).contains(&pm.momentum) {
            return Err(param(
                "parametric learning rate must be > 0 and momentum in [0, 1)",
            ));
        }
        Ok(())
    }

    /// Checks the invariants that depend on the dataset shape.
    pub fn validate_for(&self, n: usize, d: usize) -> Result<()> {
        self.validate()?;
        if n < 2 {
            return Err(crate::Error::DatasetTooSmall { n });
        }
        if self.k >= n {
            return Err(param(format!(
                "k = {} must be smaller than n = {n}",
                self.k
            )));
        }
        if self.dim >= d {
            return Err(param(format!(
                "embedding dimension {} must be smaller than input dimension {d}",
                self.dim
            )));
        }
        if self.mode == Mode::Progressive && self.stream.batch_size.min(n) <= self.k {
            return Err(param(format!(
                "first streamed batch needs more than k = {} points",
                self.k
            )));
        }
        Ok(())
    }
}
