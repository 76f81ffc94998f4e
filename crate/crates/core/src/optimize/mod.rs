//! Sampling-based stochastic gradient descent over the fuzzy graph.
//!
//! Each epoch walks every ordered pair `(i, j)` with `p_ij > 0` in row-major
//! order. A pair fires with probability `p_ij`; a firing pair pulls `y_i` and
//! `y_j` together and then pushes `y_i` away from `m` uniformly drawn points.
//! The step size decays linearly from 1 to 0 over the epoch budget.

mod diagnostics;
mod sampler;

pub use diagnostics::{
    effective_repulsive_weight, exact_loss, expected_gradient_weights, EdgeWeights, ExpectedWeights,
};
pub use sampler::PairSampler;

use crate::config::{RunConfig, EXACT_LOSS_MAX_POINTS};
use crate::data::{squared_distance, Embedding};
use crate::densmap::{self, InputDensity};
use crate::error::{param, Error, Result};
use crate::fuzzy::FuzzyGraph;
use crate::kernel::KernelParams;

/// Per-epoch statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Step size used during this epoch.
    pub learning_rate: f64,
    /// Exact cross-entropy after the epoch, when tracked.
    pub exact_loss: Option<f64>,
    pub attractive_updates: usize,
    pub repulsive_updates: usize,
    /// Sum of the norms of all repulsive displacements applied to anchors.
    pub repulsive_displacement: f64,
    /// Correlation of input and embedding log radii at the start of the
    /// epoch, when the density regularizer is active.
    pub density_correlation: Option<f64>,
}

impl EpochReport {
    pub const CSV_HEADER: &'static str = "epoch,exact_loss,attractive_updates,repulsive_updates";

    /// `epoch,exact_loss,attractive_updates,repulsive_updates[,correlation]`.
    pub fn csv_line(&self) -> String {
        let loss = self
            .exact_loss
            .map_or_else(|| "NA".to_string(), |l| l.to_string());
        let mut s = format!(
            "{},{},{},{}",
            self.epoch, loss, self.attractive_updates, self.repulsive_updates
        );
        if let Some(c) = self.density_correlation {
            s.push_str(&format!(",{c}"));
        }
        s
    }
}

/// Scales `g` down to norm `max` if it is longer.
#[inline]
pub(crate) fn clip(g: &mut [f64], max: Option<f64>) {
    if let Some(max) = max {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > max {
            let s = max / norm;
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Gradient of a pair cost with respect to `y_i`, given its scalar
/// coefficient on `y_i - y_j`.
#[inline]
pub(crate) fn pair_gradient(
    emb: &Embedding,
    i: usize,
    j: usize,
    coeff: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let (yi, yj) = (emb.point(i), emb.point(j));
    let c = coeff(squared_distance(yi, yj));
    yi.iter().zip(yj).map(|(a, b)| c * (a - b)).collect()
}

#[inline]
pub(crate) fn step(emb: &mut Embedding, i: usize, g: &[f64], scale: f64) {
    for (y, gv) in emb.point_mut(i).iter_mut().zip(g) {
        *y -= scale * gv;
    }
}

#[inline]
fn finite(emb: &Embedding, i: usize) -> bool {
    emb.point(i).iter().all(|v| v.is_finite())
}

/// Embedding plus schedule state for the batch optimizer.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    embedding: Embedding,
    epoch: usize,
    eta: f64,
    config: RunConfig,
    kernel: KernelParams,
    sampler: PairSampler,
    density: Option<(f64, InputDensity)>,
}

impl OptimizerState {
    pub fn new(embedding: Embedding, config: RunConfig) -> Result<Self> {
        config.validate()?;
        if !embedding.is_finite() {
            return Err(param("initial embedding has non-finite coordinates"));
        }
        Ok(Self {
            embedding,
            epoch: 0,
            eta: 1.0,
            kernel: config.kernel(),
            sampler: PairSampler::new(config.seed, config.negative_samples),
            density: None,
            config,
        })
    }

    /// Enables the density-correlation regularizer. Each epoch starts with a
    /// step along the gradient of `-lambda * W * Corr(r_q, r_p)`, where `W` is
    /// the total edge weight of the graph.
    pub fn with_density(mut self, lambda: f64, input: InputDensity) -> Result<Self> {
        if input.len() != self.embedding.n() {
            return Err(Error::Dimension {
                expected: self.embedding.n(),
                got: input.len(),
            });
        }
        self.density = Some((lambda, input));
        Ok(self)
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn into_embedding(self) -> Embedding {
        self.embedding
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Step size for the next epoch.
    pub fn learning_rate(&self) -> f64 {
        self.eta
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// One pass of the pair double loop.
    pub fn run_epoch(&mut self, fg: &FuzzyGraph) -> Result<EpochReport> {
        let n = self.embedding.n();
        if fg.n() != n {
            return Err(Error::Dimension {
                expected: n,
                got: fg.n(),
            });
        }
        let epoch = self.epoch + 1;
        let eta = self.eta;
        let m = self.config.negative_samples;
        let kp = self.kernel;
        let clip_at = self.config.grad_clip;

        let mut density_correlation = None;
        if let Some((lambda, input)) = &self.density {
            // The cross-entropy sums over every edge while the correlation is
            // O(1), so lambda is taken per unit of total edge weight.
            let weight = *lambda * fg.total_weight();
            let (corr, grads) =
                densmap::regularizer_gradients(&self.embedding, fg, &kp, input, weight);
            density_correlation = corr;
            if let Some(grads) = grads {
                for (i, g) in grads.chunks_exact(self.embedding.p()).enumerate() {
                    let mut g = g.to_vec();
                    clip(&mut g, clip_at);
                    step(&mut self.embedding, i, &g, eta);
                    if !finite(&self.embedding, i) {
                        return Err(Error::NumericalDivergence { epoch, i, j: i });
                    }
                }
            }
        }

        let mut attractive_updates = 0;
        let mut repulsive_updates = 0;
        let mut repulsive_displacement = 0.0;
        for i in 0..n {
            for (j, p_ij) in fg.row(i) {
                self.sampler.seek(epoch as u64, n, i, j);
                if self.sampler.uniform() > p_ij {
                    continue;
                }
                let mut g = pair_gradient(&self.embedding, i, j, |d| kp.attractive_coeff(d));
                clip(&mut g, clip_at);
                step(&mut self.embedding, i, &g, eta);
                step(&mut self.embedding, j, &g, -eta);
                attractive_updates += 1;
                if !finite(&self.embedding, i) || !finite(&self.embedding, j) {
                    return Err(Error::NumericalDivergence { epoch, i, j });
                }

                for _ in 0..m {
                    let l = self.sampler.index(n);
                    let mut g = pair_gradient(&self.embedding, i, l, |d| kp.repulsive_coeff(d));
                    clip(&mut g, clip_at);
                    let weight = if self.config.effective_weights {
                        let eff = effective_repulsive_weight(fg.degree(i), fg.degree(l), m, n);
                        let w = eff / (1.0 - fg.weight(i, l));
                        if w.is_nan() {
                            1.0
                        } else {
                            w.clamp(0.0, 1.0)
                        }
                    } else {
                        1.0
                    };
                    let scale = eta * weight;
                    step(&mut self.embedding, i, &g, scale);
                    if self.config.update_negatives {
                        step(&mut self.embedding, l, &g, -scale);
                    }
                    repulsive_updates += 1;
                    repulsive_displacement += scale * g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !finite(&self.embedding, i) || !finite(&self.embedding, l) {
                        return Err(Error::NumericalDivergence { epoch, i, j: l });
                    }
                }
            }
        }

        self.epoch = epoch;
        self.eta = 1.0 - epoch as f64 / self.config.epochs as f64;
        let exact = (self.config.track_loss && n <= EXACT_LOSS_MAX_POINTS)
            .then(|| exact_loss(&self.embedding, fg, &kp));
        Ok(EpochReport {
            epoch,
            learning_rate: eta,
            exact_loss: exact,
            attractive_updates,
            repulsive_updates,
            repulsive_displacement,
            density_correlation,
        })
    }

    /// Runs the remaining epochs of the budget.
    pub fn run(&mut self, fg: &FuzzyGraph) -> Result<Vec<EpochReport>> {
        self.run_with(fg, |_| {})
    }

    /// Like [`OptimizerState::run`], calling `observer` after every epoch.
    pub fn run_with(
        &mut self,
        fg: &FuzzyGraph,
        mut observer: impl FnMut(&EpochReport),
    ) -> Result<Vec<EpochReport>> {
        let mut reports = Vec::with_capacity(self.config.epochs - self.epoch);
        while !self.is_finished() {
            let r = self.run_epoch(fg)?;
            observer(&r);
            reports.push(r);
        }
        Ok(reports)
    }
}
