//! End-to-end orchestration of a run in any mode.

use std::fmt;

use crate::config::{Mode, RunConfig, EXACT_LOSS_MAX_POINTS};
use crate::data::{DataMatrix, Embedding};
use crate::densmap::InputDensity;
use crate::error::{param, Error};
use crate::fuzzy::FuzzyGraph;
use crate::knn::NeighborGraph;
use crate::metrics::{knn_preservation, label_agreement, QualityReport};
use crate::optimize::{exact_loss, EpochReport, OptimizerState};
use crate::parametric::{EncoderNet, ParametricTrainer};
use crate::progressive::StreamState;
use crate::spectral::spectral_embed;

/// Pipeline step an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Knn,
    Fuzzy,
    Spectral,
    Densmap,
    Optimize,
    Progressive,
    Parametric,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Knn => "knn",
            Stage::Fuzzy => "fuzzy",
            Stage::Spectral => "spectral",
            Stage::Densmap => "densmap",
            Stage::Optimize => "optimize",
            Stage::Progressive => "progressive",
            Stage::Parametric => "parametric",
            Stage::Metrics => "metrics",
        };
        f.write_str(name)
    }
}

/// A library error tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunResult {
    pub embedding: Embedding,
    /// One entry per executed epoch, across all streamed batches.
    pub reports: Vec<EpochReport>,
    pub quality: QualityReport,
    pub config_echo: RunConfig,
    /// Trained network in parametric mode.
    pub encoder: Option<EncoderNet>,
}

/// Progress notifications emitted while a run executes.
#[derive(Debug)]
pub enum Event<'a> {
    Epoch(&'a EpochReport),
    /// A streamed batch has been absorbed; `embedding` covers all points so far.
    Batch {
        index: usize,
        embedding: &'a Embedding,
    },
}

/// Runs the configured mode on `data` without progress output.
pub fn run(
    config: &RunConfig,
    data: &DataMatrix,
    labels: Option<&[i64]>,
) -> Result<RunResult, PipelineError> {
    run_with(config, data, labels, |_| {})
}

/// [`run`] with an observer for per-epoch and per-batch events.
pub fn run_with(
    config: &RunConfig,
    data: &DataMatrix,
    labels: Option<&[i64]>,
    mut observer: impl FnMut(Event<'_>),
) -> Result<RunResult, PipelineError> {
    validate(config, data, labels).at(Stage::Config)?;
    let tracked = config.track_loss && data.n() <= EXACT_LOSS_MAX_POINTS;

    let (embedding, reports, loss_initial, loss_final, encoder) = match config.mode {
        Mode::Batch => {
            let graph = NeighborGraph::build(data, config.k).at(Stage::Knn)?;
            let fg = FuzzyGraph::build(&graph).at(Stage::Fuzzy)?;
            let init = spectral_embed(&fg, config.dim, config.seed).at(Stage::Spectral)?;
            let loss_initial = tracked.then(|| exact_loss(&init, &fg, &config.kernel()));
            let mut opt = OptimizerState::new(init, config.clone()).at(Stage::Optimize)?;
            if let Some(lambda) = config.densmap_lambda {
                let input = InputDensity::compute(&fg, data).at(Stage::Densmap)?;
                opt = opt.with_density(lambda, input).at(Stage::Densmap)?;
            }
            let reports = opt
                .run_with(&fg, |r| observer(Event::Epoch(r)))
                .at(Stage::Optimize)?;
            let emb = opt.into_embedding();
            let loss_final = tracked.then(|| exact_loss(&emb, &fg, &config.kernel()));
            (emb, reports, loss_initial, loss_final, None)
        }
        Mode::Progressive => {
            let size = config.stream.batch_size;
            let first = data.slice_rows(0, size.min(data.n()));
            let (mut state, mut reports) =
                StreamState::start(&first, config).at(Stage::Progressive)?;
            reports.iter().for_each(|r| observer(Event::Epoch(r)));
            observer(Event::Batch {
                index: 1,
                embedding: state.embedding(),
            });
            let mut start = first.n();
            while start < data.n() {
                let end = (start + size).min(data.n());
                let more = state
                    .ingest(&data.slice_rows(start, end), config)
                    .at(Stage::Progressive)?;
                more.iter().for_each(|r| observer(Event::Epoch(r)));
                reports.extend(more);
                observer(Event::Batch {
                    index: state.batch_counter() as usize,
                    embedding: state.embedding(),
                });
                start = end;
            }
            let loss_final =
                tracked.then(|| exact_loss(state.embedding(), state.fuzzy(), &config.kernel()));
            (state.into_embedding(), reports, None, loss_final, None)
        }
        Mode::Parametric => {
            let graph = NeighborGraph::build(data, config.k).at(Stage::Knn)?;
            let fg = FuzzyGraph::build(&graph).at(Stage::Fuzzy)?;
            let kp = config.kernel();
            let mut trainer = ParametricTrainer::new(data.d(), config).at(Stage::Parametric)?;
            let loss_of = |net: &EncoderNet| -> crate::Result<Option<f64>> {
                Ok(if tracked {
                    Some(exact_loss(&net.embed(data)?, &fg, &kp))
                } else {
                    None
                })
            };
            let loss_initial = loss_of(trainer.net()).at(Stage::Parametric)?;
            let mut reports = Vec::with_capacity(config.epochs);
            for _ in 0..config.epochs {
                let t = trainer.train_epoch(data, &fg).at(Stage::Parametric)?;
                let report = EpochReport {
                    epoch: t.epoch,
                    learning_rate: config.parametric.learning_rate,
                    exact_loss: loss_of(trainer.net()).at(Stage::Parametric)?,
                    attractive_updates: t.attractive_pairs,
                    repulsive_updates: t.repulsive_pairs,
                    repulsive_displacement: 0.0,
                    density_correlation: None,
                };
                observer(Event::Epoch(&report));
                reports.push(report);
            }
            let net = trainer.into_net();
            let emb = net.embed(data).at(Stage::Parametric)?;
            let loss_final = reports.last().and_then(|r| r.exact_loss);
            (emb, reports, loss_initial, loss_final, Some(net))
        }
    };

    let quality = QualityReport {
        knn_preservation: knn_preservation(data, &embedding, config.k).at(Stage::Metrics)?,
        label_agreement: labels
            .map(|l| label_agreement(&embedding, l, config.k))
            .transpose()
            .at(Stage::Metrics)?,
        loss_initial,
        loss_final,
    };
    Ok(RunResult {
        embedding,
        reports,
        quality,
        config_echo: config.clone(),
        encoder,
    })
}

fn validate(config: &RunConfig, data: &DataMatrix, labels: Option<&[i64]>) -> crate::Result<()> {
    config.validate_for(data.n(), data.d())?;
    if config.densmap_lambda.is_some() && config.mode != Mode::Batch {
        return Err(param(
            "the density regularizer is only available in batch mode",
        ));
    }
    if let Some(labels) = labels {
        if labels.len() != data.n() {
            return Err(param(format!(
                "{} labels for {} points",
                labels.len(),
                data.n()
            )));
        }
    }
    Ok(())
}
