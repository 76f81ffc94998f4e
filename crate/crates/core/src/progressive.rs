//! Streaming embedding: grow the point set batch by batch.
//!
//! The first batch is embedded exactly as in batch mode. Every later batch is
//! merged into the exact neighbor graph, its points start at the embedding
//! of their nearest previously seen point plus a little Gaussian noise, and
//! a short fixed-rate SGD run moves only the new and affected points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::RunConfig;
use crate::data::{DataMatrix, Embedding};
use crate::error::{param, Error, Result};
use crate::fuzzy::FuzzyGraph;
use crate::knn::{nearest_among, NeighborGraph};
use crate::optimize::{clip, pair_gradient, step, EpochReport, OptimizerState, PairSampler};
use crate::spectral::spectral_embed;

/// Everything seen so far, kept mutually consistent.
#[derive(Debug, Clone)]
pub struct StreamState {
    accumulated: DataMatrix,
    graph: NeighborGraph,
    fuzzy: FuzzyGraph,
    embedding: Embedding,
    batch_counter: u64,
}

impl StreamState {
    /// Embeds the first batch with the full batch pipeline.
    pub fn start(batch: &DataMatrix, config: &RunConfig) -> Result<(Self, Vec<EpochReport>)> {
        config.validate()?;
        if batch.n() <= config.k {
            return Err(param(format!(
                "first batch has {} points but needs more than k = {}",
                batch.n(),
                config.k
            )));
        }
        let graph = NeighborGraph::build(batch, config.k)?;
        let fuzzy = FuzzyGraph::build(&graph)?;
        let init = spectral_embed(&fuzzy, config.dim, config.seed)?;
        let mut opt = OptimizerState::new(init, config.clone())?;
        let reports = opt.run(&fuzzy)?;
        let state = Self {
            accumulated: batch.clone(),
            graph,
            fuzzy,
            embedding: opt.into_embedding(),
            batch_counter: 1,
        };
        Ok((state, reports))
    }

    pub fn accumulated(&self) -> &DataMatrix {
        &self.accumulated
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    pub fn fuzzy(&self) -> &FuzzyGraph {
        &self.fuzzy
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn into_embedding(self) -> Embedding {
        self.embedding
    }

    /// Batches ingested so far, including the first.
    pub fn batch_counter(&self) -> u64 {
        self.batch_counter
    }

    pub fn n(&self) -> usize {
        self.accumulated.n()
    }

    /// Adds a later batch and re-optimizes the new and updated points.
    pub fn ingest(&mut self, batch: &DataMatrix, config: &RunConfig) -> Result<Vec<EpochReport>> {
        self.ingest_with(batch, config, false)
    }

    /// Places `points` against the current state without changing it. Only
    /// the new points move during optimization; their coordinates are
    /// returned in input order.
    pub fn embed_out_of_sample(
        &self,
        points: &DataMatrix,
        config: &RunConfig,
    ) -> Result<Embedding> {
        if points.n() == 0 {
            return Ok(Embedding::zeros(0, self.embedding.p()));
        }
        let old_n = self.n();
        let mut scratch = self.clone();
        scratch.ingest_with(points, config, true)?;
        Ok(scratch.embedding.slice_rows(old_n, scratch.n()))
    }

    fn ingest_with(
        &mut self,
        batch: &DataMatrix,
        config: &RunConfig,
        freeze_existing: bool,
    ) -> Result<Vec<EpochReport>> {
        config.validate()?;
        if batch.d() != self.accumulated.d() {
            return Err(Error::Dimension {
                expected: self.accumulated.d(),
                got: batch.d(),
            });
        }
        if batch.n() == 0 {
            return Ok(Vec::new());
        }
        let old_n = self.n();
        let updated = self.graph.insert_batch(&self.accumulated, batch)?;
        self.accumulated.append(batch)?;
        self.fuzzy.recalibrate(&self.graph, &updated)?;

        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream((1 << 63) | self.batch_counter);
        let noise = Normal::new(0.0, config.stream.noise_std)
            .map_err(|e| param(format!("noise std: {e}")))?;
        for i in old_n..self.n() {
            let nearest = nearest_among(
                &self.accumulated,
                self.accumulated.row(i),
                0..old_n,
                None,
                1,
            );
            let mut y = self.embedding.point(nearest[0].index).to_vec();
            for v in &mut y {
                *v += noise.sample(&mut noise_rng);
            }
            self.embedding.push(&y);
        }

        let anchors: Vec<usize> = if freeze_existing {
            (old_n..self.n()).collect()
        } else {
            updated
        };
        let movable = |i: usize| !freeze_existing || i >= old_n;
        let reports = self.local_sgd(&anchors, config, movable)?;
        self.batch_counter += 1;
        Ok(reports)
    }

    /// Fixed-rate SGD with `anchors` as the only attractive sources.
    fn local_sgd(
        &mut self,
        anchors: &[usize],
        config: &RunConfig,
        movable: impl Fn(usize) -> bool,
    ) -> Result<Vec<EpochReport>> {
        let n = self.n();
        let kp = config.kernel();
        let m = config.negative_samples;
        let eta = config.stream.learning_rate;
        let mut sampler = PairSampler::new(config.seed, m);
        let mut reports = Vec::with_capacity(config.stream.epochs);
        for epoch in 1..=config.stream.epochs {
            let stream = (self.batch_counter << 32) | epoch as u64;
            let mut attractive_updates = 0;
            let mut repulsive_updates = 0;
            let mut repulsive_displacement = 0.0;
            for &i in anchors {
                for (j, p_ij) in self.fuzzy.row(i) {
                    sampler.seek(stream, n, i, j);
                    if sampler.uniform() > p_ij {
                        continue;
                    }
                    let mut g = pair_gradient(&self.embedding, i, j, |d| kp.attractive_coeff(d));
                    clip(&mut g, config.grad_clip);
                    step(&mut self.embedding, i, &g, eta);
                    if config.stream.update_positives && movable(j) {
                        step(&mut self.embedding, j, &g, -eta);
                    }
                    attractive_updates += 1;
                    for _ in 0..m {
                        let l = sampler.index(n);
                        let mut g = pair_gradient(&self.embedding, i, l, |d| kp.repulsive_coeff(d));
                        clip(&mut g, config.grad_clip);
                        step(&mut self.embedding, i, &g, eta);
                        if config.update_negatives && movable(l) {
                            step(&mut self.embedding, l, &g, -eta);
                        }
                        repulsive_updates += 1;
                        repulsive_displacement += eta * g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    }
                    if !self.embedding.point(i).iter().all(|v| v.is_finite()) {
                        return Err(Error::NumericalDivergence { epoch, i, j });
                    }
                }
            }
            reports.push(EpochReport {
                epoch,
                learning_rate: eta,
                exact_loss: None,
                attractive_updates,
                repulsive_updates,
                repulsive_displacement,
                density_correlation: None,
            });
        }
        if !self.embedding.is_finite() {
            return Err(Error::NumericalDivergence {
                epoch: config.stream.epochs,
                i: 0,
                j: 0,
            });
        }
        Ok(reports)
    }
}

/// Functional form of [`StreamState::ingest`].
pub fn ingest_batch(
    mut state: StreamState,
    batch: &DataMatrix,
    config: &RunConfig,
) -> Result<StreamState> {
    state.ingest(batch, config)?;
    Ok(state)
}

/// Functional form of [`StreamState::embed_out_of_sample`].
pub fn embed_out_of_sample(
    state: &StreamState,
    points: &DataMatrix,
    config: &RunConfig,
) -> Result<Embedding> {
    state.embed_out_of_sample(points, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::two_clusters;

    fn config() -> RunConfig {
        RunConfig {
            k: 5,
            epochs: 30,
            ..RunConfig::default()
        }
    }

    #[test]
    fn first_batch_must_exceed_k() {
        let (data, _) = two_clusters(2, 4, 1.0, 0.5, 1);
        assert!(matches!(
            StreamState::start(&data, &config()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn duplicate_point_starts_near_its_twin() {
        let (data, _) = two_clusters(20, 4, 10.0, 0.5, 2);
        let (state, _) = StreamState::start(&data, &config()).unwrap();
        let twin = DataMatrix::new(1, 4, data.row(7).to_vec()).unwrap();
        let cfg = RunConfig {
            stream: crate::config::StreamParams {
                epochs: 0,
                ..Default::default()
            },
            ..config()
        };
        let mut s = state.clone();
        s.ingest(&twin, &cfg).unwrap();
        let y = s.embedding().point(40);
        let t = state.embedding().point(7);
        let dist = crate::data::euclidean(y, t);
        assert!(dist > 0.0 && dist < 0.06, "{dist}");
        assert_eq!(s.batch_counter(), 2);
    }

    #[test]
    fn out_of_sample_leaves_state_alone() {
        let (data, _) = two_clusters(20, 4, 10.0, 0.5, 3);
        let (state, _) = StreamState::start(&data, &config()).unwrap();
        let before = state.embedding().clone();
        let pts = data.select_rows(&[0, 25]);
        let out = state.embed_out_of_sample(&pts, &config()).unwrap();
        assert_eq!(out.n(), 2);
        assert_eq!(state.embedding(), &before);
        let empty = state
            .embed_out_of_sample(&DataMatrix::empty(4).unwrap(), &config())
            .unwrap();
        assert_eq!(empty.n(), 0);
    }

    #[test]
    fn wrong_dimension_rejected() {
        let (data, _) = two_clusters(20, 4, 10.0, 0.5, 4);
        let (mut state, _) = StreamState::start(&data, &config()).unwrap();
        let bad = DataMatrix::new(1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(
            state.ingest(&bad, &config()),
            Err(Error::Dimension { .. })
        ));
    }
}
