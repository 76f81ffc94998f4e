//! A one-hidden-layer encoder trained on the neighbor-embedding loss.
//!
//! The network maps `x` to `W2 relu(W1 x + b1) + b2`. Training walks
//! contiguous mini-batches; within a batch every stored pair whose endpoints
//! both lie in the batch fires with probability `p_ij`, contributing
//! `-ln q_ij` plus `m` in-batch negatives contributing `-ln(1 - q_il)`.
//! The batch loss is backpropagated by hand and applied with momentum SGD.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ParametricParams, RunConfig};
use crate::data::{squared_distance, DataMatrix, Embedding};
use crate::error::{param, Error, Result};
use crate::fuzzy::FuzzyGraph;
use crate::kernel::KernelParams;
use crate::optimize::PairSampler;

const FORMAT_HEADER: &str = "umap-encoder v1";

/// Fully connected `d -> h -> p` network, ReLU hidden layer, linear output.
///
/// Parameters live in one flat vector ordered `W1` (h x d, row-major), `b1`,
/// `W2` (p x h, row-major), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNet {
    d: usize,
    h: usize,
    p: usize,
    theta: Vec<f64>,
}

impl EncoderNet {
    pub fn zeros(d: usize, h: usize, p: usize) -> Result<Self> {
        if d == 0 || h == 0 || p == 0 {
            return Err(param(format!(
                "layer sizes must be positive, got {d}-{h}-{p}"
            )));
        }
        Ok(Self {
            d,
            h,
            p,
            theta: vec![0.0; d * h + h + h * p + p],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(d: usize, h: usize, p: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(d, h, p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 << 62);
        let l1 = (6.0 / (d + h) as f64).sqrt();
        let l2 = (6.0 / (h + p) as f64).sqrt();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for v in &mut net.theta[w1] {
            *v = rng.random_range(-l1..=l1);
        }
        for v in &mut net.theta[w2] {
            *v = rng.random_range(-l2..=l2);
        }
        Ok(net)
    }

    pub fn from_parts(d: usize, h: usize, p: usize, theta: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(d, h, p)?;
        if theta.len() != net.theta.len() {
            return Err(Error::Dimension {
                expected: net.theta.len(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(param("network parameters must be finite"));
        }
        Ok(Self { theta, ..net })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    pub fn output_dim(&self) -> usize {
        self.p
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.d * self.h
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.d * self.h;
        s..s + self.h
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.d * self.h + self.h;
        s..s + self.h * self.p
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.d * self.h + self.h + self.h * self.p;
        s..s + self.p
    }

    /// Hidden pre-activations and outputs for one input.
    fn forward_parts(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (w1, b1) = (&self.theta[self.w1_range()], &self.theta[self.b1_range()]);
        let (w2, b2) = (&self.theta[self.w2_range()], &self.theta[self.b2_range()]);
        let z: Vec<f64> = (0..self.h)
            .map(|r| {
                b1[r]
                    + w1[r * self.d..(r + 1) * self.d]
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect();
        let y = (0..self.p)
            .map(|r| {
                b2[r]
                    + w2[r * self.h..(r + 1) * self.h]
                        .iter()
                        .zip(&z)
                        .map(|(w, v)| w * v.max(0.0))
                        .sum::<f64>()
            })
            .collect();
        (z, y)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self.forward_parts(x).1)
    }

    /// Embeds every row of `data`.
    pub fn embed(&self, data: &DataMatrix) -> Result<Embedding> {
        if data.d() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: data.d(),
            });
        }
        let coords = data.rows().flat_map(|x| self.forward_parts(x).1).collect();
        Embedding::new(data.n(), self.p, coords)
    }

    /// Accumulates `dL/dtheta` for one input given `dL/dy`.
    fn backward(&self, x: &[f64], z: &[f64], gy: &[f64], grad: &mut [f64]) {
        let (d, h) = (self.d, self.h);
        let (w1r, b1r, w2r, b2r) = (
            self.w1_range(),
            self.b1_range(),
            self.w2_range(),
            self.b2_range(),
        );
        let w2 = &self.theta[w2r.clone()];
        for (r, g) in gy.iter().enumerate() {
            grad[b2r.start + r] += g;
            for c in 0..h {
                grad[w2r.start + r * h + c] += g * z[c].max(0.0);
            }
        }
        for c in 0..h {
            if z[c] <= 0.0 {
                continue;
            }
            let gh: f64 = gy.iter().enumerate().map(|(r, g)| g * w2[r * h + c]).sum();
            grad[b1r.start + c] += gh;
            for (k, xv) in x.iter().enumerate() {
                grad[w1r.start + c * d + k] += gh * xv;
            }
        }
    }

    /// Text serialization: a header line, the layer sizes, then `W1` rows,
    /// `b1`, `W2` rows and `b2`, comma separated.
    pub fn to_text(&self) -> String {
        let mut s = format!("{FORMAT_HEADER}\n{} {} {}\n", self.d, self.h, self.p);
        let mut line = |vals: &[f64]| {
            let parts: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", parts.join(","));
        };
        let w1 = &self.theta[self.w1_range()];
        for row in w1.chunks(self.d) {
            line(row);
        }
        line(&self.theta[self.b1_range()]);
        let w2 = &self.theta[self.w2_range()];
        for row in w2.chunks(self.h) {
            line(row);
        }
        line(&self.theta[self.b2_range()]);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i as u64 + 1, l.trim()));
        let bad = |line: u64, message: String| Error::Parse { line, message };
        match lines.next() {
            Some((_, FORMAT_HEADER)) => {}
            _ => return Err(bad(1, format!("expected header '{FORMAT_HEADER}'"))),
        }
        let (ln, dims) = lines
            .next()
            .ok_or_else(|| bad(2, "missing layer sizes".into()))?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|e| bad(ln, format!("layer size '{t}': {e}")))
            })
            .collect::<Result<_>>()?;
        let [d, h, p] = dims[..] else {
            return Err(bad(
                ln,
                format!("expected 3 layer sizes, got {}", dims.len()),
            ));
        };
        let mut theta = Vec::new();
        let mut read_row = |width: usize| -> Result<()> {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| bad(0, "unexpected end of model file".into()))?;
            let vals: Vec<f64> = l
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|e| bad(ln, format!("value '{t}': {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != width {
                return Err(bad(
                    ln,
                    format!("expected {width} values, got {}", vals.len()),
                ));
            }
            theta.extend(vals);
            Ok(())
        };
        for _ in 0..h {
            read_row(d)?;
        }
        read_row(h)?;
        for _ in 0..p {
            read_row(h)?;
        }
        read_row(p)?;
        Self::from_parts(d, h, p, theta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

/// A contiguous run of point indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Batch {
    pub start: usize,
    pub len: usize,
}

impl Batch {
    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && i < self.start + self.len
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// `floor(n / b)` contiguous batches of size `b`; a trailing remainder is
/// not visited.
pub fn make_batches(n: usize, b: usize) -> Result<Vec<Batch>> {
    if b == 0 || b > n {
        return Err(param(format!(
            "batch size {b} must satisfy 1 <= b <= n = {n}"
        )));
    }
    Ok((0..n / b)
        .map(|s| Batch {
            start: s * b,
            len: b,
        })
        .collect())
}

/// Sampled terms of one batch loss, as global point indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchPlan {
    pub attractive: Vec<(usize, usize)>,
    pub repulsive: Vec<(usize, usize)>,
}

/// Draws the firing pairs of `batch` and their in-batch negatives.
pub fn sample_plan(
    fg: &FuzzyGraph,
    batch: Batch,
    m: usize,
    sampler: &mut PairSampler,
    stream: u64,
) -> BatchPlan {
    let n = fg.n();
    let mut plan = BatchPlan::default();
    for i in batch.indices() {
        for (j, p_ij) in fg.row(i) {
            if !batch.contains(j) {
                continue;
            }
            sampler.seek(stream, n, i, j);
            if sampler.uniform() > p_ij {
                continue;
            }
            plan.attractive.push((i, j));
            for _ in 0..m {
                plan.repulsive
                    .push((i, batch.start + sampler.index(batch.len)));
            }
        }
    }
    plan
}

/// `-ln(1 - q)` with `q = 1 / (1 + a (d^2 + eps)^b)` and its derivative in `d^2`.
fn repulsive_term(kp: &KernelParams, dist_sq: f64) -> (f64, f64) {
    let s = dist_sq + kp.eps;
    let apow = kp.a * (kp.b * s.ln()).exp();
    let loss = (1.0 + apow).ln() - apow.ln();
    (loss, -kp.b / (s * (1.0 + apow)))
}

/// `-ln q` and its derivative in `d^2`.
fn attractive_term(kp: &KernelParams, dist_sq: f64) -> (f64, f64) {
    if dist_sq <= 0.0 {
        return (0.0, 0.0);
    }
    let apow = kp.a * (kp.b * dist_sq.ln()).exp();
    ((apow).ln_1p(), kp.attractive_coeff(dist_sq) / 2.0)
}

/// Loss of `plan` under `net` and its gradient with respect to the parameters.
pub fn loss_and_grad(
    net: &EncoderNet,
    data: &DataMatrix,
    batch: Batch,
    plan: &BatchPlan,
    kp: &KernelParams,
) -> (f64, Vec<f64>) {
    let p = net.output_dim();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = batch
        .indices()
        .map(|i| net.forward_parts(data.row(i)))
        .collect();
    let y = |i: usize| parts[i - batch.start].1.as_slice();
    let mut gy = vec![0.0; batch.len * p];
    let mut loss = 0.0;
    let mut accumulate = |i: usize, j: usize, term: &dyn Fn(f64) -> (f64, f64)| {
        let (yi, yj) = (y(i), y(j));
        let (l, dl) = term(squared_distance(yi, yj));
        loss += l;
        for c in 0..p {
            let g = 2.0 * dl * (yi[c] - yj[c]);
            gy[(i - batch.start) * p + c] += g;
            gy[(j - batch.start) * p + c] -= g;
        }
    };
    for &(i, j) in &plan.attractive {
        accumulate(i, j, &|d2| attractive_term(kp, d2));
    }
    for &(i, l) in &plan.repulsive {
        accumulate(i, l, &|d2| repulsive_term(kp, d2));
    }
    let mut grad = vec![0.0; net.param_count()];
    for (r, i) in batch.indices().enumerate() {
        net.backward(data.row(i), &parts[r].0, &gy[r * p..(r + 1) * p], &mut grad);
    }
    (loss, grad)
}

/// Loss totals of one training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch: usize,
    /// Sum of the batch losses.
    pub loss: f64,
    /// `loss` divided by the number of fired pairs (0 if none fired).
    pub mean_loss: f64,
    pub attractive_pairs: usize,
    pub repulsive_pairs: usize,
}

/// Encoder plus optimizer state.
#[derive(Debug, Clone)]
pub struct ParametricTrainer {
    net: EncoderNet,
    velocity: Vec<f64>,
    epoch: usize,
    kernel: KernelParams,
    negatives: usize,
    settings: ParametricParams,
    sampler: PairSampler,
}

impl ParametricTrainer {
    /// Fresh randomly initialized encoder for `d`-dimensional inputs.
    pub fn new(d: usize, config: &RunConfig) -> Result<Self> {
        let net = EncoderNet::random(d, config.parametric.hidden, config.dim, config.seed)?;
        Self::from_net(net, config)
    }

    pub fn from_net(net: EncoderNet, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            velocity: vec![0.0; net.param_count()],
            net,
            epoch: 0,
            kernel: config.kernel(),
            negatives: config.negative_samples,
            settings: config.parametric.clone(),
            sampler: PairSampler::new(config.seed, config.negative_samples),
        })
    }

    pub fn net(&self) -> &EncoderNet {
        &self.net
    }

    pub fn into_net(self) -> EncoderNet {
        self.net
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over all batches; `fg` must cover all of `data`.
    pub fn train_epoch(&mut self, data: &DataMatrix, fg: &FuzzyGraph) -> Result<TrainReport> {
        if fg.n() != data.n() {
            return Err(Error::Dimension {
                expected: data.n(),
                got: fg.n(),
            });
        }
        if data.d() != self.net.input_dim() {
            return Err(Error::Dimension {
                expected: self.net.input_dim(),
                got: data.d(),
            });
        }
        let epoch = self.epoch + 1;
        let b = self.settings.batch_size.min(data.n());
        let (lr, mu) = (self.settings.learning_rate, self.settings.momentum);
        let mut report = TrainReport {
            epoch,
            loss: 0.0,
            mean_loss: 0.0,
            attractive_pairs: 0,
            repulsive_pairs: 0,
        };
        for (s, batch) in make_batches(data.n(), b)?.into_iter().enumerate() {
            let stream = ((epoch as u64) << 32) | s as u64;
            let plan = sample_plan(fg, batch, self.negatives, &mut self.sampler, stream);
            let (loss, grad) = loss_and_grad(&self.net, data, batch, &plan, &self.kernel);
            for ((theta, v), g) in self.net.theta.iter_mut().zip(&mut self.velocity).zip(&grad) {
                *v = mu * *v - lr * g;
                *theta += *v;
            }
            if self.net.theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalDivergence {
                    epoch,
                    i: batch.start,
                    j: batch.start + batch.len - 1,
                });
            }
            report.loss += loss;
            report.attractive_pairs += plan.attractive.len();
            report.repulsive_pairs += plan.repulsive.len();
        }
        if report.attractive_pairs > 0 {
            report.mean_loss = report.loss / report.attractive_pairs as f64;
        }
        self.epoch = epoch;
        Ok(report)
    }
}

/// Functional form of [`ParametricTrainer::train_epoch`] for a bare network.
/// Momentum state starts from zero.
pub fn train_epoch(
    net: &mut EncoderNet,
    data: &DataMatrix,
    fg: &FuzzyGraph,
    config: &RunConfig,
) -> Result<TrainReport> {
    let mut trainer = ParametricTrainer::from_net(net.clone(), config)?;
    let report = trainer.train_epoch(data, fg)?;
    *net = trainer.into_net();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_outputs_zero() {
        let net = EncoderNet::zeros(3, 4, 2).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.param_count(), 3 * 4 + 4 + 4 * 2 + 2);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn identity_like_net() {
        let (d, p) = (3, 2);
        let mut theta = vec![0.0; d * d + d + d * p + p];
        for r in 0..d {
            theta[r * d + r] = 1.0;
        }
        let w2 = d * d + d;
        for r in 0..p {
            theta[w2 + r * d + r] = 1.0;
        }
        let net = EncoderNet::from_parts(d, d, p, theta).unwrap();
        assert_eq!(net.forward(&[0.5, 2.0, 7.0]).unwrap(), vec![0.5, 2.0]);
    }

    #[test]
    fn text_round_trip() {
        let net = EncoderNet::random(4, 6, 2, 11).unwrap();
        let back = EncoderNet::from_text(&net.to_text()).unwrap();
        assert_eq!(net, back);
        assert!(EncoderNet::from_text("nope").is_err());
    }

    #[test]
    fn batches_are_contiguous() {
        let b = make_batches(10, 3).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[2], Batch { start: 6, len: 3 });
        assert!(make_batches(3, 4).is_err());
    }

    #[test]
    fn no_edges_no_change() {
        let fg = FuzzyGraph::from_edges(4, &[]).unwrap();
        let data = DataMatrix::from_rows(&[
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![2.0, 2.0],
            vec![3.0, 1.0],
        ])
        .unwrap();
        let config = RunConfig {
            dim: 1,
            parametric: ParametricParams {
                hidden: 3,
                ..Default::default()
            },
            ..RunConfig::default()
        };
        let mut net = EncoderNet::random(2, 3, 1, 0).unwrap();
        let before = net.clone();
        let r = train_epoch(&mut net, &data, &fg, &config).unwrap();
        assert_eq!(r.loss, 0.0);
        assert_eq!(net, before);
    }
}
