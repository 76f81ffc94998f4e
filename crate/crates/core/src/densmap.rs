//! Density-preserving regularization.
//!
//! The local radius of a point is the membership-weighted mean squared
//! distance to its graph neighbors, measured once in the input space (weights
//! `p_ij`) and once in the embedding (weights `q_ij`). The regularizer
//! rewards Pearson correlation between the two sets of log radii.

use crate::data::{squared_distance, DataMatrix, Embedding};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyGraph;
use crate::kernel::KernelParams;
use crate::optimize::exact_loss;

/// Added to radii before taking logarithms so coincident neighborhoods stay finite.
pub const RADIUS_FLOOR: f64 = 1e-8;

/// `sum_j p_ij ||x_i - x_j||^2 / sum_j p_ij` over the stored edges of `i`.
pub fn local_radius_p(fg: &FuzzyGraph, data: &DataMatrix, i: usize) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (j, p) in fg.row(i) {
        num += p * squared_distance(data.row(i), data.row(j));
        den += p;
    }
    if !(den > 0.0) {
        return Err(Error::IsolatedPoint(i));
    }
    Ok(num / den)
}

/// `sum_j q_ij ||y_i - y_j||^2 / sum_j q_ij` over the stored edges of `i`.
pub fn local_radius_q(
    emb: &Embedding,
    fg: &FuzzyGraph,
    kp: &KernelParams,
    i: usize,
) -> Result<f64> {
    let (num, den) = radius_terms(emb, fg, kp, i);
    if !(den > 0.0) {
        return Err(Error::IsolatedPoint(i));
    }
    Ok(num / den)
}

fn radius_terms(emb: &Embedding, fg: &FuzzyGraph, kp: &KernelParams, i: usize) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for &j in fg.row_targets(i) {
        let d2 = squared_distance(emb.point(i), emb.point(j));
        let q = kp.q_from_sq(d2);
        num += q * d2;
        den += q;
    }
    (num, den)
}

#[inline]
fn log_radius(r: f64) -> f64 {
    (r + RADIUS_FLOOR).ln()
}

/// Log local radii of the input points; fixed for a given graph.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDensity {
    log_radius: Vec<f64>,
}

impl InputDensity {
    pub fn compute(fg: &FuzzyGraph, data: &DataMatrix) -> Result<Self> {
        let log_radius = (0..fg.n())
            .map(|i| local_radius_p(fg, data, i).map(log_radius))
            .collect::<Result<_>>()?;
        Ok(Self { log_radius })
    }

    pub fn from_log_radii(log_radius: Vec<f64>) -> Self {
        Self { log_radius }
    }

    pub fn values(&self) -> &[f64] {
        &self.log_radius
    }

    pub fn len(&self) -> usize {
        self.log_radius.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_radius.is_empty()
    }
}

/// Log local radii of every embedded point.
pub fn embedding_log_radii(
    emb: &Embedding,
    fg: &FuzzyGraph,
    kp: &KernelParams,
) -> Result<Vec<f64>> {
    (0..emb.n())
        .map(|i| local_radius_q(emb, fg, kp, i).map(log_radius))
        .collect()
}

fn centred(x: &[f64]) -> (f64, Vec<f64>, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss = c.iter().map(|v| v * v).sum::<f64>();
    (mean, c, ss)
}

fn degenerate(ss: f64, mean: f64, n: usize) -> bool {
    // Relative to the magnitude, so constant vectors with rounding noise count.
    ss / n as f64 <= 1e-24 * (1.0 + mean * mean)
}

/// Pearson correlation `Cov(r_q, r_p) / sqrt(Var(r_q) Var(r_p))`.
pub fn correlation(r_q: &[f64], r_p: &[f64]) -> Result<f64> {
    if r_q.len() != r_p.len() {
        return Err(Error::Dimension {
            expected: r_p.len(),
            got: r_q.len(),
        });
    }
    if r_q.len() < 2 {
        return Err(Error::DegenerateDensity);
    }
    let n = r_q.len();
    let (mq, u, suu) = centred(r_q);
    let (mp, v, svv) = centred(r_p);
    if degenerate(suu, mq, n) || degenerate(svv, mp, n) {
        return Err(Error::DegenerateDensity);
    }
    // The 1/(n-1) factors of covariance and variances cancel.
    let suv: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    Ok((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

/// Snapshot of both density profiles and the regularization weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub r_p: Vec<f64>,
    pub r_q: Vec<f64>,
    pub mu_p: f64,
    pub mu_q: f64,
    pub lambda: f64,
}

impl DensityState {
    pub fn new(
        emb: &Embedding,
        fg: &FuzzyGraph,
        kp: &KernelParams,
        input: &InputDensity,
        lambda: f64,
    ) -> Result<Self> {
        let r_q = embedding_log_radii(emb, fg, kp)?;
        let r_p = input.values().to_vec();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(Self {
            mu_p: mean(&r_p),
            mu_q: mean(&r_q),
            r_p,
            r_q,
            lambda,
        })
    }

    pub fn correlation(&self) -> Result<f64> {
        correlation(&self.r_q, &self.r_p)
    }
}

/// `exact_loss - lambda * Corr(r_q, r_p)`.
pub fn densmap_loss(
    emb: &Embedding,
    fg: &FuzzyGraph,
    data: &DataMatrix,
    kp: &KernelParams,
    lambda: f64,
) -> Result<f64> {
    let base = exact_loss(emb, fg, kp);
    if lambda == 0.0 {
        return Ok(base);
    }
    let input = InputDensity::compute(fg, data)?;
    let r_q = embedding_log_radii(emb, fg, kp)?;
    Ok(base - lambda * correlation(&r_q, input.values())?)
}

/// Gradient of `-lambda * Corr(r_q, r_p)` with respect to `y_i`.
pub fn densmap_gradient(
    emb: &Embedding,
    fg: &FuzzyGraph,
    data: &DataMatrix,
    kp: &KernelParams,
    lambda: f64,
    i: usize,
) -> Result<Vec<f64>> {
    let p = emb.p();
    if lambda == 0.0 {
        return Ok(vec![0.0; p]);
    }
    let input = InputDensity::compute(fg, data)?;
    let (_, grads) = regularizer_gradients(emb, fg, kp, &input, lambda);
    Ok(grads.map_or_else(|| vec![0.0; p], |g| g[i * p..(i + 1) * p].to_vec()))
}

/// Correlation and the full row-major gradient of `-lambda * Corr` for all
/// points. The gradient is `None` when either profile has zero variance.
///
/// With `u`, `v` the centred log radii, `dCorr/dr_q^k = (v_k/|v| - Corr u_k/|u|) / |u|`.
/// Each stored edge `(i, j)` enters both `r_q^i` and `r_q^j` through
/// `d_ij^2`, and `dR_i/dd^2 = (q + d^2 q' - R_i q') / Z_i` with
/// `q' = dq/dd^2 = -ab (d^2)^(b-1) q^2` and `Z_i = sum_j q_ij`.
pub(crate) fn regularizer_gradients(
    emb: &Embedding,
    fg: &FuzzyGraph,
    kp: &KernelParams,
    input: &InputDensity,
    lambda: f64,
) -> (Option<f64>, Option<Vec<f64>>) {
    let n = emb.n();
    let p = emb.p();
    let mut radius = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let (num, den) = radius_terms(emb, fg, kp, i);
        if !(den > 0.0) {
            return (None, None);
        }
        radius.push(num / den);
        z.push(den);
    }
    let r_q: Vec<f64> = radius.iter().map(|&r| log_radius(r)).collect();
    let Ok(corr) = correlation(&r_q, input.values()) else {
        return (None, None);
    };
    let (_, u, suu) = centred(&r_q);
    let (_, v, svv) = centred(input.values());
    let (nu, nv) = (suu.sqrt(), svv.sqrt());
    let g: Vec<f64> = u
        .iter()
        .zip(&v)
        .map(|(uk, vk)| (vk / nv - corr * uk / nu) / nu)
        .collect();

    let dr = |k: usize, q: f64, d2: f64, dq: f64| {
        (q + d2 * dq - radius[k] * dq) / z[k] / (radius[k] + RADIUS_FLOOR)
    };
    let mut grad = vec![0.0; n * p];
    for i in 0..n {
        let yi = emb.point(i);
        for &j in fg.row_targets(i) {
            let yj = emb.point(j);
            let d2 = squared_distance(yi, yj);
            if d2 <= 0.0 {
                continue;
            }
            let q = kp.q_from_sq(d2);
            let dq = -kp.a * kp.b * ((kp.b - 1.0) * d2.ln()).exp() * q * q;
            let coeff = g[i] * dr(i, q, d2, dq) + g[j] * dr(j, q, d2, dq);
            for c in 0..p {
                grad[i * p + c] -= lambda * coeff * 2.0 * (yi[c] - yj[c]);
            }
        }
    }
    (Some(corr), Some(grad))
}
