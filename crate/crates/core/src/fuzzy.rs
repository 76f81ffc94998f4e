//! The symmetric fuzzy similarity graph over the input points.
//!
//! For each point `i` the nearest-neighbor distance `rho_i` and a scale
//! `sigma_i` are calibrated so that the shifted exponential memberships of its
//! `k` neighbors sum to `log2(k)`. Directional memberships are then merged with
//! the fuzzy union `a + b - ab`.

use crate::error::{param, Error, Result};
use crate::knn::NeighborGraph;

/// Residual tolerance of the scale search.
pub const SIGMA_TOLERANCE: f64 = 1e-5;
/// Iteration cap of the scale search.
pub const SIGMA_MAX_ITER: usize = 100;

/// Outcome of the per-point scale search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaFit {
    pub sigma: f64,
    /// `sum_j exp(-(d_j - rho)/sigma) - log2(k)` at the returned sigma.
    pub residual: f64,
    /// No sigma inside the search bracket reaches the target; `sigma` is
    /// clamped to the nearer bracket end.
    pub saturated: bool,
}

/// Distance from point `i` to its nearest neighbor.
pub fn compute_rho(graph: &NeighborGraph, i: usize) -> f64 {
    graph
        .neighbors(i)
        .iter()
        .map(|nb| nb.distance)
        .fold(f64::INFINITY, f64::min)
}

/// `sum_j exp(-max(d_j - rho, 0) / sigma)`.
pub fn membership_sum(distances: &[f64], rho: f64, sigma: f64) -> f64 {
    distances
        .iter()
        .map(|&d| (-(d - rho).max(0.0) / sigma).exp())
        .sum()
}

/// Search bracket `[1e-6 r, 1e3 r]` where `r` is the mean of the nonzero
/// distances (1 when all are zero).
pub fn sigma_bracket(distances: &[f64]) -> (f64, f64) {
    let (sum, count) = distances
        .iter()
        .filter(|&&d| d > 0.0)
        .fold((0.0, 0usize), |(s, c), &d| (s + d, c + 1));
    let scale = if count == 0 { 1.0 } else { sum / count as f64 };
    (1e-6 * scale, 1e3 * scale)
}

/// Finds `sigma` with `membership_sum(distances, rho, sigma) = log2(k)` by
/// bisection, `k = distances.len()`.
pub fn calibrate_sigma(distances: &[f64], rho: f64, tol: f64) -> Result<SigmaFit> {
    let k = distances.len();
    if k < 2 {
        return Err(param(format!(
            "scale calibration needs at least 2 neighbors, got {k}"
        )));
    }
    if !(tol > 0.0) {
        return Err(param("calibration tolerance must be positive"));
    }
    let target = (k as f64).log2();
    let residual = |sigma: f64| membership_sum(distances, rho, sigma) - target;

    let (mut lo, mut hi) = sigma_bracket(distances);
    let r_lo = residual(lo);
    if r_lo >= -tol {
        return Ok(SigmaFit {
            sigma: lo,
            residual: r_lo,
            saturated: r_lo > tol,
        });
    }
    let r_hi = residual(hi);
    if r_hi <= tol {
        return Ok(SigmaFit {
            sigma: hi,
            residual: r_hi,
            saturated: r_hi < -tol,
        });
    }

    let mut best = SigmaFit {
        sigma: hi,
        residual: r_hi,
        saturated: false,
    };
    for _ in 0..SIGMA_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < best.residual.abs() {
            best = SigmaFit {
                sigma: mid,
                residual: r,
                saturated: false,
            };
        }
        if r.abs() <= tol {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Directional membership of `j` in the neighborhood of `i`; zero when `j`
/// is not among `i`'s k nearest neighbors.
pub fn directional_p(graph: &NeighborGraph, rho: &[f64], sigma: &[f64], i: usize, j: usize) -> f64 {
    graph
        .neighbors(i)
        .iter()
        .find(|nb| nb.index == j)
        .map_or(0.0, |nb| membership(nb.distance, rho[i], sigma[i]))
}

#[inline]
fn membership(distance: f64, rho: f64, sigma: f64) -> f64 {
    // Underflow would silently drop a kNN edge; keep it at the smallest normal.
    (-(distance - rho).max(0.0) / sigma)
        .exp()
        .clamp(f64::MIN_POSITIVE, 1.0)
}

/// Fuzzy union `a + b - ab` of two directional memberships.
///
/// Evaluated as `hi + lo (1 - hi)` so that a membership of 1 absorbs
/// exactly, 0 is an exact identity, and argument order does not matter.
#[inline]
pub fn symmetrize(p_ji: f64, p_ij: f64) -> f64 {
    let (hi, lo) = if p_ji >= p_ij {
        (p_ji, p_ij)
    } else {
        (p_ij, p_ji)
    };
    (hi + lo * (1.0 - hi)).clamp(0.0, 1.0)
}

/// Sparse symmetric membership graph `p_ij` with per-point calibration data.
///
/// Rows are stored in compressed form with ascending column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    rho: Vec<f64>,
    sigma: Vec<f64>,
    saturated: Vec<bool>,
    /// Directional memberships `p_{j|i}` in each point's kNN order.
    memberships: Vec<Vec<(usize, f64)>>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    degree: Vec<f64>,
}

impl FuzzyGraph {
    /// Calibrates every point of `graph` and assembles the symmetric graph.
    pub fn build(graph: &NeighborGraph) -> Result<Self> {
        let n = graph.n();
        let mut fg = FuzzyGraph {
            rho: vec![0.0; n],
            sigma: vec![1.0; n],
            saturated: vec![false; n],
            memberships: vec![Vec::new(); n],
            offsets: Vec::new(),
            targets: Vec::new(),
            weights: Vec::new(),
            degree: Vec::new(),
        };
        let all: Vec<usize> = (0..n).collect();
        fg.recalibrate(graph, &all)?;
        Ok(fg)
    }

    /// Graph with explicit symmetric weights, one entry per unordered pair.
    /// Calibration fields are filled with placeholders (`rho = 0`, `sigma = 1`).
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut memberships = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(param(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(param(format!("edge weight {w} outside (0, 1]")));
            }
            // Stored one-sided so the fuzzy union reproduces w exactly.
            memberships[i].push((j, w));
        }
        let mut fg = FuzzyGraph {
            rho: vec![0.0; n],
            sigma: vec![1.0; n],
            saturated: vec![false; n],
            memberships,
            offsets: Vec::new(),
            targets: Vec::new(),
            weights: Vec::new(),
            degree: Vec::new(),
        };
        fg.assemble();
        Ok(fg)
    }

    /// Recomputes rho, sigma and directional memberships for `points`
    /// (which may include indices beyond the current size), then rebuilds the
    /// symmetric graph.
    pub(crate) fn recalibrate(&mut self, graph: &NeighborGraph, points: &[usize]) -> Result<()> {
        let n = graph.n();
        self.rho.resize(n, 0.0);
        self.sigma.resize(n, 1.0);
        self.saturated.resize(n, false);
        self.memberships.resize(n, Vec::new());
        for &i in points {
            let distances: Vec<f64> = graph.neighbors(i).iter().map(|nb| nb.distance).collect();
            let rho = compute_rho(graph, i);
            let fit = calibrate_sigma(&distances, rho, SIGMA_TOLERANCE)?;
            self.rho[i] = rho;
            self.sigma[i] = fit.sigma;
            self.saturated[i] = fit.saturated;
            self.memberships[i] = graph
                .neighbors(i)
                .iter()
                .map(|nb| (nb.index, membership(nb.distance, rho, fit.sigma)))
                .collect();
        }
        self.assemble();
        Ok(())
    }

    fn assemble(&mut self) {
        let n = self.memberships.len();
        // (column, p_{col|row}, p_{row|col})
        let mut rows: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
        for (i, list) in self.memberships.iter().enumerate() {
            for &(j, w) in list {
                rows[i].push((j, w, 0.0));
                rows[j].push((i, 0.0, w));
            }
        }
        self.offsets = Vec::with_capacity(n + 1);
        self.offsets.push(0);
        self.targets.clear();
        self.weights.clear();
        self.degree = Vec::with_capacity(n);
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut deg = 0.0;
            let mut idx = 0;
            while idx < row.len() {
                let (j, mut fwd, mut back) = row[idx];
                idx += 1;
                while idx < row.len() && row[idx].0 == j {
                    fwd += row[idx].1;
                    back += row[idx].2;
                    idx += 1;
                }
                let p = symmetrize(fwd, back);
                self.targets.push(j);
                self.weights.push(p);
                deg += p;
            }
            self.degree.push(deg);
            self.offsets.push(self.targets.len());
        }
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Points whose scale search hit a bracket end without reaching the target.
    pub fn saturated(&self) -> &[bool] {
        &self.saturated
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Directional memberships `(j, p_{j|i})` of point `i`.
    pub fn memberships(&self, i: usize) -> &[(usize, f64)] {
        &self.memberships[i]
    }

    /// Neighbor indices of row `i`, ascending.
    pub fn row_targets(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Weights aligned with [`FuzzyGraph::row_targets`].
    pub fn row_weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_targets(i)
            .iter()
            .copied()
            .zip(self.row_weights(i).iter().copied())
    }

    /// `p_ij`, zero for unstored pairs.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match self.row_targets(i).binary_search(&j) {
            Ok(pos) => self.row_weights(i)[pos],
            Err(_) => 0.0,
        }
    }

    /// Number of stored ordered pairs (twice the number of undirected edges).
    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    /// `sum_{i != j} p_ij` over ordered pairs.
    pub fn total_weight(&self) -> f64 {
        self.degree.iter().sum()
    }

    /// Fails with [`Error::IsolatedPoint`] if some point has zero degree.
    pub fn ensure_no_isolated(&self) -> Result<()> {
        match self.degree.iter().position(|&d| !(d > 0.0)) {
            Some(i) => Err(Error::IsolatedPoint(i)),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataMatrix;

    #[test]
    fn rho_is_min_distance() {
        let data = DataMatrix::new(4, 1, vec![0.0, 2.0, 3.0, 5.0]).unwrap();
        let g = NeighborGraph::build(&data, 3).unwrap();
        assert_eq!(compute_rho(&g, 0), 2.0);
        let dup = DataMatrix::new(3, 1, vec![1.0, 1.0, 4.0]).unwrap();
        let g = NeighborGraph::build(&dup, 2).unwrap();
        assert_eq!(compute_rho(&g, 0), 0.0);
    }

    #[test]
    fn sigma_closed_form() {
        let fit = calibrate_sigma(&[1.0, 2.0, 2.0, 2.0], 1.0, 1e-12).unwrap();
        let expected = 1.0 / 3f64.ln();
        assert!((fit.sigma - expected).abs() < 1e-9, "{}", fit.sigma);
        assert!((expected - 0.9102).abs() < 1e-4);
        assert!(!fit.saturated);
    }

    #[test]
    fn sigma_target_for_k15() {
        let d: Vec<f64> = (1..=15).map(|v| v as f64).collect();
        let fit = calibrate_sigma(&d, 1.0, SIGMA_TOLERANCE).unwrap();
        let sum = membership_sum(&d, 1.0, fit.sigma);
        assert!((15f64.log2() - 3.9069).abs() < 1e-4);
        assert!((sum - 15f64.log2()).abs() <= SIGMA_TOLERANCE);
    }

    #[test]
    fn sigma_saturates_on_duplicates() {
        let d = [0.5; 6];
        let fit = calibrate_sigma(&d, 0.5, SIGMA_TOLERANCE).unwrap();
        assert!(fit.saturated);
        assert_eq!(fit.sigma, sigma_bracket(&d).0);
    }

    #[test]
    fn sigma_rejects_k1() {
        assert!(calibrate_sigma(&[1.0], 1.0, 1e-5).is_err());
    }

    #[test]
    fn symmetrize_examples() {
        assert_eq!(symmetrize(1.0, 1.0), 1.0);
        assert_eq!(symmetrize(0.0, 0.0), 0.0);
        assert!((symmetrize(0.5, 0.2) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn directional_examples() {
        let data = DataMatrix::new(4, 1, vec![0.0, 1.0, 2.5, 10.0]).unwrap();
        let g = NeighborGraph::build(&data, 2).unwrap();
        let fg = FuzzyGraph::build(&g).unwrap();
        // nearest neighbor has membership 1
        assert_eq!(directional_p(&g, fg.rho(), fg.sigma(), 0, 1), 1.0);
        // not a neighbor
        assert_eq!(directional_p(&g, fg.rho(), fg.sigma(), 0, 3), 0.0);
        // distance rho + sigma gives e^-1
        let sigma = [1.0, 1.0, 1.0, 1.0];
        let rho = [0.5, 0.0, 0.0, 0.0];
        let p = directional_p(&g, &rho, &sigma, 0, 1);
        assert!((p - (-0.5f64).exp()).abs() < 1e-15);
        let rho = [0.0, 0.0, 0.0, 0.0];
        let p = directional_p(&g, &rho, &sigma, 0, 1);
        assert!((p - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn mutual_nearest_pair_has_unit_weight() {
        let data = DataMatrix::new(4, 1, vec![0.0, 0.1, 5.0, 7.0]).unwrap();
        let g = NeighborGraph::build(&data, 2).unwrap();
        let fg = FuzzyGraph::build(&g).unwrap();
        assert_eq!(fg.weight(0, 1), 1.0);
        assert_eq!(fg.weight(1, 0), 1.0);
    }

    #[test]
    fn from_edges_roundtrip() {
        let fg = FuzzyGraph::from_edges(3, &[(0, 1, 0.5), (2, 1, 0.25)]).unwrap();
        assert_eq!(fg.weight(1, 0), 0.5);
        assert_eq!(fg.weight(1, 2), 0.25);
        assert_eq!(fg.weight(0, 2), 0.0);
        assert_eq!(fg.degree(1), 0.75);
        assert_eq!(fg.nnz(), 4);
        assert!(FuzzyGraph::from_edges(2, &[(0, 0, 0.5)]).is_err());
        assert!(FuzzyGraph::from_edges(2, &[(0, 1, 1.5)]).is_err());
    }
}
