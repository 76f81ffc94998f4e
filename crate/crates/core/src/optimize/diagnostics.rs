//! Exact loss and the expected-update weights implied by negative sampling.

use rayon::prelude::*;

use crate::data::{squared_distance, Embedding};
use crate::fuzzy::FuzzyGraph;
use crate::kernel::{KernelParams, ONE_MINUS_Q_FLOOR};

/// Fuzzy cross-entropy without its constant terms:
/// `-sum_{i != j} [p_ij ln q_ij + (1 - p_ij) ln(1 - q_ij)]`.
///
/// Quadratic in `n`; meant for diagnostics only.
pub fn exact_loss(emb: &Embedding, fg: &FuzzyGraph, kp: &KernelParams) -> f64 {
    let n = emb.n();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let targets = fg.row_targets(i);
            let weights = fg.row_weights(i);
            let mut cursor = 0;
            let mut total = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                while cursor < targets.len() && targets[cursor] < j {
                    cursor += 1;
                }
                let p = if cursor < targets.len() && targets[cursor] == j {
                    weights[cursor]
                } else {
                    0.0
                };
                let q = kp.q_from_sq(squared_distance(emb.point(i), emb.point(j)));
                if p > 0.0 {
                    total -= p * q.ln();
                }
                if p < 1.0 {
                    total -= (1.0 - p) * (1.0 - q).max(ONE_MINUS_Q_FLOOR).ln();
                }
            }
            total
        })
        .collect();
    rows.iter().sum()
}

/// Weight that sampling-with-negative-updates implicitly gives the repulsive
/// term of pair `(i, j)`: `(d_i + d_j) m / (2n)`.
pub fn effective_repulsive_weight(d_i: f64, d_j: f64, m: usize, n: usize) -> f64 {
    (d_i + d_j) * m as f64 / (2.0 * n as f64)
}

/// Expected per-epoch weights of one stored ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeights {
    pub i: usize,
    pub j: usize,
    /// `p_ij`.
    pub attractive: f64,
    /// `d_i m / (2n)`.
    pub repulsive: f64,
}

/// Expected gradient weights of the sampling scheme (negatives not moved).
///
/// Per ordered pair these are `p_ij` and `d_i m / (2n)`; summing both orders
/// gives the `2 sum_j (p_ij dc^a + d_i m/(2n) dc^r)` form of the expected
/// gradient. The repulsive weight depends only on the anchor, so it applies
/// to every `(i, l)`, stored or not.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedWeights {
    pub edges: Vec<EdgeWeights>,
    /// `d_i m / (2n)` for every anchor `i`.
    pub anchor_repulsive: Vec<f64>,
}

pub fn expected_gradient_weights(fg: &FuzzyGraph, m: usize) -> ExpectedWeights {
    let n = fg.n();
    let anchor_repulsive: Vec<f64> = fg
        .degrees()
        .iter()
        .map(|d| d * m as f64 / (2.0 * n as f64))
        .collect();
    let edges = (0..n)
        .flat_map(|i| {
            let w = anchor_repulsive[i];
            fg.row(i).map(move |(j, p)| EdgeWeights {
                i,
                j,
                attractive: p,
                repulsive: w,
            })
        })
        .collect();
    ExpectedWeights {
        edges,
        anchor_repulsive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_weight_pair_loss() {
        // d = 1 with a = b = 1 gives q = 0.5.
        let fg = FuzzyGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let emb = Embedding::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let kp = KernelParams {
            a: 1.0,
            b: 1.0,
            eps: 0.001,
        };
        let loss = exact_loss(&emb, &fg, &kp);
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn far_points_without_edges_have_vanishing_loss() {
        let fg = FuzzyGraph::from_edges(3, &[]).unwrap();
        let emb = Embedding::from_rows(&[vec![0.0], vec![1e8], vec![-1e8]]).unwrap();
        let loss = exact_loss(&emb, &fg, &KernelParams::default());
        assert!((0.0..1e-9).contains(&loss));
    }

    #[test]
    fn effective_weight_arithmetic() {
        assert!((effective_repulsive_weight(4.0, 4.0, 5, 100) - 0.2).abs() < 1e-15);
        assert_eq!(effective_repulsive_weight(4.0, 4.0, 0, 100), 0.0);
    }

    #[test]
    fn expected_weights_shape() {
        let fg = FuzzyGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
            .unwrap();
        let w = expected_gradient_weights(&fg, 0);
        assert!(w.anchor_repulsive.iter().all(|&v| v == 0.0));
        let w = expected_gradient_weights(&fg, 3);
        // every degree is 2
        assert!(w
            .anchor_repulsive
            .iter()
            .all(|&v| (v - 2.0 * 3.0 / 8.0).abs() < 1e-15));
        assert_eq!(w.edges.len(), 8);
        assert!(w.edges.iter().all(|e| e.attractive == 1.0));
    }
}
