//! Neighborhood-fidelity measures for finished embeddings.

use rayon::prelude::*;

use crate::data::{DataMatrix, Embedding};
use crate::error::{param, Error, Result};
use crate::knn::NeighborGraph;

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub knn_preservation: f64,
    pub label_agreement: Option<f64>,
    /// Exact loss of the initial embedding, when tracked.
    pub loss_initial: Option<f64>,
    pub loss_final: Option<f64>,
}

/// Mean fraction of each point's `k` input-space neighbors that are also
/// among its `k` embedding-space neighbors.
pub fn knn_preservation(data: &DataMatrix, emb: &Embedding, k: usize) -> Result<f64> {
    if data.n() != emb.n() {
        return Err(Error::Dimension {
            expected: data.n(),
            got: emb.n(),
        });
    }
    let high = NeighborGraph::build_any_k(data, k)?;
    let low = NeighborGraph::build_any_k(&emb.to_data_matrix()?, k)?;
    let total: usize = (0..data.n())
        .into_par_iter()
        .map(|i| {
            high.neighbors(i)
                .iter()
                .filter(|nb| low.contains(i, nb.index))
                .count()
        })
        .sum();
    Ok(total as f64 / (data.n() * k) as f64)
}

/// Mean fraction of each point's `k` embedding-space neighbors sharing its
/// label.
pub fn label_agreement(emb: &Embedding, labels: &[i64], k: usize) -> Result<f64> {
    let all: Vec<usize> = (0..emb.n()).collect();
    label_agreement_subset(emb, labels, k, &all)
}

/// [`label_agreement`] averaged over `subset` only; neighbors are still
/// searched among all points.
pub fn label_agreement_subset(
    emb: &Embedding,
    labels: &[i64],
    k: usize,
    subset: &[usize],
) -> Result<f64> {
    if labels.len() != emb.n() {
        return Err(param(format!(
            "{} labels for {} points",
            labels.len(),
            emb.n()
        )));
    }
    if subset.is_empty() {
        return Err(param("label agreement over an empty set of points"));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= emb.n()) {
        return Err(param(format!("point {bad} out of range")));
    }
    let graph = NeighborGraph::build_any_k(&emb.to_data_matrix()?, k)?;
    let same: usize = subset
        .par_iter()
        .map(|&i| {
            graph
                .neighbors(i)
                .iter()
                .filter(|nb| labels[nb.index] == labels[i])
                .count()
        })
        .sum();
    Ok(same as f64 / (subset.len() * k) as f64)
}
