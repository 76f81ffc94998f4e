//! Exact k-nearest-neighbor graphs under the Euclidean metric.
//!
//! Neighbors are ordered by `(distance, index)`, so ties always resolve to the
//! lower point index and results do not depend on thread scheduling.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::data::{euclidean, DataMatrix};
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

/// Per-point ascending lists of the `k` nearest other points.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    neighbors: Vec<Vec<Neighbor>>,
}

impl NeighborGraph {
    /// Exact kNN graph of `data`. Requires `2 <= k < n`.
    pub fn build(data: &DataMatrix, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(param(format!("k must be at least 2, got {k}")));
        }
        Self::build_any_k(data, k)
    }

    /// Like [`NeighborGraph::build`] but accepts `k = 1`, which evaluation
    /// metrics need even though fuzzy-graph construction does not.
    pub fn build_any_k(data: &DataMatrix, k: usize) -> Result<Self> {
        let n = data.n();
        if k == 0 || k >= n {
            return Err(param(format!("k = {k} must satisfy 1 <= k < n = {n}")));
        }
        let neighbors = (0..n)
            .into_par_iter()
            .map(|i| nearest_among(data, data.row(i), 0..n, Some(i), k))
            .collect();
        Ok(Self { k, neighbors })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    /// Whether `j` is one of `i`'s k nearest neighbors.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].iter().any(|nb| nb.index == j)
    }

    /// Adds `new_points` (indices `n..n + m`) to the graph built over `data`.
    ///
    /// Returns the indices whose neighbor lists were created or changed,
    /// in ascending order: every pre-existing point that gained a new point
    /// among its k nearest, followed by all new points.
    pub fn insert_batch(
        &mut self,
        data: &DataMatrix,
        new_points: &DataMatrix,
    ) -> Result<Vec<usize>> {
        if new_points.d() != data.d() {
            return Err(Error::Dimension {
                expected: data.d(),
                got: new_points.d(),
            });
        }
        if data.n() != self.n() {
            return Err(param(format!(
                "graph has {} points but data has {}",
                self.n(),
                data.n()
            )));
        }
        let old_n = data.n();
        let mut all = data.clone();
        all.append(new_points)?;
        let total = all.n();
        if self.k >= total {
            return Err(param(format!(
                "k = {} must be smaller than n = {total}",
                self.k
            )));
        }

        let mut updated = BTreeSet::new();
        let k = self.k;
        let all_ref = &all;
        let changed: Vec<(usize, Vec<Neighbor>)> = self.neighbors[..old_n]
            .par_iter()
            .enumerate()
            .filter_map(|(i, list)| {
                let x = all_ref.row(i);
                let mut merged = list.clone();
                let mut touched = false;
                for j in old_n..total {
                    let cand = Neighbor {
                        index: j,
                        distance: euclidean(x, all_ref.row(j)),
                    };
                    let worst = merged[merged.len() - 1];
                    if merged.len() < k || cand.cmp_key(&worst) == Ordering::Less {
                        let pos = merged
                            .binary_search_by(|nb| nb.cmp_key(&cand))
                            .unwrap_or_else(|p| p);
                        merged.insert(pos, cand);
                        merged.truncate(k);
                        touched = true;
                    }
                }
                touched.then_some((i, merged))
            })
            .collect();
        for (i, list) in changed {
            self.neighbors[i] = list;
            updated.insert(i);
        }

        let fresh: Vec<Vec<Neighbor>> = (old_n..total)
            .into_par_iter()
            .map(|i| nearest_among(all_ref, all_ref.row(i), 0..total, Some(i), k))
            .collect();
        self.neighbors.extend(fresh);
        updated.extend(old_n..total);
        Ok(updated.into_iter().collect())
    }
}

/// The `k` points of `candidates` nearest to `x`, excluding `skip`.
pub(crate) fn nearest_among(
    data: &DataMatrix,
    x: &[f64],
    candidates: std::ops::Range<usize>,
    skip: Option<usize>,
    k: usize,
) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = candidates
        .filter(|&j| Some(j) != skip)
        .map(|j| Neighbor {
            index: j,
            distance: euclidean(x, data.row(j)),
        })
        .collect();
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k, |a, b| a.cmp_key(b));
        all.truncate(k);
    }
    all.sort_by(|a, b| a.cmp_key(b));
    all
}
