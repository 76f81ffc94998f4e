// Oracles index explicitly on purpose.
#![allow(clippy::needless_range_loop)]

//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use umap_core::{DataMatrix, Embedding, FuzzyGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_data(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DataMatrix {
    let v = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
    DataMatrix::new(n, d, v).unwrap()
}

pub fn gaussian_embedding(n: usize, p: usize, scale: f64, rng: &mut ChaCha8Rng) -> Embedding {
    let v = (0..n * p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    Embedding::new(n, p, v).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// O(n^2 log n) neighbor lists: sort everything by (distance, index).
pub fn brute_knn(data: &DataMatrix, k: usize) -> Vec<Vec<(usize, f64)>> {
    (0..data.n())
        .map(|i| {
            let mut all: Vec<(usize, f64)> = (0..data.n())
                .filter(|&j| j != i)
                .map(|j| (j, dist(data.row(i), data.row(j))))
                .collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            all
        })
        .collect()
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|c| {
            let orig = probe[c];
            probe[c] = orig + h;
            let up = f(&probe);
            probe[c] = orig - h;
            let down = f(&probe);
            probe[c] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|b|, floor)` in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(floor)
}

/// Connected random graph: a path through all points plus a few extra edges.
pub fn random_fuzzy_graph(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> FuzzyGraph {
    let mut edges: Vec<(usize, usize, f64)> = (1..n)
        .map(|i| (i - 1, i, rng.random_range(0.05..1.0)))
        .collect();
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 1000 {
        tries += 1;
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let (i, j) = (i.min(j), i.max(j));
        if i == j || edges.iter().any(|e| e.0 == i && e.1 == j) {
            continue;
        }
        edges.push((i, j, rng.random_range(0.05..1.0)));
    }
    FuzzyGraph::from_edges(n, &edges).unwrap()
}

/// Dense symmetric normalized Laplacian `I - D^-1/2 P D^-1/2`.
pub fn dense_laplacian(fg: &FuzzyGraph) -> Vec<Vec<f64>> {
    let n = fg.n();
    let inv: Vec<f64> = (0..n).map(|i| 1.0 / fg.degree(i).sqrt()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (i == j) as u8 as f64 - inv[i] * fg.weight(i, j) * inv[j])
                .collect()
        })
        .collect()
}

/// Cyclic Jacobi eigenvalue iteration; eigenvalues ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}
