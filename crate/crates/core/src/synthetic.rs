//! Small labelled Gaussian datasets for examples and tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;

/// Two isotropic clusters of `per_cluster` points in `d` dimensions with
/// standard deviation `sigma`, centred at the origin and at `separation`
/// along the first axis. Labels are 0 and 1; rows are grouped by cluster.
pub fn two_clusters(
    per_cluster: usize,
    d: usize,
    separation: f64,
    sigma: f64,
    seed: u64,
) -> (DataMatrix, Vec<i64>) {
    two_clusters_scaled(per_cluster, d, separation, sigma, sigma, seed)
}

/// Like [`two_clusters`] with a separate spread per cluster.
pub fn two_clusters_scaled(
    per_cluster: usize,
    d: usize,
    separation: f64,
    sigma0: f64,
    sigma1: f64,
    seed: u64,
) -> (DataMatrix, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(2 * per_cluster * d);
    let mut labels = Vec::with_capacity(2 * per_cluster);
    for (label, sigma, offset) in [(0, sigma0, 0.0), (1, sigma1, separation)] {
        for _ in 0..per_cluster {
            for c in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(sigma * z + if c == 0 { offset } else { 0.0 });
            }
            labels.push(label);
        }
    }
    let data = DataMatrix::new(2 * per_cluster, d, values).expect("finite samples");
    (data, labels)
}

/// Deterministic row shuffle; returns the permuted data, labels and the
/// permutation applied (`out[r] = in[perm[r]]`).
pub fn shuffled(
    data: &DataMatrix,
    labels: &[i64],
    seed: u64,
) -> (DataMatrix, Vec<i64>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..data.n()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let labels = perm.iter().map(|&r| labels[r]).collect();
    (data.select_rows(&perm), labels, perm)
}
