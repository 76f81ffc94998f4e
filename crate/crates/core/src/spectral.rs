//! Laplacian-eigenmap initialization.
//!
//! Uses the symmetric normalized Laplacian `L = I - D^{-1/2} P D^{-1/2}`.
//! Each connected component is embedded on its own; components are then laid
//! out side by side along the first axis. Columns end up with standard
//! deviation [`INIT_STD`] and the sign making their largest-magnitude entry
//! positive.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Embedding;
use crate::error::{param, Error, Result};
use crate::fuzzy::FuzzyGraph;

/// Standard deviation of every initialized column.
pub const INIT_STD: f64 = 1e-2;
/// Components up to this size are solved densely.
pub const DENSE_LIMIT: usize = 1000;
/// Required eigen-residual `||L v - lambda v|| / ||v||`.
pub const EIGEN_RESIDUAL: f64 = 1e-6;

const TIE_TOLERANCE: f64 = 1e-9;
const MAX_SUBSPACE_ITER: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit-norm eigenvector, indexed by position within the component.
    pub vector: Vec<f64>,
}

/// Connected components of the stored-edge graph, ordered by their smallest
/// member; members are ascending.
pub fn connected_components(fg: &FuzzyGraph) -> Vec<Vec<usize>> {
    let n = fg.n();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        label[start] = id;
        let mut head = 0;
        while head < members.len() {
            let v = members[head];
            head += 1;
            for &w in fg.row_targets(v) {
                if label[w] == usize::MAX {
                    label[w] = id;
                    members.push(w);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

/// Normalized adjacency `D^{-1/2} P D^{-1/2}` restricted to `members`, in
/// compressed rows over local indices.
struct LocalOperator {
    rows: Vec<Vec<(usize, f64)>>,
    sqrt_degree: Vec<f64>,
}

impl LocalOperator {
    fn new(fg: &FuzzyGraph, members: &[usize]) -> Result<Self> {
        let mut local = vec![usize::MAX; fg.n()];
        for (pos, &g) in members.iter().enumerate() {
            local[g] = pos;
        }
        let mut sqrt_degree = Vec::with_capacity(members.len());
        for &g in members {
            let d = fg.degree(g);
            if !(d > 0.0) {
                return Err(Error::IsolatedPoint(g));
            }
            sqrt_degree.push(d.sqrt());
        }
        let rows = members
            .iter()
            .enumerate()
            .map(|(pos, &g)| {
                fg.row(g)
                    .filter(|&(j, _)| local[j] != usize::MAX)
                    .map(|(j, w)| {
                        let lj = local[j];
                        (lj, w / (sqrt_degree[pos] * sqrt_degree[lj]))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rows, sqrt_degree })
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    /// `L x`.
    fn laplacian_apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| x[i] - row.iter().map(|&(j, w)| w * x[j]).sum::<f64>())
            .collect()
    }

    fn dense_laplacian(&self) -> DMatrix<f64> {
        let s = self.len();
        let mut l = DMatrix::<f64>::identity(s, s);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                l[(i, j)] -= w;
            }
        }
        l
    }

    fn residual(&self, pair: &EigenPair) -> f64 {
        let lv = self.laplacian_apply(&pair.vector);
        let r: f64 = lv
            .iter()
            .zip(&pair.vector)
            .map(|(a, v)| (a - pair.value * v).powi(2))
            .sum();
        let norm: f64 = pair.vector.iter().map(|v| v * v).sum();
        (r / norm).sqrt()
    }
}

/// The `count` smallest eigenpairs of the normalized Laplacian of the
/// subgraph induced by `members` (the first is the trivial zero pair when the
/// subgraph is connected).
pub fn laplacian_eigenpairs(
    fg: &FuzzyGraph,
    members: &[usize],
    count: usize,
    seed: u64,
    dense_limit: usize,
) -> Result<Vec<EigenPair>> {
    let op = LocalOperator::new(fg, members)?;
    let count = count.min(op.len());
    let mut pairs = if op.len() <= dense_limit {
        dense_pairs(&op)
    } else {
        subspace_pairs(&op, count, seed)?
    };
    order_pairs(&mut pairs);
    pairs.truncate(count);
    for pair in &pairs {
        let r = op.residual(pair);
        if r > EIGEN_RESIDUAL {
            return Err(Error::Eigen(format!(
                "residual {r:.3e} for eigenvalue {:.6} exceeds {EIGEN_RESIDUAL:e}",
                pair.value
            )));
        }
    }
    Ok(pairs)
}

fn dense_pairs(op: &LocalOperator) -> Vec<EigenPair> {
    let eig = SymmetricEigen::new(op.dense_laplacian());
    eig.eigenvalues
        .iter()
        .enumerate()
        .map(|(c, &value)| EigenPair {
            value,
            vector: eig.eigenvectors.column(c).iter().copied().collect(),
        })
        .collect()
}

/// Block subspace iteration on `2I - L` with the trivial vector deflated.
fn subspace_pairs(op: &LocalOperator, count: usize, seed: u64) -> Result<Vec<EigenPair>> {
    let s = op.len();
    let norm: f64 = op.sqrt_degree.iter().map(|v| v * v).sum::<f64>().sqrt();
    let trivial: Vec<f64> = op.sqrt_degree.iter().map(|v| v / norm).collect();
    let wanted = count.saturating_sub(1);
    let mut out = vec![EigenPair {
        value: 0.0,
        vector: trivial.clone(),
    }];
    if wanted == 0 {
        return Ok(out);
    }
    let block = (wanted + 8).min(s - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = DMatrix::<f64>::from_fn(s, block, |_, _| StandardNormal.sample(&mut rng));
    let deflate = |m: &mut DMatrix<f64>| {
        for mut col in m.column_iter_mut() {
            let dot: f64 = col.iter().zip(&trivial).map(|(a, b)| a * b).sum();
            for (v, t) in col.iter_mut().zip(&trivial) {
                *v -= dot * t;
            }
        }
    };
    let shifted_apply = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(s, m.ncols());
        for c in 0..m.ncols() {
            let x: Vec<f64> = m.column(c).iter().copied().collect();
            let lx = op.laplacian_apply(&x);
            for r in 0..s {
                out[(r, c)] = 2.0 * x[r] - lx[r];
            }
        }
        out
    };

    for _ in 0..MAX_SUBSPACE_ITER {
        deflate(&mut basis);
        let q = basis.clone().qr().q();
        let mq = shifted_apply(&q);
        let h = q.transpose() * &mq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        let ritz = &q * &eig.eigenvectors;
        let candidates: Vec<EigenPair> = order
            .iter()
            .take(wanted)
            .map(|&c| EigenPair {
                value: 2.0 - eig.eigenvalues[c],
                vector: ritz.column(c).iter().copied().collect(),
            })
            .collect();
        if candidates
            .iter()
            .all(|p| op.residual(p) <= 0.1 * EIGEN_RESIDUAL)
        {
            out.extend(candidates);
            return Ok(out);
        }
        basis = shifted_apply(&ritz);
    }
    Err(Error::Eigen(format!(
        "subspace iteration did not converge within {MAX_SUBSPACE_ITER} iterations"
    )))
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Ascending by eigenvalue; tied eigenvalues ordered by the index of their
/// largest-magnitude entry; each vector signed so that entry is positive.
fn order_pairs(pairs: &mut [EigenPair]) {
    for pair in pairs.iter_mut() {
        let m = argmax_abs(&pair.vector);
        if pair.vector[m] < 0.0 {
            pair.vector.iter_mut().for_each(|v| *v = -*v);
        }
    }
    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len()
            && (pairs[end].value - pairs[start].value).abs()
                <= TIE_TOLERANCE * pairs[start].value.abs().max(1.0)
        {
            end += 1;
        }
        pairs[start..end].sort_by_key(|p| argmax_abs(&p.vector));
        start = end;
    }
}

fn column_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (sum, count) = values
        .clone()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    let mean = sum / count as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    (mean, var.sqrt())
}

fn rescale_column(emb: &mut Embedding, col: usize, rows: &[usize], target: f64) {
    let (_, std) = column_std(rows.iter().map(|&r| emb.point(r)[col]));
    if std > 0.0 {
        let factor = target / std;
        for &r in rows {
            emb.point_mut(r)[col] *= factor;
        }
    }
}

/// Initial embedding of dimension `p` from the fuzzy graph.
pub fn spectral_embed(fg: &FuzzyGraph, p: usize, seed: u64) -> Result<Embedding> {
    spectral_embed_with(fg, p, seed, DENSE_LIMIT)
}

/// [`spectral_embed`] with an explicit dense/iterative switch-over size.
pub fn spectral_embed_with(
    fg: &FuzzyGraph,
    p: usize,
    seed: u64,
    dense_limit: usize,
) -> Result<Embedding> {
    let n = fg.n();
    if p < 1 || p >= n {
        return Err(param(format!(
            "embedding dimension {p} must satisfy 1 <= p < n = {n}"
        )));
    }
    fg.ensure_no_isolated()?;
    let comps = connected_components(fg);
    let mut emb = Embedding::zeros(n, p);

    for members in &comps {
        let cols = p.min(members.len() - 1);
        let pairs = laplacian_eigenpairs(fg, members, cols + 1, seed, dense_limit)?;
        for (c, pair) in pairs.iter().skip(1).enumerate() {
            for (pos, &g) in members.iter().enumerate() {
                emb.point_mut(g)[c] = pair.vector[pos];
            }
        }
        for c in 0..cols {
            rescale_column(&mut emb, c, members, INIT_STD);
        }
    }

    if comps.len() > 1 {
        let mut widest: f64 = 0.0;
        for members in &comps {
            for c in 0..p {
                let (mean, _) = column_std(members.iter().map(|&r| emb.point(r)[c]));
                let (lo, hi) =
                    members
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                            let v = emb.point(r)[c] - mean;
                            (lo.min(v), hi.max(v))
                        });
                widest = widest.max(hi - lo);
                for &r in members {
                    emb.point_mut(r)[c] -= mean;
                }
            }
        }
        let spacing = 10.0 * if widest > 0.0 { widest } else { INIT_STD };
        let centre = (comps.len() - 1) as f64 / 2.0;
        for (idx, members) in comps.iter().enumerate() {
            let offset = (idx as f64 - centre) * spacing;
            for &r in members {
                emb.point_mut(r)[0] += offset;
            }
        }
        let all: Vec<usize> = (0..n).collect();
        for c in 0..p {
            rescale_column(&mut emb, c, &all, INIT_STD);
        }
    }

    for c in 0..p {
        let column: Vec<f64> = emb.points().map(|pt| pt[c]).collect();
        let m = argmax_abs(&column);
        if column[m] < 0.0 {
            for r in 0..n {
                emb.point_mut(r)[c] = -emb.point(r)[c];
            }
        }
    }
    Ok(emb)
}
