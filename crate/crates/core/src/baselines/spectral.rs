use nalgebra::{DMatrix, SymmetricEigen};

use super::kmeans::kmeans;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

pub const DEFAULT_KNN: usize = 7;

const RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

/// Symmetrized, unweighted k-nearest-neighbour adjacency. `i ~ j` when either
/// lists the other among its `knn` nearest points; distance ties resolve to
/// the lower index.
pub fn knn_affinity<T: Scalar>(x: &Dataset<T>, knn: usize) -> Result<Vec<Vec<bool>>> {
    let n = x.n();
    if knn == 0 || knn >= n {
        return Err(Error::invalid("knn", format!("need 1 <= knn < n, got knn={knn}, n={n}")));
    }
    let rows: Vec<Vec<T>> = x.samples().rows().into_iter().map(|r| r.to_vec()).collect();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        let mut order: Vec<(T, usize)> = (0..n).filter(|&j| j != i).map(|j| (sq_dist(&rows[i], &rows[j]), j)).collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
        for &(_, j) in order.iter().take(knn) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    Ok(adj)
}

fn components(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if adj[i][j] && comp[j] == usize::MAX {
                    comp[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Normalized-cut bipartition: the second eigenvector of the normalized
/// Laplacian, mapped back by `D^{-1/2}` and split with two-cluster k-means.
/// Cluster 0 maps to `+1`.
///
/// A graph with exactly two components is split along them; more than two
/// is an error.
pub fn spectral_cluster<T: Scalar>(x: &Dataset<T>, knn: usize, seed: u64) -> Result<Vec<i8>> {
    let adj = knn_affinity(x, knn)?;
    let n = adj.len();
    let comp = components(&adj);
    let count = comp.iter().max().map_or(0, |m| m + 1);
    match count {
        1 => {}
        2 => return Ok(comp.iter().map(|&c| if c == 0 { 1 } else { -1 }).collect()),
        components => return Err(Error::Disconnected { components }),
    }
    let degree: Vec<f64> = adj.iter().map(|r| r.iter().filter(|&&e| e).count() as f64).collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let w = if adj[i][j] { 1.0 } else { 0.0 };
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * w * inv_sqrt[j]
    });
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite eigenvalues").then(a.cmp(&b)));
    let u = eig.eigenvectors.column(order[1]);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectral embedding"));
    }
    let embed: Vec<Vec<f64>> = (0..n).map(|i| vec![u[i] * inv_sqrt[i]]).collect();
    let fit = kmeans(&Dataset::from_rows(&embed)?, 2, RESTARTS, MAX_ITER, seed)?;
    Ok(fit.assignments.iter().map(|&a| if a == 0 { 1 } else { -1 }).collect())
}
