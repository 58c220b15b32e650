use rand::Rng;

use crate::data::{rng_from_seed, Dataset, SeededRng};
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

/// Best run of Lloyd's algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit<T: Scalar> {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    pub wcss: T,
    /// Within-cluster sum of squares after every Lloyd iteration of the
    /// selected run.
    pub wcss_trace: Vec<T>,
    pub restart: usize,
}

fn nearest<T: Scalar>(x: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus<T: Scalar>(rows: &[Vec<T>], k: usize, rng: &mut SeededRng) -> Vec<Vec<T>> {
    let n = rows.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[chosen[0]]).as_f64()).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining points coincide with a center
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            let d = sq_dist(r, &rows[next]).as_f64();
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| rows[i].clone()).collect()
}

fn lloyd<T: Scalar>(rows: &[Vec<T>], mut centroids: Vec<Vec<T>>, max_iter: usize) -> (Vec<usize>, Vec<Vec<T>>, Vec<T>) {
    let d = rows[0].len();
    let k = centroids.len();
    let mut assign: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids).0).collect();
    let mut trace = vec![rows.iter().zip(&assign).map(|(r, &a)| sq_dist(r, &centroids[a])).sum()];
    for _ in 0..max_iter {
        let mut sums = vec![vec![T::zero(); d]; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in rows.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let m = T::lit(counts[c] as f64);
                centroids[c] = sums[c].iter().map(|&s| s / m).collect();
            }
        }
        let mut changed = false;
        for (r, a) in rows.iter().zip(assign.iter_mut()) {
            let current = sq_dist(r, &centroids[*a]);
            let (k_best, d_best) = nearest(r, &centroids);
            if d_best < current {
                *a = k_best;
                changed = true;
            }
        }
        trace.push(rows.iter().zip(&assign).map(|(r, &a)| sq_dist(r, &centroids[a])).sum());
        if !changed {
            break;
        }
    }
    (assign, centroids, trace)
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
/// within-cluster sum of squares (ties to the earliest run).
pub fn kmeans<T: Scalar>(x: &Dataset<T>, k: usize, restarts: usize, max_iter: usize, seed: u64) -> Result<KMeansFit<T>> {
    if k == 0 || k > x.n() {
        return Err(Error::invalid("k", format!("need 1 <= k <= n, got k={k}, n={}", x.n())));
    }
    let rows: Vec<Vec<T>> = x.samples().rows().into_iter().map(|r| r.to_vec()).collect();
    let mut seeds = rng_from_seed(seed);
    let mut best: Option<KMeansFit<T>> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = rng_from_seed(seeds.random());
        let init = plus_plus(&rows, k, &mut rng);
        let (assignments, centroids, wcss_trace) = lloyd(&rows, init, max_iter);
        let wcss = *wcss_trace.last().expect("non-empty trace");
        if best.as_ref().is_none_or(|b| wcss < b.wcss) {
            best = Some(KMeansFit {
                assignments,
                centroids,
                wcss,
                wcss_trace,
                restart,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Two-cluster k-means mapped to labels: cluster 0 → `+1`, cluster 1 → `−1`.
pub fn kmeans_labels<T: Scalar>(x: &Dataset<T>, restarts: usize, max_iter: usize, seed: u64) -> Result<Vec<i8>> {
    let fit = kmeans(x, 2, restarts, max_iter, seed)?;
    Ok(fit.assignments.iter().map(|&a| if a == 0 { 1 } else { -1 }).collect())
}
