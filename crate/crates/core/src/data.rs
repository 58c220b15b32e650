//! Datasets, CSV ingestion, synthetic mixtures and fold splitting.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, is_symmetric};
use crate::scalar::Scalar;

/// Seeded generator used for every random draw in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An `n × d` matrix of unlabeled samples, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T: Scalar> {
    samples: Array2<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(samples: Array2<T>) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            let d = samples.ncols();
            return Err(Error::Parse {
                row: pos / d + 1,
                col: pos % d + 1,
                cell: format!("{}", samples.as_slice().map_or(T::nan(), |s| s[pos])),
            });
        }
        Ok(Dataset { samples })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: d,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let arr = Array2::from_shape_vec((n, d), flat).expect("shape checked");
        Self::new(arr)
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> ArrayView2<'_, T> {
        self.samples.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.samples.row(i)
    }

    pub fn into_inner(self) -> Array2<T> {
        self.samples
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.samples.select(Axis(0), indices))
    }

    /// Stack `self` on top of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let stacked = ndarray::concatenate(Axis(0), &[self.samples.view(), other.samples.view()])
            .expect("dimensions checked");
        Self::new(stacked)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.samples.mapv(f))
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            samples: self.samples.mapv(|v| U::lit(v.as_f64())),
        }
    }

    pub(crate) fn row_slice(&self, i: usize) -> Vec<T> {
        self.samples.row(i).to_vec()
    }
}

/// Valid class label: `+1` or `-1`.
pub fn check_labels(labels: &[i8]) -> Result<()> {
    if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
        return Err(Error::invalid(
            "labels",
            format!("entry {} is {}, expected +1 or -1", i + 1, labels[i]),
        ));
    }
    Ok(())
}

/// Samples paired with their ground-truth class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T: Scalar> {
    pub samples: Dataset<T>,
    pub labels: Vec<i8>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(samples: Dataset<T>, labels: Vec<i8>) -> Result<Self> {
        if labels.len() != samples.n() {
            return Err(Error::LengthMismatch {
                expected: samples.n(),
                found: labels.len(),
            });
        }
        check_labels(&labels)?;
        Ok(LabeledDataset { samples, labels })
    }

    pub fn positive_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.labels.len() as f64
    }

    /// Indices of each class, positives first.
    pub fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let pos = (0..self.labels.len()).filter(|&i| self.labels[i] == 1).collect();
        let neg = (0..self.labels.len()).filter(|&i| self.labels[i] == -1).collect();
        (pos, neg)
    }
}

/// One Gaussian component of a class-conditional mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub weight: f64,
    pub class: i8,
}

/// Class-conditional Gaussian mixtures for the two classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<Component>,
}

struct PreparedComponent {
    mean: Array1<f64>,
    chol: Array2<f64>,
}

impl MixtureSpec {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn class_weight_sum(&self, class: i8) -> f64 {
        self.components
            .iter()
            .filter(|c| c.class == class)
            .map(|c| c.weight)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("mixture", "no components"));
        }
        for (k, c) in self.components.iter().enumerate() {
            if c.class != 1 && c.class != -1 {
                return Err(Error::invalid("mixture", format!("component {k}: class must be ±1")));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::invalid(
                    "mixture",
                    format!("component {k}: weight {} outside (0,1]", c.weight),
                ));
            }
            if c.mean.len() != d || c.covariance.len() != d || c.covariance.iter().any(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.mean.len(),
                });
            }
        }
        for class in [1i8, -1] {
            let s = self.class_weight_sum(class);
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(
                    "mixture",
                    format!("class {class:+} weights sum to {s}, expected 1"),
                ));
            }
        }
        self.prepare().map(|_| ())
    }

    fn prepare(&self) -> Result<Vec<PreparedComponent>> {
        self.components
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let d = c.mean.len();
                let cov = Array2::from_shape_fn((d, d), |(i, j)| c.covariance[i][j]);
                if !is_symmetric(cov.view(), 1e-12) {
                    return Err(Error::invalid(
                        "covariance",
                        format!("component {k} is not symmetric"),
                    ));
                }
                let chol = cholesky(cov.view()).map_err(|_| {
                    Error::invalid("covariance", format!("component {k} is not positive definite"))
                })?;
                Ok(PreparedComponent {
                    mean: Array1::from(c.mean.clone()),
                    chol,
                })
            })
            .collect()
    }
}

fn isotropic(mean: [f64; 2], weight: f64, class: i8) -> Component {
    Component {
        mean: mean.to_vec(),
        covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        weight,
        class,
    }
}

/// Two unit-covariance Gaussians: class +1 at (−1,−1), class −1 at (+1,+1).
pub fn toy1_spec() -> MixtureSpec {
    MixtureSpec {
        components: vec![isotropic([-1.0, -1.0], 1.0, 1), isotropic([1.0, 1.0], 1.0, -1)],
    }
}

/// Four unit-covariance modes: class +1 on the horizontal axis at ±3,
/// class −1 on the vertical axis at ±3, equal weights within each class.
pub fn toy2_spec() -> MixtureSpec {
    MixtureSpec {
        components: vec![
            isotropic([3.0, 0.0], 0.5, 1),
            isotropic([-3.0, 0.0], 0.5, 1),
            isotropic([0.0, 3.0], 0.5, -1),
            isotropic([0.0, -3.0], 0.5, -1),
        ],
    }
}

fn check_prior(name: &'static str, prior: f64) -> Result<()> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::invalid(name, format!("{prior} is not in (0, 1)")));
    }
    Ok(())
}

/// Draw `n` labeled samples from `prior_pos · p(x|+1) + (1 − prior_pos) · p(x|−1)`.
///
/// Class first (Bernoulli), then the component within the class by weight,
/// then `mean + L z` with `L` the Cholesky factor and `z` standard normal.
pub fn sample_mixture<T: Scalar>(
    spec: &MixtureSpec,
    n: usize,
    prior_pos: f64,
    seed: u64,
) -> Result<LabeledDataset<T>> {
    check_prior("prior_pos", prior_pos)?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    spec.validate()?;
    let prepared = spec.prepare()?;
    let d = spec.dim();
    let by_class = |class: i8| -> Vec<(usize, f64)> {
        spec.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.class == class)
            .map(|(k, c)| (k, c.weight))
            .collect()
    };
    let pos = by_class(1);
    let neg = by_class(-1);

    let mut rng = rng_from_seed(seed);
    let mut flat = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0f64; d];
    for _ in 0..n {
        let u: f64 = rng.random();
        let class = if u < prior_pos { 1 } else { -1 };
        let pool = if class == 1 { &pos } else { &neg };
        let v: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = pool[pool.len() - 1].0;
        for &(k, w) in pool {
            acc += w;
            if v < acc {
                chosen = k;
                break;
            }
        }
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let comp = &prepared[chosen];
        for i in 0..d {
            let mut x = comp.mean[i];
            for (k, &zk) in z.iter().enumerate().take(i + 1) {
                x += comp.chol[[i, k]] * zk;
            }
            flat.push(T::lit(x));
        }
        labels.push(class);
    }
    let samples = Dataset::new(Array2::from_shape_vec((n, d), flat).expect("shape"))?;
    LabeledDataset::new(samples, labels)
}

/// Two-class example with a shared standard-normal first coordinate and a
/// uniform second coordinate: class +1 on `[0, 5]`, class −1 on `[5, 10]`
/// (`overlap = false`) or `[0, 10]` (`overlap = true`).
///
/// Returns `(X_p, X_p')` where every sample of `X_p` is class +1 and every
/// sample of `X_p'` is class −1.
pub fn uniform_strip_pair<T: Scalar>(
    n: usize,
    nq: usize,
    overlap: bool,
    seed: u64,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    if n == 0 || nq == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng_from_seed(seed);
    let mut draw = |count: usize, lo: f64, hi: f64, class: i8| -> Result<LabeledDataset<T>> {
        let mut flat = Vec::with_capacity(count * 2);
        for _ in 0..count {
            let x1: f64 = rng.sample(StandardNormal);
            let x2: f64 = rng.random_range(lo..hi);
            flat.push(T::lit(x1));
            flat.push(T::lit(x2));
        }
        let ds = Dataset::new(Array2::from_shape_vec((count, 2), flat).expect("shape"))?;
        LabeledDataset::new(ds, vec![class; count])
    };
    let xp = draw(n, 0.0, 5.0, 1)?;
    let xq = if overlap {
        draw(nq, 0.0, 10.0, -1)?
    } else {
        draw(nq, 5.0, 10.0, -1)?
    };
    Ok((xp, xq))
}

/// Draw `n` rows without replacement from a labeled pool so that
/// `round(prior_pos · n)` of them are positive. Drawn indices are removed
/// from the front of the two pools.
pub fn draw_by_prior<T: Scalar>(
    source: &LabeledDataset<T>,
    pos_pool: &mut Vec<usize>,
    neg_pool: &mut Vec<usize>,
    n: usize,
    prior_pos: f64,
) -> Result<LabeledDataset<T>> {
    check_prior("prior_pos", prior_pos)?;
    let n_pos = (prior_pos * n as f64).round() as usize;
    let n_neg = n - n_pos;
    if n_pos > pos_pool.len() || n_neg > neg_pool.len() {
        return Err(Error::invalid(
            "source",
            format!(
                "insufficient class counts: need {n_pos} positive and {n_neg} negative, have {} and {}",
                pos_pool.len(),
                neg_pool.len()
            ),
        ));
    }
    let mut idx: Vec<usize> = pos_pool.drain(..n_pos).collect();
    idx.extend(neg_pool.drain(..n_neg));
    idx.sort_unstable();
    let labels = idx.iter().map(|&i| source.labels[i]).collect();
    LabeledDataset::new(source.samples.select(&idx)?, labels)
}

/// Shuffle helper shared with the benchmark harness.
pub fn shuffled(mut v: Vec<usize>, rng: &mut SeededRng) -> Vec<usize> {
    v.shuffle(rng);
    v
}

/// One cross-validation fold: training and validation indices.
pub type Fold = (Vec<usize>, Vec<usize>);

/// Seeded k-fold partition of `0..n`.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return Err(Error::invalid("folds", format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    let mut rng = rng_from_seed(seed);
    let perm = shuffled((0..n).collect(), &mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut val: Vec<usize> = perm[start..start + size].to_vec();
        val.sort_unstable();
        let mut train: Vec<usize> = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
        train.sort_unstable();
        folds.push((train, val));
        start += size;
    }
    Ok(folds)
}

/// Standardize both datasets with the pooled per-coordinate mean and
/// standard deviation. Constant coordinates are only centered.
pub fn standardize_pair<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>) -> Result<(Dataset<T>, Dataset<T>)> {
    let pooled = xp.concat(xq)?;
    let m = T::lit(pooled.n() as f64);
    let mean = pooled.samples().sum_axis(Axis(0)) / m;
    let var = pooled
        .samples()
        .rows()
        .into_iter()
        .fold(Array1::<T>::zeros(pooled.dim()), |acc, r| {
            let c = &r - &mean;
            acc + &c * &c
        })
        / m;
    let scale = var.mapv(|v| if v > T::zero() { v.sqrt() } else { T::one() });
    let apply = |ds: &Dataset<T>| Dataset::new((&ds.samples() - &mean) / &scale);
    Ok((apply(xp)?, apply(xq)?))
}

/// Read a numeric CSV (no quoting). `header` skips the first line.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, delimiter: u8, header: bool) -> Result<Dataset<T>> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_csv(&text, delimiter, header)
}

pub fn parse_csv<T: Scalar>(text: &str, delimiter: u8, header: bool) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let row = i + 1 + usize::from(header);
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::RaggedRow {
                row,
                expected,
                found: rec.len(),
            });
        }
        let parsed = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| Error::Parse {
                        row,
                        col: j + 1,
                        cell: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(parsed);
    }
    Dataset::from_rows(&rows)
}

/// Read a one-column label file of `+1` / `-1` entries.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i8>> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_labels(&text)
}

pub fn parse_labels(text: &str) -> Result<Vec<i8>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        let label = match cell.parse::<f64>() {
            Ok(1.0) => 1,
            Ok(-1.0) => -1,
            _ => {
                return Err(Error::Parse {
                    row: i + 1,
                    col: 1,
                    cell: cell.to_string(),
                })
            }
        };
        out.push(label);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Write samples as comma-separated shortest round-trip decimals.
pub fn write_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in ds.samples().rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels(labels: &[i8], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for y in labels {
        writeln!(w, "{y}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_parses_rows_in_order() {
        let ds: Dataset<f64> = parse_csv("1.0,2.0\n3.0,4.0", b',', false).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.row(0).to_vec(), vec![1.0, 2.0]);
        assert_eq!(ds.row(1).to_vec(), vec![3.0, 4.0]);
    }

    #[test]
    fn csv_empty_is_error() {
        let err = parse_csv::<f64>("", b',', false).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn csv_bad_cell_names_position() {
        match parse_csv::<f64>("1.0,x", b',', false) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_and_nonfinite() {
        assert!(matches!(
            parse_csv::<f64>("1,2\n3", b',', false),
            Err(Error::RaggedRow { row: 2, expected: 2, found: 1 })
        ));
        assert!(matches!(
            parse_csv::<f64>("1,inf", b',', false),
            Err(Error::Parse { row: 1, col: 2, .. })
        ));
        assert!(matches!(
            parse_csv::<f64>("1,NaN", b',', false),
            Err(Error::Parse { row: 1, col: 2, .. })
        ));
    }

    #[test]
    fn csv_header_and_delimiter() {
        let ds: Dataset<f32> = parse_csv("a;b\n1;2\n", b';', true).unwrap();
        assert_eq!(ds.n(), 1);
        assert_eq!(ds.row(0).to_vec(), vec![1.0f32, 2.0]);
        match parse_csv::<f64>("a;b\n1;z\n", b';', true) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels_parse() {
        assert_eq!(parse_labels("1\n-1\n+1\n1.0\n").unwrap(), vec![1, -1, 1, 1]);
        assert!(parse_labels("0\n").is_err());
        assert!(parse_labels("").is_err());
    }

    #[test]
    fn toy_specs() {
        let t1 = toy1_spec();
        assert_eq!(t1.components.len(), 2);
        assert_eq!(t1.components[0].mean, vec![-1.0, -1.0]);
        assert_eq!(t1.components[0].class, 1);
        assert_eq!(t1.components[1].mean, vec![1.0, 1.0]);
        assert_eq!(t1.components[1].class, -1);
        assert!(t1.components.iter().all(|c| c.weight == 1.0));
        assert!(t1
            .components
            .iter()
            .all(|c| c.covariance == vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        t1.validate().unwrap();

        let t2 = toy2_spec();
        let means: Vec<_> = t2.components.iter().map(|c| (c.mean.clone(), c.class)).collect();
        assert_eq!(
            means,
            vec![
                (vec![3.0, 0.0], 1),
                (vec![-3.0, 0.0], 1),
                (vec![0.0, 3.0], -1),
                (vec![0.0, -3.0], -1)
            ]
        );
        assert!(t2.components.iter().all(|c| c.weight == 0.5));
        assert!(t2
            .components
            .iter()
            .all(|c| c.covariance == vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(t2.class_weight_sum(1), 1.0);
        assert_eq!(t2.class_weight_sum(-1), 1.0);
    }

    #[test]
    fn mixture_sampling_is_reproducible() {
        let a = sample_mixture::<f64>(&toy1_spec(), 30, 0.3, 7).unwrap();
        let b = sample_mixture::<f64>(&toy1_spec(), 30, 0.3, 7).unwrap();
        assert_eq!(a.samples.n(), 30);
        assert_eq!(a, b);
        let c = sample_mixture::<f64>(&toy1_spec(), 30, 0.3, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mixture_minimal_and_invalid() {
        let one = sample_mixture::<f64>(&toy2_spec(), 1, 0.5, 1).unwrap();
        assert_eq!(one.samples.n(), 1);
        assert!(one.labels[0] == 1 || one.labels[0] == -1);
        assert!(sample_mixture::<f64>(&toy1_spec(), 10, 0.0, 1).is_err());
        assert!(sample_mixture::<f64>(&toy1_spec(), 10, 1.0, 1).is_err());
        let mut bad = toy1_spec();
        bad.components[0].covariance = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(sample_mixture::<f64>(&bad, 10, 0.5, 1).is_err());
        let mut bad_w = toy2_spec();
        bad_w.components[0].weight = 0.6;
        assert!(bad_w.validate().is_err());
    }

    #[test]
    fn mixture_prior_law_of_large_numbers() {
        let ds = sample_mixture::<f64>(&toy1_spec(), 100_000, 0.5, 11).unwrap();
        let frac = ds.positive_fraction();
        assert!((frac - 0.5).abs() < 0.01, "fraction {frac}");
        // 3σ binomial bound for another prior
        let pi = 0.3;
        let ds = sample_mixture::<f64>(&toy1_spec(), 100_000, pi, 12).unwrap();
        let sd = (pi * (1.0 - pi) / 100_000.0f64).sqrt();
        assert!((ds.positive_fraction() - pi).abs() <= 3.0 * sd);
    }

    #[test]
    fn mixture_component_means_recovered() {
        let ds = sample_mixture::<f64>(&toy1_spec(), 20_000, 0.5, 3).unwrap();
        let mut sum = [0.0; 2];
        let mut count = 0.0;
        for (i, &y) in ds.labels.iter().enumerate() {
            if y == 1 {
                sum[0] += ds.samples.row(i)[0];
                sum[1] += ds.samples.row(i)[1];
                count += 1.0;
            }
        }
        assert!((sum[0] / count + 1.0).abs() < 0.05);
        assert!((sum[1] / count + 1.0).abs() < 0.05);
    }

    #[test]
    fn kfold_partitions() {
        let folds = kfold_indices(4, 2, 0).unwrap();
        assert_eq!(folds.len(), 2);
        assert!(folds.iter().all(|(t, v)| t.len() == 2 && v.len() == 2));
        let mut all: Vec<usize> = folds.iter().flat_map(|(_, v)| v.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);

        let loo = kfold_indices(5, 5, 9).unwrap();
        assert!(loo.iter().all(|(t, v)| v.len() == 1 && t.len() == 4));

        assert_eq!(kfold_indices(10, 3, 5).unwrap(), kfold_indices(10, 3, 5).unwrap());
        assert!(kfold_indices(3, 4, 0).is_err());
        assert!(kfold_indices(3, 1, 0).is_err());
    }

    #[test]
    fn uniform_strips() {
        let (p, q) = uniform_strip_pair::<f64>(200, 200, false, 1).unwrap();
        assert!(p.samples.samples().column(1).iter().all(|&v| (0.0..5.0).contains(&v)));
        assert!(q.samples.samples().column(1).iter().all(|&v| (5.0..10.0).contains(&v)));
        let (_, q) = uniform_strip_pair::<f64>(200, 200, true, 1).unwrap();
        assert!(q.samples.samples().column(1).iter().any(|&v| v < 5.0));
    }

    #[test]
    fn standardized_pair_has_unit_moments() {
        let a = sample_mixture::<f64>(&toy2_spec(), 50, 0.3, 1).unwrap();
        let b = sample_mixture::<f64>(&toy2_spec(), 70, 0.6, 2).unwrap();
        let (sa, sb) = standardize_pair(&a.samples, &b.samples).unwrap();
        let pooled = sa.concat(&sb).unwrap();
        for col in pooled.samples().columns() {
            let m = col.mean().unwrap();
            let v = col.mapv(|x| (x - m) * (x - m)).mean().unwrap();
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
