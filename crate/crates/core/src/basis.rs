//! Gaussian kernel basis, design matrices and the analytic Gram matrix.

use ndarray::{Array2, ArrayView2};
use rand::seq::index;

use crate::data::{rng_from_seed, Dataset};
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

/// Default cap on the number of kernel centers.
pub const DEFAULT_MAX_CENTERS: usize = 200;

/// Pooled sample count above which the median heuristic subsamples.
const MEDIAN_EXACT_LIMIT: usize = 1000;

/// Gaussian kernels `φ_ℓ(x) = exp(−‖x − c_ℓ‖² / (2σ²))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBasis<T: Scalar> {
    centers: Array2<T>,
    sigma: T,
}

impl<T: Scalar> GaussianBasis<T> {
    pub fn new(centers: Array2<T>, sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("{sigma} must be positive and finite")));
        }
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::invalid("centers", "basis needs at least one center"));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("basis centers"));
        }
        Ok(GaussianBasis { centers, sigma })
    }

    pub fn centers(&self) -> ArrayView2<'_, T> {
        self.centers.view()
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn size(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    /// All basis functions evaluated at a single point.
    pub fn features(&self, x: &[T]) -> Vec<T> {
        let denom = T::lit(2.0) * self.sigma * self.sigma;
        self.centers
            .rows()
            .into_iter()
            .map(|c| {
                let dist = c.iter().zip(x).fold(T::zero(), |a, (&u, &v)| a + (u - v) * (u - v));
                (-dist / denom).exp()
            })
            .collect()
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: d,
            });
        }
        Ok(())
    }
}

/// `n × b` matrix of basis values, row `i` holding `φ(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix<T: Scalar> {
    values: Array2<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn from_values(values: Array2<T>) -> Self {
        DesignMatrix { values }
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn basis_size(&self) -> usize {
        self.values.ncols()
    }

    /// `Φ α`, the model output at every row.
    pub fn apply(&self, alpha: &[T]) -> Result<Vec<T>> {
        if alpha.len() != self.basis_size() {
            return Err(Error::LengthMismatch {
                expected: self.basis_size(),
                found: alpha.len(),
            });
        }
        Ok(self
            .values
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(alpha).fold(T::zero(), |a, (&p, &w)| a + p * w))
            .collect())
    }

    /// Column means `(1/n) Σ_i φ(x_i)`.
    pub fn mean_row(&self) -> Vec<T> {
        let n = T::lit(self.n() as f64);
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().sum::<T>() / n)
            .collect()
    }
}

/// Centers are the pooled samples `X_p` then `X_p'`; above `max_centers` a
/// seeded uniform subset (without replacement, original order kept) is used.
pub fn build_basis<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    sigma: T,
    max_centers: usize,
    seed: u64,
) -> Result<GaussianBasis<T>> {
    if max_centers == 0 {
        return Err(Error::invalid("max_centers", "must be at least 1"));
    }
    let pooled = xp.concat(xq)?;
    let centers = if pooled.n() > max_centers {
        let mut rng = rng_from_seed(seed);
        let mut idx = index::sample(&mut rng, pooled.n(), max_centers).into_vec();
        idx.sort_unstable();
        pooled.select(&idx)?.into_inner()
    } else {
        pooled.into_inner()
    };
    GaussianBasis::new(centers, sigma)
}

pub fn eval_basis<T: Scalar>(basis: &GaussianBasis<T>, x: &Dataset<T>) -> Result<DesignMatrix<T>> {
    basis.check_dim(x.dim())?;
    let b = basis.size();
    let mut values = Array2::<T>::zeros((x.n(), b));
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        let feats = basis.features(&x.row_slice(i));
        for (dst, v) in row.iter_mut().zip(feats) {
            *dst = v;
        }
    }
    Ok(DesignMatrix { values })
}

/// `H_{ℓℓ'} = ∫ φ_ℓ φ_ℓ' dx = (πσ²)^{d/2} exp(−‖c_ℓ − c_ℓ'‖² / (4σ²))`.
pub fn analytic_gram<T: Scalar>(basis: &GaussianBasis<T>) -> Array2<T> {
    let b = basis.size();
    let s2 = basis.sigma * basis.sigma;
    let scale = (T::lit(std::f64::consts::PI) * s2).powf(T::lit(basis.dim() as f64 / 2.0));
    let denom = T::lit(4.0) * s2;
    let c = basis.centers.view();
    let mut h = Array2::<T>::zeros((b, b));
    for l in 0..b {
        h[[l, l]] = scale;
        for m in (l + 1)..b {
            let dist = c
                .row(l)
                .iter()
                .zip(c.row(m))
                .fold(T::zero(), |a, (&u, &v)| a + (u - v) * (u - v));
            let v = scale * (-dist / denom).exp();
            h[[l, m]] = v;
            h[[m, l]] = v;
        }
    }
    h
}

fn median<T: Scalar>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / T::lit(2.0)
    }
}

/// Median pairwise Euclidean distance over the pooled samples.
pub fn median_heuristic<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, seed: u64) -> Result<T> {
    let pooled = xp.concat(xq)?;
    if pooled.n() < 2 {
        return Err(Error::DegenerateData("need at least two samples".into()));
    }
    let pooled = if pooled.n() > MEDIAN_EXACT_LIMIT {
        let mut rng = rng_from_seed(seed);
        let mut idx = index::sample(&mut rng, pooled.n(), MEDIAN_EXACT_LIMIT).into_vec();
        idx.sort_unstable();
        pooled.select(&idx)?
    } else {
        pooled
    };
    let rows: Vec<Vec<T>> = (0..pooled.n()).map(|i| pooled.row_slice(i)).collect();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            dists.push(sq_dist(&rows[i], &rows[j]).sqrt());
        }
    }
    let med = median(dists);
    if !(med > T::zero()) {
        return Err(Error::DegenerateData("median pairwise distance is 0".into()));
    }
    Ok(med)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(rows: &[Vec<f64>]) -> Dataset<f64> {
        Dataset::from_rows(rows).unwrap()
    }

    fn line(points: &[f64]) -> Dataset<f64> {
        ds(&points.iter().map(|&p| vec![p]).collect::<Vec<_>>())
    }

    #[test]
    fn basis_uses_all_samples_below_cap() {
        let a = line(&(0..40).map(f64::from).collect::<Vec<_>>());
        let b = line(&(40..80).map(f64::from).collect::<Vec<_>>());
        let basis = build_basis(&a, &b, 1.0, 200, 0).unwrap();
        assert_eq!(basis.size(), 80);
        let expected: Vec<f64> = (0..80).map(f64::from).collect();
        assert_eq!(basis.centers().column(0).to_vec(), expected);
    }

    #[test]
    fn basis_subsamples_above_cap() {
        let a = line(&(0..300).map(f64::from).collect::<Vec<_>>());
        let b = line(&(300..600).map(f64::from).collect::<Vec<_>>());
        let basis = build_basis(&a, &b, 1.0, 200, 4).unwrap();
        assert_eq!(basis.size(), 200);
        let again = build_basis(&a, &b, 1.0, 200, 4).unwrap();
        assert_eq!(basis, again);
        let mut seen: Vec<f64> = basis.centers().column(0).to_vec();
        seen.dedup();
        assert_eq!(seen.len(), 200);
    }

    #[test]
    fn basis_rejects_bad_sigma_and_dims() {
        let a = line(&[0.0, 1.0]);
        assert!(build_basis(&a, &a, 0.0, 10, 0).is_err());
        assert!(build_basis(&a, &a, -1.0, 10, 0).is_err());
        let b = ds(&[vec![0.0, 1.0]]);
        assert!(matches!(
            build_basis(&a, &b, 1.0, 10, 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let basis = build_basis(&a, &a, 1.0, 10, 0).unwrap();
        assert!(eval_basis(&basis, &b).is_err());
    }

    #[test]
    fn eval_values() {
        let sigma = 0.8;
        let c = sigma * (2.0 * 2f64.ln()).sqrt();
        let basis = GaussianBasis::new(array![[0.0], [c]], sigma).unwrap();
        let phi = eval_basis(&basis, &line(&[0.0])).unwrap();
        assert_eq!(phi.values()[[0, 0]], 1.0);
        assert!((phi.values()[[0, 1]] - 0.5).abs() < 1e-15);

        let far = eval_basis(&basis, &line(&[1.0, 2.0, 4.0, 8.0])).unwrap();
        let col: Vec<f64> = far.values().column(0).to_vec();
        assert!(col.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn gram_closed_form_values() {
        let basis = GaussianBasis::new(array![[0.5], [0.5]], 1.0).unwrap();
        let h = analytic_gram(&basis);
        assert!((h[[0, 1]] - std::f64::consts::PI.sqrt()).abs() < 1e-15);

        let basis = GaussianBasis::new(array![[0.0, 0.0], [1.0, 0.0]], 0.5).unwrap();
        let h = analytic_gram(&basis);
        let expected = 0.25 * std::f64::consts::PI * (-1.0f64).exp();
        assert!((h[[0, 1]] - expected).abs() < 1e-15);
        assert!((h[[0, 1]] - 0.288_931_837).abs() < 1e-9);
        assert_eq!(h[[0, 1]], h[[1, 0]]);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median_heuristic(&line(&[0.0]), &line(&[2.0]), 0).unwrap(), 2.0);
        assert_eq!(median_heuristic(&line(&[0.0, 1.0]), &line(&[2.0]), 0).unwrap(), 1.0);
        assert!(matches!(
            median_heuristic(&line(&[3.0, 3.0]), &line(&[3.0]), 0),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn median_subsample_is_seeded() {
        let a = line(&(0..700).map(|i| f64::from(i) * 0.37 % 11.0).collect::<Vec<_>>());
        let b = line(&(0..700).map(|i| f64::from(i) * 0.53 % 7.0).collect::<Vec<_>>());
        let m1 = median_heuristic(&a, &b, 3).unwrap();
        let m2 = median_heuristic(&a, &b, 3).unwrap();
        assert_eq!(m1, m2);
        assert!(m1 > 0.0);
    }

    #[test]
    fn works_in_f32() {
        let a = Dataset::<f32>::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let basis = build_basis(&a, &a, 1.0f32, 10, 0).unwrap();
        let phi = eval_basis(&basis, &a).unwrap();
        assert_eq!(phi.values()[[0, 0]], 1.0f32);
        let h = analytic_gram(&basis);
        assert!((h[[0, 0]] - std::f32::consts::PI.sqrt()).abs() < 1e-6);
    }
}
