use crate::data::Dataset;
use crate::dsdd::sign_label;
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

/// Gaussian kernel density estimate with isotropic width `sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeModel<T: Scalar> {
    pub samples: Dataset<T>,
    pub sigma: T,
}

pub fn kde_fit<T: Scalar>(x: &Dataset<T>, sigma: T) -> Result<KdeModel<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    Ok(KdeModel {
        samples: x.clone(),
        sigma,
    })
}

/// Normalizing constant of `N(0, s²I)` in `d` dimensions.
fn gauss_norm<T: Scalar>(s2: T, d: usize) -> T {
    (T::lit(2.0 * std::f64::consts::PI) * s2).powf(T::lit(-(d as f64) / 2.0))
}

/// `p̂(x) = (1/n) Σ_i N(x; x_i, σ²I)`.
pub fn kde_density<T: Scalar>(model: &KdeModel<T>, x: &[T]) -> Result<T> {
    let d = model.samples.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    let s2 = model.sigma * model.sigma;
    let c = gauss_norm(s2, d);
    let two = T::lit(2.0);
    let total: T = model
        .samples
        .samples()
        .rows()
        .into_iter()
        .map(|r| {
            let r = r.to_vec();
            (-sq_dist(&r, x) / (two * s2)).exp()
        })
        .sum();
    Ok(c * total / T::lit(model.samples.n() as f64))
}

/// `LSCV(σ) = ∫p̂² − (2/n) Σ_i p̂₋ᵢ(x_i)`, with `∫p̂²` in closed form.
pub fn kde_lscv_score<T: Scalar>(x: &Dataset<T>, sigma: T) -> Result<T> {
    let n = x.n();
    if n < 2 {
        return Err(Error::invalid("samples", "least-squares cross-validation needs n >= 2"));
    }
    if !(sigma > T::zero()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let d = x.dim();
    let s2 = sigma * sigma;
    let conv_norm = gauss_norm(T::lit(2.0) * s2, d);
    let kern_norm = gauss_norm(s2, d);
    let rows: Vec<Vec<T>> = x.samples().rows().into_iter().map(|r| r.to_vec()).collect();
    let mut conv = T::zero();
    let mut loo = T::zero();
    for i in 0..n {
        conv += conv_norm;
        for j in (i + 1)..n {
            let dist = sq_dist(&rows[i], &rows[j]);
            conv += T::lit(2.0) * conv_norm * (-dist / (T::lit(4.0) * s2)).exp();
            loo += T::lit(2.0) * kern_norm * (-dist / (T::lit(2.0) * s2)).exp();
        }
    }
    let nf = T::lit(n as f64);
    let integral = conv / (nf * nf);
    // Σ_i p̂₋ᵢ(x_i) = (1/(n−1)) Σ_{i≠j} N(x_i − x_j)
    let loo_sum = loo / (nf - T::one());
    Ok(integral - T::lit(2.0) * loo_sum / nf)
}

/// Grid bandwidth minimizing the least-squares CV criterion; ties go to the
/// larger bandwidth.
pub fn kde_lscv<T: Scalar>(x: &Dataset<T>, sigma_grid: &[T]) -> Result<T> {
    if sigma_grid.is_empty() {
        return Err(Error::invalid("sigma_grid", "must be non-empty"));
    }
    if x.n() < 2 {
        return Err(Error::invalid("samples", "least-squares cross-validation needs n >= 2"));
    }
    let mut best = (sigma_grid[0], kde_lscv_score(x, sigma_grid[0])?);
    for &s in &sigma_grid[1..] {
        let score = kde_lscv_score(x, s)?;
        if score < best.1 || (score == best.1 && s > best.0) {
            best = (s, score);
        }
    }
    Ok(best.0)
}

/// Label both sets by `sign(p̂(x) − p̂'(x))` with independently selected
/// bandwidths; ties go to `+1`.
pub fn kde_label<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, sigma_grid: &[T]) -> Result<(Vec<i8>, Vec<i8>)> {
    if xp.dim() != xq.dim() {
        return Err(Error::DimensionMismatch {
            expected: xp.dim(),
            found: xq.dim(),
        });
    }
    let kp = kde_fit(xp, kde_lscv(xp, sigma_grid)?)?;
    let kq = kde_fit(xq, kde_lscv(xq, sigma_grid)?)?;
    let label = |ds: &Dataset<T>| -> Result<Vec<i8>> {
        ds.samples()
            .rows()
            .into_iter()
            .map(|r| {
                let r = r.to_vec();
                Ok(sign_label(kde_density(&kp, &r)? - kde_density(&kq, &r)?))
            })
            .collect()
    };
    Ok((label(xp)?, label(xq)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn line(points: &[f64]) -> Dataset<f64> {
        Dataset::from_rows(&points.iter().map(|&p| vec![p]).collect::<Vec<_>>()).unwrap()
    }

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
        let h = (hi - lo) / steps as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for k in 1..steps {
            s += f(lo + h * k as f64);
        }
        s * h
    }

    #[test]
    fn standard_normal_peak_and_mass() {
        let m = kde_fit(&line(&[0.0]), 1.0).unwrap();
        let peak = kde_density(&m, &[0.0]).unwrap();
        assert!((peak - 0.398_942_280_401_432_7).abs() < 1e-15);
        let mass = trapezoid(|x| kde_density(&m, &[x]).unwrap(), -12.0, 12.0, 20_000);
        assert!((mass - 1.0).abs() < 1e-4);
    }

    #[test]
    fn density_reflection_and_positivity() {
        let m = kde_fit(&line(&[0.3, -1.2, 2.0]), 0.7).unwrap();
        let r = kde_fit(&line(&[-0.3, 1.2, -2.0]), 0.7).unwrap();
        for x in [-3.0, -0.5, 0.0, 0.9, 5.0] {
            let a = kde_density(&m, &[x]).unwrap();
            let b = kde_density(&r, &[-x]).unwrap();
            assert!((a - b).abs() < 1e-15);
            assert!(a > 0.0);
        }
    }

    #[test]
    fn lscv_single_grid_and_errors() {
        let x = line(&[0.0, 1.0, 3.0]);
        assert_eq!(kde_lscv(&x, &[0.4]).unwrap(), 0.4);
        assert!(kde_lscv(&x, &[]).is_err());
        assert!(kde_lscv(&line(&[1.0]), &[0.4]).is_err());
    }

    #[test]
    fn lscv_picks_interior_bandwidth() {
        let mut rng = rng_from_seed(2024);
        let pts: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let x = line(&pts);
        let chosen = kde_lscv(&x, &[0.05, 0.3, 1.0, 5.0]).unwrap();
        assert!(chosen == 0.3 || chosen == 1.0, "chose {chosen}");
    }

    #[test]
    fn lscv_integral_matches_quadrature() {
        let x = line(&[-0.7, 0.1, 0.4, 1.9]);
        let sigma = 0.6;
        let m = kde_fit(&x, sigma).unwrap();
        let integral = trapezoid(|t| kde_density(&m, &[t]).unwrap().powi(2), -10.0, 10.0, 40_000);
        // recover ∫p̂² from the score by adding back the leave-one-out part
        let n = 4.0;
        let mut loo = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let d: f64 = x.row(i)[0] - x.row(j)[0];
                    loo += (-d * d / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
                }
            }
        }
        let score = kde_lscv_score(&x, sigma).unwrap();
        let closed = score + 2.0 * loo / (n - 1.0) / n;
        assert!((closed - integral).abs() < 1e-5, "{closed} vs {integral}");
    }

    #[test]
    fn labels_separated_and_antisymmetric() {
        let grid = [0.5, 1.0];
        let xp = line(&[-10.0, -10.5, -9.7, -10.2]);
        let xq = line(&[10.0, 10.3, 9.6, 10.8]);
        let (lp, lq) = kde_label(&xp, &xq, &grid).unwrap();
        assert!(lp.iter().all(|&y| y == lp[0]));
        assert!(lq.iter().all(|&y| y == lq[0]));
        assert_ne!(lp[0], lq[0]);

        let (sp, sq) = kde_label(&xq, &xp, &grid).unwrap();
        assert_eq!(sp, lq.iter().map(|y| -y).collect::<Vec<_>>());
        assert_eq!(sq, lp.iter().map(|y| -y).collect::<Vec<_>>());

        let (a, b) = kde_label(&xp, &xp, &grid).unwrap();
        assert!(a.iter().chain(&b).all(|&y| y == 1));
    }
}
