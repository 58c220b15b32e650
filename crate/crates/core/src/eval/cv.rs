use rayon::prelude::*;

use crate::basis::{build_basis, eval_basis, DEFAULT_MAX_CENTERS};
use crate::data::{kfold_indices, Dataset};
use crate::dsdd::{cccp_fit, data_terms, CccpConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid-search outcome: the chosen cell and the mean held-out objective of
/// every `(σ, λ)` cell, in grid order (σ outer, λ inner).
#[derive(Clone, Debug, PartialEq)]
pub struct DsddCv<T: Scalar> {
    pub sigma: T,
    pub lambda: T,
    /// `(σ, λ, mean J_val)`; `+∞` marks a cell whose fits failed.
    pub scores: Vec<(T, T, T)>,
}

/// Fold/basis settings for [`cross_validate_dsdd_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct CvSettings<T: Scalar> {
    pub folds: usize,
    pub max_centers: usize,
    pub seed: u64,
    /// Everything but `lambda` is taken from here.
    pub cccp: CccpConfig<T>,
}

impl<T: Scalar> CvSettings<T> {
    pub fn new(folds: usize, seed: u64) -> Self {
        CvSettings {
            folds,
            max_centers: DEFAULT_MAX_CENTERS,
            seed,
            cccp: CccpConfig::default(),
        }
    }
}

pub fn cross_validate_dsdd<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    sigma_grid: &[T],
    lambda_grid: &[T],
    folds: usize,
    seed: u64,
) -> Result<DsddCv<T>> {
    cross_validate_dsdd_with(xp, xq, sigma_grid, lambda_grid, &CvSettings::new(folds, seed))
}

/// Held-out `J_val = (1/|val'|)Σ R(g(x')) − (1/|val|)Σ R(g(x))`, averaged
/// over folds drawn separately from `X_p` and `X_p'`. The lowest mean wins;
/// ties go to the larger σ, then the larger λ. A cell whose fit fails
/// numerically scores `+∞`; the search fails only if every cell does.
pub fn cross_validate_dsdd_with<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    sigma_grid: &[T],
    lambda_grid: &[T],
    settings: &CvSettings<T>,
) -> Result<DsddCv<T>> {
    if sigma_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::invalid("grid", "sigma and lambda grids must be non-empty"));
    }
    let k = settings.folds;
    if k > xp.n().min(xq.n()) {
        return Err(Error::invalid(
            "folds",
            format!("{k} folds exceed the smaller dataset size {}", xp.n().min(xq.n())),
        ));
    }
    let folds_p = kfold_indices(xp.n(), k, settings.seed)?;
    let folds_q = kfold_indices(xq.n(), k, settings.seed.wrapping_add(1))?;
    let splits = folds_p
        .iter()
        .zip(&folds_q)
        .map(|((tp, vp), (tq, vq))| Ok((xp.select(tp)?, xp.select(vp)?, xq.select(tq)?, xq.select(vq)?)))
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(T, T)> = sigma_grid
        .iter()
        .flat_map(|&s| lambda_grid.iter().map(move |&l| (s, l)))
        .collect();
    let outcomes: Vec<Result<T>> = cells
        .par_iter()
        .map(|&(sigma, lambda)| {
            let config = CccpConfig {
                lambda,
                ..settings.cccp.clone()
            };
            let mut total = T::zero();
            for (f, (trp, vap, trq, vaq)) in splits.iter().enumerate() {
                let basis = build_basis(trp, trq, sigma, settings.max_centers, settings.seed.wrapping_add(f as u64))?;
                let model = cccp_fit(trp, trq, &basis, &config)?;
                let (tq, tp) = data_terms(&model.alpha, &eval_basis(&basis, vaq)?, &eval_basis(&basis, vap)?)?;
                total += tq - tp;
            }
            Ok(total / T::lit(splits.len() as f64))
        })
        .collect();

    let mut scores = Vec::with_capacity(cells.len());
    let mut first_err = None;
    for (&(s, l), out) in cells.iter().zip(outcomes) {
        match out {
            Ok(v) => scores.push((s, l, v)),
            Err(e) if e.is_numerical() => {
                first_err.get_or_insert(e);
                scores.push((s, l, T::infinity()));
            }
            Err(e) => return Err(e),
        }
    }
    if scores.iter().all(|c| c.2 == T::infinity()) {
        return Err(first_err.expect("every cell failed"));
    }
    let best = crate::baselines::select_best(&scores);
    Ok(DsddCv {
        sigma: best.0,
        lambda: best.1,
        scores,
    })
}
