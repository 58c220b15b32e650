use ndarray::{Array1, Array2};

use crate::basis::{analytic_gram, build_basis, eval_basis, GaussianBasis};
use crate::data::{kfold_indices, Dataset};
use crate::dsdd::{sign_label, ModelDocument};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::scalar::{dot, Scalar};

/// `ĝ(x) = θᵀψ(x)`, a least-squares fit of `p − p'`.
#[derive(Clone, Debug, PartialEq)]
pub struct LsddModel<T: Scalar> {
    pub basis: GaussianBasis<T>,
    pub theta: Vec<T>,
    pub lambda: T,
    /// `‖(H + λI)θ − ĥ‖` after the solve.
    pub residual: T,
}

impl<T: Scalar> LsddModel<T> {
    pub fn decision_values(&self, x: &Dataset<T>) -> Result<Vec<T>> {
        eval_basis(&self.basis, x)?.apply(&self.theta)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            kind: "lsdd".into(),
            sigma: self.basis.sigma().as_f64(),
            centers: self
                .basis
                .centers()
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect(),
            coefficients: self.theta.iter().map(|v| v.as_f64()).collect(),
            lambda: self.lambda.as_f64(),
        }
    }
}

fn residual_limit<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e4))
}

fn regularized_gram<T: Scalar>(basis: &GaussianBasis<T>, lambda: T) -> Array2<T> {
    let mut h = analytic_gram(basis);
    for l in 0..h.nrows() {
        h[[l, l]] += lambda;
    }
    h
}

/// `ĥ = (1/n)Σ ψ(x_i) − (1/n')Σ ψ(x'_j)`.
fn empirical_h<T: Scalar>(basis: &GaussianBasis<T>, xp: &Dataset<T>, xq: &Dataset<T>) -> Result<Vec<T>> {
    let mp = eval_basis(basis, xp)?.mean_row();
    let mq = eval_basis(basis, xq)?.mean_row();
    Ok(mp.iter().zip(&mq).map(|(&a, &b)| a - b).collect())
}

fn fit_on_basis<T: Scalar>(
    basis: GaussianBasis<T>,
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    lambda: T,
) -> Result<LsddModel<T>> {
    if !(lambda >= T::zero()) {
        return Err(Error::invalid("lambda", "must be non-negative"));
    }
    let h_hat = Array1::from(empirical_h(&basis, xp, xq)?);
    let system = regularized_gram(&basis, lambda);
    let chol = cholesky(system.view()).map_err(|_| {
        if lambda == T::zero() {
            Error::Singular("Gram matrix is rank-deficient; use lambda > 0".into())
        } else {
            Error::Singular("regularized Gram matrix is not positive definite".into())
        }
    })?;
    let mut theta = cholesky_solve(chol.view(), h_hat.view());
    let mut residual_vec = system.dot(&theta) - &h_hat;
    // Iterative refinement tightens the residual on ill-conditioned Grams.
    for _ in 0..3 {
        let correction = cholesky_solve(chol.view(), residual_vec.view());
        let refined = &theta - &correction;
        let refined_residual = system.dot(&refined) - &h_hat;
        if norm(&refined_residual) >= norm(&residual_vec) {
            break;
        }
        theta = refined;
        residual_vec = refined_residual;
    }
    let residual = norm(&residual_vec);
    let scale = norm(&h_hat);
    let limit = residual_limit::<T>() * if scale > T::zero() { scale } else { T::one() };
    if !(residual <= limit) {
        return Err(Error::Singular(format!(
            "LSDD solve residual {residual} exceeds {limit}; increase lambda"
        )));
    }
    Ok(LsddModel {
        basis,
        theta: theta.to_vec(),
        lambda,
        residual,
    })
}

fn norm<T: Scalar>(v: &Array1<T>) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Closed-form fit `θ = (H + λI)⁻¹ ĥ` with the analytic Gaussian Gram `H`.
pub fn lsdd_fit<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    sigma: T,
    lambda: T,
    max_centers: usize,
    seed: u64,
) -> Result<LsddModel<T>> {
    let basis = build_basis(xp, xq, sigma, max_centers, seed)?;
    fit_on_basis(basis, xp, xq, lambda)
}

/// Sign of `θᵀψ(x)`, ties to `+1`.
pub fn lsdd_label<T: Scalar>(model: &LsddModel<T>, x: &Dataset<T>) -> Result<Vec<i8>> {
    Ok(model.decision_values(x)?.into_iter().map(sign_label).collect())
}

/// Held-out squared-loss criterion `½θᵀHθ − ĥ_valᵀθ`.
pub fn lsdd_heldout_score<T: Scalar>(model: &LsddModel<T>, xp_val: &Dataset<T>, xq_val: &Dataset<T>) -> Result<T> {
    let h = analytic_gram(&model.basis);
    let theta = Array1::from(model.theta.clone());
    let quad = theta.dot(&h.dot(&theta));
    let h_val = empirical_h(&model.basis, xp_val, xq_val)?;
    Ok(quad / T::lit(2.0) - dot(&h_val, &model.theta))
}

/// Outcome of the LSDD grid search.
#[derive(Clone, Debug, PartialEq)]
pub struct LsddCv<T: Scalar> {
    pub sigma: T,
    pub lambda: T,
    /// `(σ, λ, mean held-out score)` for every grid cell.
    pub scores: Vec<(T, T, T)>,
}

/// k-fold selection of `(σ, λ)` by the held-out squared-loss criterion.
/// Ties go to the larger `σ`, then the larger `λ`.
pub fn lsdd_cross_validate<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    sigma_grid: &[T],
    lambda_grid: &[T],
    folds: usize,
    max_centers: usize,
    seed: u64,
) -> Result<LsddCv<T>> {
    if sigma_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::invalid("grid", "sigma and lambda grids must be non-empty"));
    }
    let folds_p = kfold_indices(xp.n(), folds, seed)?;
    let folds_q = kfold_indices(xq.n(), folds, seed.wrapping_add(1))?;
    let splits = folds_p
        .iter()
        .zip(&folds_q)
        .map(|((tp, vp), (tq, vq))| Ok((xp.select(tp)?, xp.select(vp)?, xq.select(tq)?, xq.select(vq)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut scores = Vec::with_capacity(sigma_grid.len() * lambda_grid.len());
    for &sigma in sigma_grid {
        for &lambda in lambda_grid {
            let mut total = T::zero();
            for (k, (trp, vap, trq, vaq)) in splits.iter().enumerate() {
                let model = lsdd_fit(trp, trq, sigma, lambda, max_centers, seed.wrapping_add(k as u64))?;
                total += lsdd_heldout_score(&model, vap, vaq)?;
            }
            scores.push((sigma, lambda, total / T::lit(splits.len() as f64)));
        }
    }
    let best = select_best(&scores);
    Ok(LsddCv {
        sigma: best.0,
        lambda: best.1,
        scores,
    })
}

/// Lowest score; ties prefer larger σ, then larger λ.
pub(crate) fn select_best<T: Scalar>(scores: &[(T, T, T)]) -> (T, T, T) {
    let mut best = scores[0];
    for &cell in &scores[1..] {
        let better = cell.2 < best.2
            || (cell.2 == best.2 && (cell.0 > best.0 || (cell.0 == best.0 && cell.1 > best.1)));
        if better {
            best = cell;
        }
    }
    best
}
