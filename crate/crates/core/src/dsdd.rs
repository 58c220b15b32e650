//! Direct estimation of the sign of the density difference.
//!
//! The model `g(x) = Σ_ℓ α_ℓ φ_ℓ(x)` is fitted by minimizing
//!
//! ```text
//! J(α) = (1/n')Σ_i R(g(x'_i)) − (1/n)Σ_j R(g(x_j)) + (λ/2)‖α‖²
//! ```
//!
//! where `R` clips to `[−1, 1]`. Writing `R(z) = C₋₁(z) − C₁(z) − 1` with
//! `C_ε(z) = max(0, z − ε)` splits `J` into a convex and a concave part; the
//! concave part is majorized through the conjugate of `C_ε` and the
//! resulting convex problems are solved in turn (convex-concave procedure).

use serde::{Deserialize, Serialize};

use crate::basis::{eval_basis, DesignMatrix, GaussianBasis};
use crate::cqp::{
    self, linear_upper_bound, solve_linear_upper_bound, solve_upper_bound_from, LinearSolution,
    UpperBoundProblem, DEFAULT_MAX_INNER, DEFAULT_QP_TOL,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm_sq, Scalar};

/// Clip to `[−1, 1]`.
pub fn ramp<T: Scalar>(z: T) -> T {
    if z > T::one() {
        T::one()
    } else if z < -T::one() {
        -T::one()
    } else {
        z
    }
}

/// `C_ε(z) = max(0, z − ε)`.
pub fn plus_hinge<T: Scalar>(epsilon: T, z: T) -> T {
    (z - epsilon).max(T::zero())
}

/// Convex conjugate of `C_ε`: `εz` on `[0, 1]`, `+∞` elsewhere.
pub fn plus_hinge_conjugate<T: Scalar>(epsilon: T, z: T) -> T {
    if z >= T::zero() && z <= T::one() {
        epsilon * z
    } else {
        T::infinity()
    }
}

/// Hinge `H_ε(z) = max(0, ε − z)`.
pub fn hinge<T: Scalar>(epsilon: T, z: T) -> T {
    (epsilon - z).max(T::zero())
}

fn check_alpha<T: Scalar>(alpha: &[T], phi_q: &DesignMatrix<T>, phi_p: &DesignMatrix<T>) -> Result<()> {
    for b in [phi_q.basis_size(), phi_p.basis_size()] {
        if alpha.len() != b {
            return Err(Error::LengthMismatch {
                expected: b,
                found: alpha.len(),
            });
        }
    }
    if phi_q.n() == 0 || phi_p.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn mean_of<T: Scalar>(values: impl Iterator<Item = T>, n: usize) -> T {
    values.sum::<T>() / T::lit(n as f64)
}

fn ridge<T: Scalar>(alpha: &[T], lambda: T) -> T {
    lambda * norm_sq(alpha) / T::lit(2.0)
}

/// The two clipped data terms `((1/n')Σ R(g(x')), (1/n)Σ R(g(x)))`.
pub fn data_terms<T: Scalar>(alpha: &[T], phi_q: &DesignMatrix<T>, phi_p: &DesignMatrix<T>) -> Result<(T, T)> {
    check_alpha(alpha, phi_q, phi_p)?;
    let gq = phi_q.apply(alpha)?;
    let gp = phi_p.apply(alpha)?;
    Ok((
        mean_of(gq.iter().map(|&g| ramp(g)), gq.len()),
        mean_of(gp.iter().map(|&g| ramp(g)), gp.len()),
    ))
}

/// `J(α)`; `phi_q` is evaluated on `X_p'`, `phi_p` on `X_p`.
pub fn objective<T: Scalar>(alpha: &[T], phi_q: &DesignMatrix<T>, phi_p: &DesignMatrix<T>, lambda: T) -> Result<T> {
    let (tq, tp) = data_terms(alpha, phi_q, phi_p)?;
    Ok(tq - tp + ridge(alpha, lambda))
}

/// `(J_vex(α), J_cave(α))` with `J_vex + J_cave = J`.
pub fn split_objective<T: Scalar>(
    alpha: &[T],
    phi_q: &DesignMatrix<T>,
    phi_p: &DesignMatrix<T>,
    lambda: T,
) -> Result<(T, T)> {
    check_alpha(alpha, phi_q, phi_p)?;
    let gq = phi_q.apply(alpha)?;
    let gp = phi_p.apply(alpha)?;
    let one = T::one();
    let vex = mean_of(gq.iter().map(|&g| plus_hinge(-one, g)), gq.len())
        + mean_of(gp.iter().map(|&g| plus_hinge(one, g)), gp.len())
        + ridge(alpha, lambda);
    let cave = -mean_of(gq.iter().map(|&g| plus_hinge(one, g)), gq.len())
        - mean_of(gp.iter().map(|&g| plus_hinge(-one, g)), gp.len());
    Ok((vex, cave))
}

/// Multipliers that specify the linear majorizer of the concave part:
/// `b` over `X_p'`, `c` over `X_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundVars<T: Scalar> {
    b: Vec<T>,
    c: Vec<T>,
}

impl<T: Scalar> BoundVars<T> {
    /// Entries must lie in `[0, 1]`, the domain of the conjugates.
    pub fn new(b: Vec<T>, c: Vec<T>) -> Result<Self> {
        for (name, v) in [("b", &b), ("c", &c)] {
            if let Some(x) = v.iter().find(|&&x| !(x >= T::zero() && x <= T::one())) {
                return Err(Error::invalid(name, format!("bound entry {x} outside [0, 1]")));
            }
        }
        Ok(BoundVars { b, c })
    }

    pub fn zeros(nq: usize, np: usize) -> Self {
        BoundVars {
            b: vec![T::zero(); nq],
            c: vec![T::zero(); np],
        }
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }
}

/// Closed-form minimizer of the concave bound at `α`:
/// `b_i = 0` if `g(x'_i) < 1` else `1`; `c_j = 0` if `g(x_j) < −1` else `1`.
pub fn tighten_bound<T: Scalar>(alpha: &[T], phi_q: &DesignMatrix<T>, phi_p: &DesignMatrix<T>) -> Result<BoundVars<T>> {
    check_alpha(alpha, phi_q, phi_p)?;
    let gq = phi_q.apply(alpha)?;
    let gp = phi_p.apply(alpha)?;
    let indicator = |g: T, threshold: T| if g < threshold { T::zero() } else { T::one() };
    Ok(BoundVars {
        b: gq.iter().map(|&g| indicator(g, T::one())).collect(),
        c: gp.iter().map(|&g| indicator(g, -T::one())).collect(),
    })
}

/// `J̄_cave(α, b, c) = (1/n')Σ b_i(1 − g(x'_i)) + (1/n)Σ c_j(−1 − g(x_j))`.
pub fn concave_bound<T: Scalar>(
    alpha: &[T],
    bound: &BoundVars<T>,
    phi_q: &DesignMatrix<T>,
    phi_p: &DesignMatrix<T>,
) -> Result<T> {
    check_alpha(alpha, phi_q, phi_p)?;
    if bound.b.len() != phi_q.n() || bound.c.len() != phi_p.n() {
        return Err(Error::LengthMismatch {
            expected: phi_q.n() + phi_p.n(),
            found: bound.b.len() + bound.c.len(),
        });
    }
    let gq = phi_q.apply(alpha)?;
    let gp = phi_p.apply(alpha)?;
    let one = T::one();
    let tq = mean_of(
        gq.iter().zip(&bound.b).map(|(&g, &b)| plus_hinge_conjugate(one, b) - b * g),
        gq.len(),
    );
    let tp = mean_of(
        gp.iter().zip(&bound.c).map(|(&g, &c)| plus_hinge_conjugate(-one, c) - c * g),
        gp.len(),
    );
    Ok(tq + tp)
}

/// Settings of the convex-concave procedure.
#[derive(Clone, Debug, PartialEq)]
pub struct CccpConfig<T: Scalar> {
    pub lambda: T,
    /// Stop once `‖α^{t+1} − α^t‖₂ ≤ stop_e`.
    pub stop_e: T,
    pub max_outer: usize,
    pub qp_tol: T,
    pub max_inner: usize,
}

impl<T: Scalar> CccpConfig<T> {
    pub fn with_lambda(lambda: T) -> Self {
        CccpConfig {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) {
            return Err(Error::invalid("lambda", "must be strictly positive"));
        }
        if !(self.stop_e > T::zero()) {
            return Err(Error::invalid("stop_e", "must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer", "must be at least 1"));
        }
        if !(self.qp_tol > T::zero()) {
            return Err(Error::invalid("qp_tol", "must be positive"));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for CccpConfig<T> {
    fn default() -> Self {
        CccpConfig {
            lambda: T::lit(0.1),
            stop_e: T::tol_floor(1e-5),
            max_outer: 100,
            qp_tol: T::tol_floor(DEFAULT_QP_TOL),
            max_inner: DEFAULT_MAX_INNER,
        }
    }
}

/// A fitted sign estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct DsddModel<T: Scalar> {
    pub basis: GaussianBasis<T>,
    pub alpha: Vec<T>,
    pub lambda: T,
    /// `J(α^t)` for every iterate, starting with the initializer.
    pub objective_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> DsddModel<T> {
    /// `g(x)` at every row of `x`.
    pub fn decision_values(&self, x: &Dataset<T>) -> Result<Vec<T>> {
        eval_basis(&self.basis, x)?.apply(&self.alpha)
    }

    pub fn decision(&self, x: &[T]) -> T {
        dot(&self.basis.features(x), &self.alpha)
    }

    pub fn negated(&self) -> Self {
        DsddModel {
            alpha: self.alpha.iter().map(|&a| -a).collect(),
            ..self.clone()
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            kind: "dsdd".into(),
            sigma: self.basis.sigma().as_f64(),
            centers: self
                .basis
                .centers()
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect(),
            coefficients: self.alpha.iter().map(|v| v.as_f64()).collect(),
            lambda: self.lambda.as_f64(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let (basis, alpha) = doc.basis_and_coefficients()?;
        Ok(DsddModel {
            basis,
            alpha,
            lambda: T::lit(doc.lambda),
            objective_trace: Vec::new(),
            iterations: 0,
            converged: true,
        })
    }
}

/// JSON form of a kernel model: `{kind, sigma, centers, alpha, lambda}`.
///
/// Floats are written with 17 significant digits, so a document read back
/// reproduces the model bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub kind: String,
    pub sigma: f64,
    pub centers: Vec<Vec<f64>>,
    #[serde(rename = "alpha")]
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl ModelDocument {
    pub fn basis_and_coefficients<T: Scalar>(&self) -> Result<(GaussianBasis<T>, Vec<T>)> {
        let b = self.centers.len();
        let d = self.centers.first().map_or(0, Vec::len);
        if self.centers.iter().any(|c| c.len() != d) {
            return Err(Error::invalid("centers", "rows have different lengths"));
        }
        if self.coefficients.len() != b {
            return Err(Error::LengthMismatch {
                expected: b,
                found: self.coefficients.len(),
            });
        }
        let flat: Vec<T> = self.centers.iter().flatten().map(|&v| T::lit(v)).collect();
        let centers = ndarray::Array2::from_shape_vec((b, d), flat)
            .map_err(|e| Error::invalid("centers", e.to_string()))?;
        let basis = GaussianBasis::new(centers, T::lit(self.sigma))?;
        Ok((basis, self.coefficients.iter().map(|&v| T::lit(v)).collect()))
    }

    pub fn to_json(&self) -> Result<String> {
        crate::eval::to_json_exact(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Sign labeling with the tie `g(x) = 0` mapped to `+1`.
pub fn sign_label<T: Scalar>(g: T) -> i8 {
    if g >= T::zero() {
        1
    } else {
        -1
    }
}

pub fn predict_sign<T: Scalar>(model: &DsddModel<T>, x: &Dataset<T>) -> Result<Vec<i8>> {
    Ok(model.decision_values(x)?.into_iter().map(sign_label).collect())
}

/// Where the convex-concave iteration starts.
#[derive(Clone, Debug, PartialEq)]
pub enum Init<T: Scalar> {
    /// `α¹ = argmin J_vex`, the upper-bound problem with `b = c = 0`.
    ConvexPart,
    Given(Vec<T>),
}

pub fn cccp_fit<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    basis: &GaussianBasis<T>,
    config: &CccpConfig<T>,
) -> Result<DsddModel<T>> {
    cccp_fit_from(xp, xq, basis, config, &Init::ConvexPart)
}

fn qp_failure<T: Scalar>(sol_iters: usize, residual: T) -> Error {
    Error::NotConverged {
        iterations: sol_iters,
        residual: residual.as_f64(),
    }
}

pub fn cccp_fit_from<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    basis: &GaussianBasis<T>,
    config: &CccpConfig<T>,
    init: &Init<T>,
) -> Result<DsddModel<T>> {
    config.validate()?;
    let phi_q = eval_basis(basis, xq)?;
    let phi_p = eval_basis(basis, xp)?;
    let fit = run_cccp(&phi_q, &phi_p, config, init)?;
    Ok(DsddModel {
        basis: basis.clone(),
        alpha: fit.alpha,
        lambda: config.lambda,
        objective_trace: fit.trace,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

struct CccpRun<T: Scalar> {
    alpha: Vec<T>,
    trace: Vec<T>,
    iterations: usize,
    converged: bool,
}

fn run_cccp<T: Scalar>(
    phi_q: &DesignMatrix<T>,
    phi_p: &DesignMatrix<T>,
    config: &CccpConfig<T>,
    init: &Init<T>,
) -> Result<CccpRun<T>> {
    let (mut alpha, mut warm) = match init {
        Init::ConvexPart => {
            let zero = BoundVars::zeros(phi_q.n(), phi_p.n());
            let problem = UpperBoundProblem {
                phi_q,
                phi_p,
                bvec: zero.b(),
                cvec: zero.c(),
                lambda: config.lambda,
            };
            let sol = solve_upper_bound_from(&problem, config.qp_tol, config.max_inner, None)?;
            if !sol.converged {
                return Err(qp_failure(sol.inner_iterations, sol.kkt_residual));
            }
            (sol.alpha, Some(sol.dual))
        }
        Init::Given(a) => {
            check_alpha(a, phi_q, phi_p)?;
            (a.clone(), None)
        }
    };
    let mut trace = vec![objective(&alpha, phi_q, phi_p, config.lambda)?];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_outer {
        iterations += 1;
        let bound = tighten_bound(&alpha, phi_q, phi_p)?;
        let problem = UpperBoundProblem {
            phi_q,
            phi_p,
            bvec: bound.b(),
            cvec: bound.c(),
            lambda: config.lambda,
        };
        let sol = solve_upper_bound_from(&problem, config.qp_tol, config.max_inner, warm.as_deref())?;
        if !sol.converged {
            return Err(qp_failure(sol.inner_iterations, sol.kkt_residual));
        }
        let step = alpha
            .iter()
            .zip(&sol.alpha)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt();
        alpha = sol.alpha;
        warm = Some(sol.dual);
        let j = objective(&alpha, phi_q, phi_p, config.lambda)?;
        if !j.is_finite() {
            return Err(Error::NonFinite("cccp objective"));
        }
        trace.push(j);
        if step <= config.stop_e {
            converged = true;
            break;
        }
    }
    Ok(CccpRun {
        alpha,
        trace,
        iterations,
        converged,
    })
}

/// Hinge-relaxed linear baseline: drop the concave terms, leaving
/// `(1/n)Σ max(0, 1 − g(x_i)) + (1/n')Σ max(0, 1 + g(x'_j)) + (λ/2)‖w‖²`.
pub fn hinge_relaxed_fit<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, lambda: T) -> Result<LinearModel<T>> {
    let tol = T::tol_floor(DEFAULT_QP_TOL);
    let sol = cqp::solve_hinge(xp, xq, lambda, tol, DEFAULT_MAX_INNER)?;
    if !sol.converged {
        return Err(qp_failure(sol.inner_iterations, sol.kkt_residual));
    }
    Ok(LinearModel {
        w: sol.w,
        intercept: sol.intercept,
        objective_trace: vec![sol.objective],
        iterations: 1,
        converged: true,
    })
}

/// Linear decision function `g(x) = wᵀx + β₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel<T: Scalar> {
    pub w: Vec<T>,
    pub intercept: T,
    pub objective_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> LinearModel<T> {
    pub fn decision(&self, x: &[T]) -> T {
        dot(&self.w, x) + self.intercept
    }

    pub fn predict(&self, x: &Dataset<T>) -> Result<Vec<i8>> {
        if x.dim() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                found: x.dim(),
            });
        }
        Ok(x
            .samples()
            .rows()
            .into_iter()
            .map(|r| sign_label(r.iter().zip(&self.w).fold(self.intercept, |a, (&x, &v)| a + x * v)))
            .collect())
    }
}

/// Ramp objective for a linear model, intercept unpenalized.
pub fn linear_ramp_objective<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, w: &[T], intercept: T, lambda: T) -> T {
    let g = |r: ndarray::ArrayView1<'_, T>| r.iter().zip(w).fold(intercept, |a, (&x, &v)| a + x * v);
    let tq = mean_of(xq.samples().rows().into_iter().map(|r| ramp(g(r))), xq.n());
    let tp = mean_of(xp.samples().rows().into_iter().map(|r| ramp(g(r))), xp.n());
    tq - tp + ridge(w, lambda)
}

/// Convex-concave procedure for the ramp objective with a linear model.
pub fn ramp_linear_fit<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, config: &CccpConfig<T>) -> Result<LinearModel<T>> {
    config.validate()?;
    if xp.dim() != xq.dim() {
        return Err(Error::DimensionMismatch {
            expected: xp.dim(),
            found: xq.dim(),
        });
    }
    let solve = |b: &[T], c: &[T], warm: Option<&[T]>| -> Result<LinearSolution<T>> {
        let problem = linear_upper_bound(xp, xq, b, c, config.lambda)?;
        let sol = solve_linear_upper_bound(&problem, config.qp_tol, config.max_inner, warm)?;
        if !sol.converged {
            return Err(qp_failure(sol.inner_iterations, sol.kkt_residual));
        }
        Ok(sol)
    };
    let decision = |w: &[T], b0: T, ds: &Dataset<T>| -> Vec<T> {
        ds.samples()
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(w).fold(b0, |a, (&x, &v)| a + x * v))
            .collect()
    };
    let first = solve(&vec![T::zero(); xq.n()], &vec![T::zero(); xp.n()], None)?;
    let (mut w, mut b0) = (first.w, first.intercept);
    let mut trace = vec![linear_ramp_objective(xp, xq, &w, b0, config.lambda)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_outer {
        iterations += 1;
        let bq: Vec<T> = decision(&w, b0, xq)
            .into_iter()
            .map(|g| if g < T::one() { T::zero() } else { T::one() })
            .collect();
        let cp: Vec<T> = decision(&w, b0, xp)
            .into_iter()
            .map(|g| if g < -T::one() { T::zero() } else { T::one() })
            .collect();
        let sol = solve(&bq, &cp, None)?;
        let step = (w
            .iter()
            .zip(&sol.w)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            + (b0 - sol.intercept) * (b0 - sol.intercept))
            .sqrt();
        w = sol.w;
        b0 = sol.intercept;
        trace.push(linear_ramp_objective(xp, xq, &w, b0, config.lambda));
        if step <= config.stop_e {
            converged = true;
            break;
        }
    }
    Ok(LinearModel {
        w,
        intercept: b0,
        objective_trace: trace,
        iterations,
        converged,
    })
}
