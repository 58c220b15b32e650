//! Convex subproblems of the form
//!
//! ```text
//! F(θ, β₀) = Σ_i w_i max(0, a_iᵀθ + t_i β₀ + e_i) − sᵀθ − s₀ β₀ + (λ/2)‖θ‖²
//! ```
//!
//! solved through the box-constrained dual
//!
//! ```text
//! max_β  βᵀe − (λ/2)‖θ(β)‖²,   θ(β) = (s − Aᵀβ)/λ,   0 ≤ β_i ≤ w_i
//! ```
//!
//! with `Σ t_i β_i = s₀` added when the unpenalized intercept `β₀` is present.
//! Without an intercept the dual is solved by cyclic coordinate ascent; with
//! one, by SMO pair updates with second-order working-set selection.
//!
//! The slack form with `ξ_i ≥ 0, ξ_i ≥ a_iᵀθ + t_iβ₀ + e_i` is equivalent:
//! at any `θ` the optimal slacks are exactly the `max(0, ·)` terms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;

use crate::basis::DesignMatrix;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm_sq, Scalar};

/// Default stationarity tolerance of the inner solver.
pub const DEFAULT_QP_TOL: f64 = 1e-8;
/// Default inner iteration budget (coordinate sweeps).
pub const DEFAULT_MAX_INNER: usize = 50_000;

/// Stop the dual iteration once violations fall below this fraction of the
/// requested tolerance, so the primal certificate has room to spare.
const STOP_FRACTION: f64 = 0.1;

/// Sweeps between attempts to jump straight to the optimum of the current
/// free set. Coordinate descent alone crawls when the rows are nearly
/// collinear (wide kernels, small λ).
const POLISH_EVERY: usize = 50;

/// Sum of weighted plus-hinges in the general form above.
#[derive(Clone, Debug)]
pub(crate) struct HingeSum<T: Scalar> {
    rows: Array2<T>,
    offsets: Vec<T>,
    weights: Vec<T>,
    linear: Vec<T>,
    intercept: Option<(Vec<T>, T)>,
    lambda: T,
}

#[derive(Clone, Debug)]
pub(crate) struct Solved<T: Scalar> {
    pub theta: Vec<T>,
    pub intercept: T,
    pub dual: Vec<T>,
    pub objective: T,
    pub kkt_residual: T,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<T>,
}

fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}

impl<T: Scalar> HingeSum<T> {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be strictly positive"));
        }
        let n = self.rows.nrows();
        if self.offsets.len() != n || self.weights.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self.offsets.len().min(self.weights.len()),
            });
        }
        if self.linear.len() != self.rows.ncols() {
            return Err(Error::LengthMismatch {
                expected: self.rows.ncols(),
                found: self.linear.len(),
            });
        }
        if let Some((signs, _)) = &self.intercept {
            if signs.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: signs.len(),
                });
            }
        }
        if self.rows.iter().chain(&self.linear).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("problem data"));
        }
        Ok(())
    }

    fn margin(&self, i: usize, theta: &[T], b0: T) -> T {
        let row = self.rows.row(i);
        let mut z = self.offsets[i] + dot(row.as_slice().expect("standard layout"), theta);
        if let Some((signs, _)) = &self.intercept {
            z += signs[i] * b0;
        }
        z
    }

    pub fn primal(&self, theta: &[T], b0: T) -> T {
        let mut f = T::zero();
        for i in 0..self.rows.nrows() {
            f += self.weights[i] * self.margin(i, theta, b0).max(T::zero());
        }
        f -= dot(&self.linear, theta);
        if let Some((_, s0)) = &self.intercept {
            f -= *s0 * b0;
        }
        f + self.lambda * norm_sq(theta) / T::lit(2.0)
    }

    fn theta_from_dual(&self, beta: &[T]) -> Vec<T> {
        let mut theta = self.linear.clone();
        for (i, &bi) in beta.iter().enumerate() {
            if bi != T::zero() {
                for (t, &a) in theta.iter_mut().zip(self.rows.row(i)) {
                    *t -= bi * a;
                }
            }
        }
        theta.iter_mut().for_each(|t| *t /= self.lambda);
        theta
    }

    /// Minimized dual `−βᵀe + (λ/2)‖θ‖²`; non-increasing along the iteration.
    fn neg_dual(&self, beta: &[T], theta: &[T]) -> T {
        self.lambda * norm_sq(theta) / T::lit(2.0) - dot(beta, &self.offsets)
    }

    /// Norm of a subgradient of `F` at `(θ, β₀)`. Kinks within `band` of zero
    /// count as active, so any multiplier in `[0, w_i]` is admissible there.
    fn kkt_residual(&self, beta: &[T], theta: &[T], b0: T, band: T) -> T {
        let p = theta.len();
        let mut r: Vec<T> = theta.iter().map(|&t| self.lambda * t).collect();
        for (rv, &s) in r.iter_mut().zip(&self.linear) {
            *rv -= s;
        }
        let mut r0 = self.intercept.as_ref().map_or(T::zero(), |(_, s0)| -*s0);
        for i in 0..self.rows.nrows() {
            let z = self.margin(i, theta, b0);
            let gamma = if z > band {
                self.weights[i]
            } else if z < -band {
                T::zero()
            } else {
                clamp(beta[i], T::zero(), self.weights[i])
            };
            if gamma != T::zero() {
                for (k, rv) in r.iter_mut().enumerate().take(p) {
                    *rv += gamma * self.rows[[i, k]];
                }
                if let Some((signs, _)) = &self.intercept {
                    r0 += gamma * signs[i];
                }
            }
        }
        (norm_sq(&r) + r0 * r0).sqrt()
    }

    pub fn solve(&self, tol: T, max_inner: usize, warm: Option<&[T]>) -> Result<Solved<T>> {
        self.validate()?;
        if !(tol > T::zero()) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        match self.intercept {
            None => self.solve_box(tol, max_inner, warm),
            Some(_) => self.solve_smo(tol, max_inner, warm),
        }
    }

    fn initial_dual(&self, warm: Option<&[T]>) -> Vec<T> {
        let n = self.rows.nrows();
        match warm {
            Some(w) if w.len() == n => w
                .iter()
                .zip(&self.weights)
                .map(|(&b, &u)| clamp(b, T::zero(), u))
                .collect(),
            _ => vec![T::zero(); n],
        }
    }

    fn solve_box(&self, tol: T, max_inner: usize, warm: Option<&[T]>) -> Result<Solved<T>> {
        let n = self.rows.nrows();
        let stop = tol * T::lit(STOP_FRACTION);
        let mut beta = self.initial_dual(warm);
        let mut theta = self.theta_from_dual(&beta);
        let norms: Vec<T> = self
            .rows
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| v * v).sum())
            .collect();
        let mut trace = vec![self.neg_dual(&beta, &theta)];
        let mut sweeps = 0;
        let mut dual_converged = false;
        while sweeps < max_inner {
            sweeps += 1;
            let mut max_violation = T::zero();
            for i in 0..n {
                let row = self.rows.row(i);
                let row = row.as_slice().expect("standard layout");
                let g = self.offsets[i] + dot(row, &theta);
                let (lo, hi) = (T::zero(), self.weights[i]);
                let pg = if beta[i] <= lo {
                    g.max(T::zero())
                } else if beta[i] >= hi {
                    g.min(T::zero())
                } else {
                    g
                };
                max_violation = max_violation.max(pg.abs());
                if pg == T::zero() {
                    continue;
                }
                let updated = if norms[i] > T::zero() {
                    clamp(beta[i] + g * self.lambda / norms[i], lo, hi)
                } else if g > T::zero() {
                    hi
                } else {
                    lo
                };
                let delta = updated - beta[i];
                if delta != T::zero() {
                    beta[i] = updated;
                    let step = delta / self.lambda;
                    for (t, &a) in theta.iter_mut().zip(row) {
                        *t -= step * a;
                    }
                }
            }
            let value = self.neg_dual(&beta, &theta);
            if !value.is_finite() {
                return Err(Error::NonFinite("dual coordinate descent"));
            }
            trace.push(value);
            if max_violation <= stop {
                dual_converged = true;
                break;
            }
            if sweeps % POLISH_EVERY == 0 {
                if let Some(candidate) = self.polish(&beta) {
                    let th = self.theta_from_dual(&candidate);
                    let v = self.neg_dual(&candidate, &th);
                    if v < value {
                        beta = candidate;
                        theta = th;
                        trace.push(v);
                    }
                }
            }
        }
        let theta = self.theta_from_dual(&beta);
        self.finish(beta, theta, T::zero(), tol, sweeps, dual_converged, trace)
    }

    /// One active-set step of the box dual. Multipliers strictly inside
    /// their box are treated as free and solved for jointly so that their
    /// margins vanish (minimum-norm solution when the rows are dependent);
    /// the move toward that point is cut short at the first bound it hits.
    fn polish(&self, beta: &[T]) -> Option<Vec<T>> {
        let free: Vec<usize> = (0..beta.len())
            .filter(|&i| beta[i] > T::zero() && beta[i] < self.weights[i])
            .collect();
        if free.is_empty() {
            return None;
        }
        let p = self.rows.ncols();
        let mut base: Vec<f64> = self.linear.iter().map(|v| v.as_f64()).collect();
        for (i, &bi) in beta.iter().enumerate() {
            if bi != T::zero() && !free.contains(&i) {
                for (t, &a) in base.iter_mut().zip(self.rows.row(i)) {
                    *t -= bi.as_f64() * a.as_f64();
                }
            }
        }
        let m = free.len();
        let af = DMatrix::from_fn(m, p, |r, k| self.rows[[free[r], k]].as_f64());
        let lambda = self.lambda.as_f64();
        let rhs = &af * DVector::from_vec(base)
            + DVector::from_fn(m, |r, _| lambda * self.offsets[free[r]].as_f64());
        let eig = SymmetricEigen::new(&af * af.transpose());
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
        let cut = top * f64::EPSILON * 1e4 * m as f64;
        let mut coef = eig.eigenvectors.transpose() * rhs;
        for (c, &ev) in coef.iter_mut().zip(eig.eigenvalues.iter()) {
            *c = if ev > cut { *c / ev } else { 0.0 };
        }
        let target = &eig.eigenvectors * coef;

        let mut step = 1.0f64;
        for (r, &i) in free.iter().enumerate() {
            let (cur, w) = (beta[i].as_f64(), self.weights[i].as_f64());
            let d = target[r] - cur;
            if d > 0.0 && cur + d > w {
                step = step.min((w - cur) / d);
            } else if d < 0.0 && cur + d < 0.0 {
                step = step.min(-cur / d);
            }
        }
        if !(step > 0.0) || !target.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut next = beta.to_vec();
        for (r, &i) in free.iter().enumerate() {
            let cur = beta[i].as_f64();
            next[i] = clamp(T::lit(cur + step * (target[r] - cur)), T::zero(), self.weights[i]);
        }
        Some(next)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        beta: Vec<T>,
        theta: Vec<T>,
        b0: T,
        tol: T,
        iterations: usize,
        dual_converged: bool,
        trace: Vec<T>,
    ) -> Result<Solved<T>> {
        if theta.iter().any(|v| !v.is_finite()) || !b0.is_finite() {
            return Err(Error::NonFinite("qp solution"));
        }
        let objective = self.primal(&theta, b0);
        let kkt_residual = self.kkt_residual(&beta, &theta, b0, tol);
        Ok(Solved {
            theta,
            intercept: b0,
            dual: beta,
            objective,
            kkt_residual,
            iterations,
            converged: dual_converged && kkt_residual <= tol,
            trace,
        })
    }

    fn feasible_start(&self, signs: &[T], s0: T, warm: Option<&[T]>) -> Result<Vec<T>> {
        let start = self.initial_dual(warm);
        let balance: T = start.iter().zip(signs).map(|(&b, &t)| b * t).sum();
        let scale = T::one().max(s0.abs());
        if warm.is_some() && (balance - s0).abs() <= T::epsilon() * T::lit(16.0) * scale {
            return Ok(start);
        }
        let side = if s0 >= T::zero() { T::one() } else { -T::one() };
        let capacity: T = self
            .weights
            .iter()
            .zip(signs)
            .filter(|(_, &t)| t == side)
            .map(|(&w, _)| w)
            .sum();
        let need = s0.abs();
        if need > capacity * (T::one() + T::epsilon() * T::lit(16.0)) {
            return Err(Error::invalid(
                "intercept",
                "equality constraint of the dual is infeasible",
            ));
        }
        let frac = if capacity > T::zero() {
            (need / capacity).min(T::one())
        } else {
            T::zero()
        };
        Ok(self
            .weights
            .iter()
            .zip(signs)
            .map(|(&w, &t)| if t == side { w * frac } else { T::zero() })
            .collect())
    }

    fn solve_smo(&self, tol: T, max_inner: usize, warm: Option<&[T]>) -> Result<Solved<T>> {
        let (signs, s0) = self.intercept.as_ref().expect("intercept present");
        let n = self.rows.nrows();
        let stop = tol * T::lit(STOP_FRACTION);
        let mut beta = self.feasible_start(signs, *s0, warm)?;
        let mut theta = self.theta_from_dual(&beta);
        let mut grad = vec![T::zero(); n];
        let mut trace = vec![self.neg_dual(&beta, &theta)];
        let budget = max_inner.saturating_mul(n.max(1));
        let tiny = T::epsilon();
        let mut iterations = 0;
        let mut dual_converged = false;

        while iterations < budget {
            for (i, g) in grad.iter_mut().enumerate() {
                let row = self.rows.row(i);
                *g = -self.offsets[i] - dot(row.as_slice().expect("standard layout"), &theta);
            }
            let in_up = |k: usize, beta: &[T]| {
                (signs[k] > T::zero() && beta[k] < self.weights[k]) || (signs[k] < T::zero() && beta[k] > T::zero())
            };
            let in_low = |k: usize, beta: &[T]| {
                (signs[k] > T::zero() && beta[k] > T::zero()) || (signs[k] < T::zero() && beta[k] < self.weights[k])
            };
            let mut i_sel = None;
            let mut m_up = T::neg_infinity();
            for k in 0..n {
                if in_up(k, &beta) {
                    let v = -signs[k] * grad[k];
                    if v > m_up {
                        m_up = v;
                        i_sel = Some(k);
                    }
                }
            }
            let mut m_low = T::infinity();
            let mut j_sel = None;
            let mut best_gain = T::neg_infinity();
            let i = match i_sel {
                Some(i) => i,
                None => {
                    dual_converged = true;
                    break;
                }
            };
            let ai = self.rows.row(i);
            for k in 0..n {
                if !in_low(k, &beta) {
                    continue;
                }
                let v = -signs[k] * grad[k];
                m_low = m_low.min(v);
                let diff = m_up - v;
                if diff > T::zero() {
                    let ak = self.rows.row(k);
                    let curv = ai
                        .iter()
                        .zip(ak)
                        .map(|(&x, &y)| {
                            let d = signs[i] * x - signs[k] * y;
                            d * d
                        })
                        .sum::<T>()
                        / self.lambda;
                    let gain = diff * diff / curv.max(tiny);
                    if gain > best_gain {
                        best_gain = gain;
                        j_sel = Some(k);
                    }
                }
            }
            if m_up - m_low <= stop || j_sel.is_none() {
                dual_converged = true;
                break;
            }
            let j = j_sel.expect("checked");
            iterations += 1;

            let aj = self.rows.row(j);
            let curv = ai
                .iter()
                .zip(aj)
                .map(|(&x, &y)| {
                    let d = signs[i] * x - signs[j] * y;
                    d * d
                })
                .sum::<T>()
                / self.lambda;
            let slope = m_up - (-signs[j] * grad[j]);
            let cap_i = if signs[i] > T::zero() {
                self.weights[i] - beta[i]
            } else {
                beta[i]
            };
            let cap_j = if signs[j] > T::zero() {
                beta[j]
            } else {
                self.weights[j] - beta[j]
            };
            let cap = cap_i.min(cap_j);
            let delta = if curv > tiny { (slope / curv).min(cap) } else { cap };
            if !(delta > T::zero()) {
                // Nothing representable left to move along this pair.
                dual_converged = m_up - m_low <= tol;
                break;
            }
            let di = signs[i] * delta;
            let dj = -signs[j] * delta;
            beta[i] = clamp(beta[i] + di, T::zero(), self.weights[i]);
            beta[j] = clamp(beta[j] + dj, T::zero(), self.weights[j]);
            for (k, t) in theta.iter_mut().enumerate() {
                *t -= (di * self.rows[[i, k]] + dj * self.rows[[j, k]]) / self.lambda;
            }
            let value = self.neg_dual(&beta, &theta);
            if !value.is_finite() {
                return Err(Error::NonFinite("smo"));
            }
            trace.push(value);
        }

        let theta = self.theta_from_dual(&beta);
        let b0 = self.recover_intercept(&beta, &theta, signs, tol);
        self.finish(beta, theta, b0, tol, iterations, dual_converged, trace)
    }

    /// Intercept from the KKT conditions: averaged over free multipliers,
    /// otherwise the midpoint of the interval the bounded ones allow.
    fn recover_intercept(&self, beta: &[T], theta: &[T], signs: &[T], tol: T) -> T {
        let mut sum = T::zero();
        let mut count = 0usize;
        let mut lo = T::neg_infinity();
        let mut hi = T::infinity();
        for i in 0..beta.len() {
            let base = self.margin(i, theta, T::zero());
            let t = signs[i];
            let w = self.weights[i];
            let slack = tol * w;
            if beta[i] > slack && beta[i] < w - slack {
                sum += -base / t;
                count += 1;
            } else {
                // β_i = 0 needs z_i ≤ 0, β_i = w_i needs z_i ≥ 0.
                let at_zero = beta[i] <= slack;
                let bound = -base / t;
                let upper = at_zero == (t > T::zero());
                if upper {
                    hi = hi.min(bound);
                } else {
                    lo = lo.max(bound);
                }
            }
        }
        if count > 0 {
            return sum / T::lit(count as f64);
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo + hi) / T::lit(2.0),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => T::zero(),
        }
    }
}

/// Convex upper bound solved at each step of the convex-concave procedure:
///
/// `F(α) = (1/n')Σ max(0, g(x'_i)+1) + (1/n)Σ max(0, g(x_j)−1)
///        − Σ_ℓ α_ℓ [(1/n')Σ b_i φ_ℓ(x'_i) + (1/n)Σ c_j φ_ℓ(x_j)] + (λ/2)‖α‖²`.
#[derive(Clone, Copy, Debug)]
pub struct UpperBoundProblem<'a, T: Scalar> {
    /// Design matrix over `X_p'`.
    pub phi_q: &'a DesignMatrix<T>,
    /// Design matrix over `X_p`.
    pub phi_p: &'a DesignMatrix<T>,
    /// One entry per sample of `X_p'`.
    pub bvec: &'a [T],
    /// One entry per sample of `X_p`.
    pub cvec: &'a [T],
    pub lambda: T,
}

/// Result of one upper-bound solve.
#[derive(Clone, Debug)]
pub struct QpSolution<T: Scalar> {
    pub alpha: Vec<T>,
    pub objective: T,
    pub kkt_residual: T,
    pub inner_iterations: usize,
    pub converged: bool,
    /// Dual multipliers, `X_p'` rows first; reusable as a warm start.
    pub dual: Vec<T>,
    /// Negated dual objective after every sweep (non-increasing).
    pub trace: Vec<T>,
}

fn check_unit_interval<T: Scalar>(name: &'static str, v: &[T]) -> Result<()> {
    if let Some(x) = v.iter().find(|&&x| !(x >= T::zero() && x <= T::one())) {
        return Err(Error::invalid(name, format!("entry {x} outside [0, 1]")));
    }
    Ok(())
}

impl<'a, T: Scalar> UpperBoundProblem<'a, T> {
    pub fn validate(&self) -> Result<()> {
        let b = self.phi_q.basis_size();
        if self.phi_p.basis_size() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                found: self.phi_p.basis_size(),
            });
        }
        if self.phi_q.n() == 0 || self.phi_p.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.bvec.len() != self.phi_q.n() {
            return Err(Error::LengthMismatch {
                expected: self.phi_q.n(),
                found: self.bvec.len(),
            });
        }
        if self.cvec.len() != self.phi_p.n() {
            return Err(Error::LengthMismatch {
                expected: self.phi_p.n(),
                found: self.cvec.len(),
            });
        }
        check_unit_interval("bvec", self.bvec)?;
        check_unit_interval("cvec", self.cvec)?;
        if !(self.lambda > T::zero()) {
            return Err(Error::invalid("lambda", "must be strictly positive"));
        }
        Ok(())
    }

    /// `(1/n')Σ b_i φ(x'_i) + (1/n)Σ c_j φ(x_j)`.
    pub fn linear_term(&self) -> Vec<T> {
        let nq = T::lit(self.phi_q.n() as f64);
        let np = T::lit(self.phi_p.n() as f64);
        let mut s = vec![T::zero(); self.phi_q.basis_size()];
        for (row, &bi) in self.phi_q.values().rows().into_iter().zip(self.bvec) {
            for (acc, &v) in s.iter_mut().zip(row) {
                *acc += bi * v / nq;
            }
        }
        for (row, &cj) in self.phi_p.values().rows().into_iter().zip(self.cvec) {
            for (acc, &v) in s.iter_mut().zip(row) {
                *acc += cj * v / np;
            }
        }
        s
    }

    pub(crate) fn as_hinge_sum(&self) -> HingeSum<T> {
        let nq = self.phi_q.n();
        let np = self.phi_p.n();
        let rows = ndarray::concatenate(
            ndarray::Axis(0),
            &[self.phi_q.values(), self.phi_p.values()],
        )
        .expect("matching basis size")
        .as_standard_layout()
        .into_owned();
        let mut offsets = vec![T::one(); nq];
        offsets.extend(std::iter::repeat_n(-T::one(), np));
        let mut weights = vec![T::one() / T::lit(nq as f64); nq];
        weights.extend(std::iter::repeat_n(T::one() / T::lit(np as f64), np));
        HingeSum {
            rows,
            offsets,
            weights,
            linear: self.linear_term(),
            intercept: None,
            lambda: self.lambda,
        }
    }

    /// Slack-eliminated objective `F(α)`.
    pub fn objective(&self, alpha: &[T]) -> Result<T> {
        self.validate()?;
        let gq = self.phi_q.apply(alpha)?;
        let gp = self.phi_p.apply(alpha)?;
        let nq = T::lit(gq.len() as f64);
        let np = T::lit(gp.len() as f64);
        let hinge_q: T = gq.iter().map(|&g| (g + T::one()).max(T::zero())).sum::<T>() / nq;
        let hinge_p: T = gp.iter().map(|&g| (g - T::one()).max(T::zero())).sum::<T>() / np;
        let s = self.linear_term();
        Ok(hinge_q + hinge_p - dot(&s, alpha) + self.lambda * norm_sq(alpha) / T::lit(2.0))
    }

    /// Objective of the slack-form QP at `(α, ξ', ξ)`; errors if the slacks
    /// violate `ξ ≥ 0` or `ξ ≥ margin`.
    pub fn slack_objective(&self, alpha: &[T], xi_q: &[T], xi_p: &[T]) -> Result<T> {
        self.validate()?;
        let gq = self.phi_q.apply(alpha)?;
        let gp = self.phi_p.apply(alpha)?;
        if xi_q.len() != gq.len() || xi_p.len() != gp.len() {
            return Err(Error::LengthMismatch {
                expected: gq.len() + gp.len(),
                found: xi_q.len() + xi_p.len(),
            });
        }
        let feasible = gq.iter().zip(xi_q).all(|(&g, &x)| x >= T::zero() && x >= g + T::one())
            && gp.iter().zip(xi_p).all(|(&g, &x)| x >= T::zero() && x >= g - T::one());
        if !feasible {
            return Err(Error::invalid("slack", "slack variables violate the constraints"));
        }
        let nq = T::lit(gq.len() as f64);
        let np = T::lit(gp.len() as f64);
        let s = self.linear_term();
        Ok(xi_q.iter().copied().sum::<T>() / nq + xi_p.iter().copied().sum::<T>() / np - dot(&s, alpha)
            + self.lambda * norm_sq(alpha) / T::lit(2.0))
    }
}

fn into_qp_solution<T: Scalar>(s: Solved<T>) -> QpSolution<T> {
    QpSolution {
        alpha: s.theta,
        objective: s.objective,
        kkt_residual: s.kkt_residual,
        inner_iterations: s.iterations,
        converged: s.converged,
        dual: s.dual,
        trace: s.trace,
    }
}

/// Minimize the upper bound to a subgradient norm of at most `tol`.
///
/// A run that exhausts `max_inner` sweeps returns its last iterate with
/// `converged = false`.
pub fn solve_upper_bound<T: Scalar>(
    problem: &UpperBoundProblem<'_, T>,
    tol: T,
    max_inner: usize,
) -> Result<QpSolution<T>> {
    solve_upper_bound_from(problem, tol, max_inner, None)
}

/// As [`solve_upper_bound`], starting the dual iteration from `warm`.
pub fn solve_upper_bound_from<T: Scalar>(
    problem: &UpperBoundProblem<'_, T>,
    tol: T,
    max_inner: usize,
    warm: Option<&[T]>,
) -> Result<QpSolution<T>> {
    problem.validate()?;
    let solved = problem.as_hinge_sum().solve(tol, max_inner, warm)?;
    Ok(into_qp_solution(solved))
}

/// Linear model `g(x) = wᵀx + β₀` with unpenalized intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSolution<T: Scalar> {
    pub w: Vec<T>,
    pub intercept: T,
    pub objective: T,
    pub kkt_residual: T,
    pub inner_iterations: usize,
    pub converged: bool,
    pub dual: Vec<T>,
    pub trace: Vec<T>,
}

impl<T: Scalar> LinearSolution<T> {
    pub fn decision(&self, x: &[T]) -> T {
        dot(&self.w, x) + self.intercept
    }

    fn from_solved(s: Solved<T>) -> Self {
        LinearSolution {
            w: s.theta,
            intercept: s.intercept,
            objective: s.objective,
            kkt_residual: s.kkt_residual,
            inner_iterations: s.iterations,
            converged: s.converged,
            dual: s.dual,
            trace: s.trace,
        }
    }
}

fn rows_of<T: Scalar>(ds: &Dataset<T>, sign: T) -> Array2<T> {
    ds.samples().mapv(|v| sign * v).as_standard_layout().into_owned()
}

/// Upper-bound problem for the linear ramp model: same form as
/// [`UpperBoundProblem`] with `g(x) = wᵀx + β₀` and only `w` penalized.
pub(crate) fn linear_upper_bound<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    bvec: &[T],
    cvec: &[T],
    lambda: T,
) -> Result<HingeSum<T>> {
    if xp.dim() != xq.dim() {
        return Err(Error::DimensionMismatch {
            expected: xp.dim(),
            found: xq.dim(),
        });
    }
    if bvec.len() != xq.n() || cvec.len() != xp.n() {
        return Err(Error::LengthMismatch {
            expected: xq.n() + xp.n(),
            found: bvec.len() + cvec.len(),
        });
    }
    check_unit_interval("bvec", bvec)?;
    check_unit_interval("cvec", cvec)?;
    let (nq, np) = (xq.n(), xp.n());
    let wq = T::one() / T::lit(nq as f64);
    let wp = T::one() / T::lit(np as f64);
    let rows = ndarray::concatenate(
        ndarray::Axis(0),
        &[rows_of(xq, T::one()).view(), rows_of(xp, T::one()).view()],
    )
    .expect("dims checked");
    let mut offsets = vec![T::one(); nq];
    offsets.extend(std::iter::repeat_n(-T::one(), np));
    let mut weights = vec![wq; nq];
    weights.extend(std::iter::repeat_n(wp, np));
    let mut linear = vec![T::zero(); xp.dim()];
    let mut s0 = T::zero();
    for (i, &bi) in bvec.iter().enumerate() {
        s0 += bi * wq;
        for (acc, &v) in linear.iter_mut().zip(xq.row(i)) {
            *acc += bi * wq * v;
        }
    }
    for (j, &cj) in cvec.iter().enumerate() {
        s0 += cj * wp;
        for (acc, &v) in linear.iter_mut().zip(xp.row(j)) {
            *acc += cj * wp * v;
        }
    }
    Ok(HingeSum {
        rows: rows.as_standard_layout().into_owned(),
        offsets,
        weights,
        linear,
        intercept: Some((vec![T::one(); nq + np], s0)),
        lambda,
    })
}

pub(crate) fn solve_linear_upper_bound<T: Scalar>(
    problem: &HingeSum<T>,
    tol: T,
    max_inner: usize,
    warm: Option<&[T]>,
) -> Result<LinearSolution<T>> {
    problem.solve(tol, max_inner, warm).map(LinearSolution::from_solved)
}

pub(crate) fn hinge_problem<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, lambda: T) -> Result<HingeSum<T>> {
    if xp.dim() != xq.dim() {
        return Err(Error::DimensionMismatch {
            expected: xp.dim(),
            found: xq.dim(),
        });
    }
    let (np, nq) = (xp.n(), xq.n());
    let rows = ndarray::concatenate(
        ndarray::Axis(0),
        &[rows_of(xp, -T::one()).view(), rows_of(xq, T::one()).view()],
    )
    .expect("dims checked")
    .as_standard_layout()
    .into_owned();
    let mut signs = vec![-T::one(); np];
    signs.extend(std::iter::repeat_n(T::one(), nq));
    let mut weights = vec![T::one() / T::lit(np as f64); np];
    weights.extend(std::iter::repeat_n(T::one() / T::lit(nq as f64), nq));
    Ok(HingeSum {
        rows,
        offsets: vec![T::one(); np + nq],
        weights,
        linear: vec![T::zero(); xp.dim()],
        intercept: Some((signs, T::zero())),
        lambda,
    })
}

/// Minimize the hinge-relaxed objective
/// `(1/n)Σ max(0, 1 − g(x_i)) + (1/n')Σ max(0, 1 + g(x'_j)) + (λ/2)‖w‖²`
/// over linear `g(x) = wᵀx + β₀`.
pub fn solve_hinge<T: Scalar>(
    xp: &Dataset<T>,
    xq: &Dataset<T>,
    lambda: T,
    tol: T,
    max_inner: usize,
) -> Result<LinearSolution<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::invalid("lambda", "must be strictly positive"));
    }
    let problem = hinge_problem(xp, xq, lambda)?;
    problem.solve(tol, max_inner, None).map(LinearSolution::from_solved)
}

/// Value of the hinge-relaxed objective at `(w, β₀)`.
pub fn hinge_objective<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, lambda: T, w: &[T], intercept: T) -> Result<T> {
    Ok(hinge_problem(xp, xq, lambda)?.primal(w, intercept))
}

/// Data terms of the hinge-relaxed objective (without the ridge).
pub fn hinge_data_terms<T: Scalar>(xp: &Dataset<T>, xq: &Dataset<T>, w: &[T], intercept: T) -> T {
    let np = T::lit(xp.n() as f64);
    let nq = T::lit(xq.n() as f64);
    let g = |x: ndarray::ArrayView1<'_, T>| x.iter().zip(w).fold(intercept, |a, (&u, &v)| a + u * v);
    let p: T = xp.samples().rows().into_iter().map(|r| (T::one() - g(r)).max(T::zero())).sum();
    let q: T = xq.samples().rows().into_iter().map(|r| (T::one() + g(r)).max(T::zero())).sum();
    p / np + q / nq
}
