//! Labeling two unlabeled datasets that differ only in class balance.
//!
//! Under a class-prior change the sign of `p(x) − p'(x)` equals the sign of
//! `p(x|+1) − p(x|−1)`, so estimating it labels both datasets up to a swap
//! of the two label names. The main estimator fits a clipped kernel model
//! that maximizes an empirical lower bound on the L1 distance between the
//! two densities ([`dsdd`]); least-squares density difference, kernel
//! density estimation and two clustering methods serve as baselines
//! ([`baselines`]), and [`eval`] holds metrics, cross-validation and the
//! benchmark harness.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

// `!(x > 0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod basis;
pub mod cqp;
pub mod data;
pub mod dsdd;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type LabeledDataset = data::LabeledDataset<f64>;
pub type GaussianBasis = basis::GaussianBasis<f64>;
pub type DesignMatrix = basis::DesignMatrix<f64>;
pub type DsddModel = dsdd::DsddModel<f64>;
pub type LinearModel = dsdd::LinearModel<f64>;
pub type BoundVars = dsdd::BoundVars<f64>;
pub type CccpConfig = dsdd::CccpConfig<f64>;
pub type QpSolution = cqp::QpSolution<f64>;
pub type LsddModel = baselines::LsddModel<f64>;
pub type KdeModel = baselines::KdeModel<f64>;

pub type Dataset32 = data::Dataset<f32>;
pub type DsddModel32 = dsdd::DsddModel<f32>;
pub type CccpConfig32 = dsdd::CccpConfig<f32>;
