use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::data::check_labels;
use crate::dsdd::ModelDocument;
use crate::error::{Error, Result};

/// Labels a method assigned to `X_p` and `X_p'`, with whatever it chose
/// along the way.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelingResult {
    pub labels_p: Vec<i8>,
    pub labels_q: Vec<i8>,
    pub method: String,
    pub hyperparams: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, f64>,
    /// Fitted kernel model, for methods that produce one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDocument>,
}

impl LabelingResult {
    pub fn new(method: impl Into<String>, labels_p: Vec<i8>, labels_q: Vec<i8>) -> Self {
        LabelingResult {
            labels_p,
            labels_q,
            method: method.into(),
            ..Default::default()
        }
    }

    /// Every label negated.
    pub fn flipped(&self) -> Self {
        LabelingResult {
            labels_p: self.labels_p.iter().map(|y| -y).collect(),
            labels_q: self.labels_q.iter().map(|y| -y).collect(),
            ..self.clone()
        }
    }
}

fn mismatches(labels: &[i8], truth: &[i8]) -> Result<usize> {
    if labels.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: labels.len(),
        });
    }
    check_labels(labels)?;
    check_labels(truth)?;
    Ok(labels.iter().zip(truth).filter(|(a, b)| a != b).count())
}

/// `(wrong, m)` pooled over both datasets.
fn pooled_errors(result: &LabelingResult, truth_p: &[i8], truth_q: &[i8]) -> Result<(usize, usize)> {
    let wrong = mismatches(&result.labels_p, truth_p)? + mismatches(&result.labels_q, truth_q)?;
    let m = truth_p.len() + truth_q.len();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok((wrong, m))
}

/// Misclassification rate pooled over all `n + n'` samples.
pub fn mcr(result: &LabelingResult, truth_p: &[i8], truth_q: &[i8]) -> Result<f64> {
    let (wrong, m) = pooled_errors(result, truth_p, truth_q)?;
    Ok(wrong as f64 / m as f64)
}

/// `min(MCR, 1 − MCR)`: the error of the better of the two label namings.
/// Counted in integers so that flipping every label gives the same bits.
pub fn ler(result: &LabelingResult, truth_p: &[i8], truth_q: &[i8]) -> Result<f64> {
    let (wrong, m) = pooled_errors(result, truth_p, truth_q)?;
    Ok(wrong.min(m - wrong) as f64 / m as f64)
}

/// Sum of the two per-dataset error rates. Can exceed 1; reported only as a
/// diagnostic next to the pooled rate.
pub fn per_dataset_rate(result: &LabelingResult, truth_p: &[i8], truth_q: &[i8]) -> Result<f64> {
    if truth_p.is_empty() || truth_q.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let wp = mismatches(&result.labels_p, truth_p)? as f64 / truth_p.len() as f64;
    let wq = mismatches(&result.labels_q, truth_q)? as f64 / truth_q.len() as f64;
    Ok(wp + wq)
}

/// `(1/(2^m m)) Σ_i min(i, m − i) C(m, i)` as an exact rational.
pub fn expected_random_ler_exact(m: usize) -> Result<BigRational> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let mut binom = BigInt::from(1u8);
    let mut total = BigInt::zero();
    for i in 0..=m {
        total += &binom * BigInt::from(i.min(m - i));
        // C(m, i+1) = C(m, i)·(m − i)/(i + 1)
        binom = binom * BigInt::from(m - i) / BigInt::from(i + 1);
    }
    let denom = (BigInt::from(1u8) << m) * BigInt::from(m);
    Ok(BigRational::new(total, denom))
}

/// Mean LER of a uniformly random labeling of `m` samples.
pub fn expected_random_ler(m: usize) -> Result<f64> {
    expected_random_ler_exact(m)?
        .to_f64()
        .ok_or(Error::NonFinite("expected random LER"))
}
