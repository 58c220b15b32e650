//! Comparison methods: least-squares density difference, kernel density
//! estimation, k-means and spectral clustering.

mod kde;
mod kmeans;
mod lsdd;
mod spectral;

pub use kde::{kde_density, kde_fit, kde_label, kde_lscv, kde_lscv_score, KdeModel};
pub use kmeans::{kmeans, kmeans_labels, KMeansFit};
pub(crate) use lsdd::select_best;
pub use lsdd::{lsdd_cross_validate, lsdd_fit, lsdd_heldout_score, lsdd_label, LsddCv, LsddModel};
pub use spectral::{knn_affinity, spectral_cluster, DEFAULT_KNN};

/// Split pooled labels back into the `X_p` and `X_p'` parts.
pub fn split_pooled(labels: Vec<i8>, n_p: usize) -> (Vec<i8>, Vec<i8>) {
    let mut labels = labels;
    let rest = labels.split_off(n_p);
    (labels, rest)
}
