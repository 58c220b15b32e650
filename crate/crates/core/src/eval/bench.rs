use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate_dsdd_with, CvSettings};
use super::metrics::{expected_random_ler, ler, mcr, per_dataset_rate, LabelingResult};
use super::report::{sig4, to_json_exact};
use crate::baselines::{
    kde_label, kmeans_labels, lsdd_cross_validate, lsdd_fit, lsdd_label, spectral_cluster, split_pooled, DEFAULT_KNN,
};
use crate::basis::{build_basis, median_heuristic, DEFAULT_MAX_CENTERS};
use crate::data::{
    draw_by_prior, rng_from_seed, sample_mixture, shuffled, standardize_pair, Dataset, LabeledDataset, MixtureSpec,
};
use crate::dsdd::{cccp_fit, predict_sign, CccpConfig};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_SIGMA_MULTIPLIERS: [f64; 6] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0];
pub const DEFAULT_LAMBDAS: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dsdd,
    Lsdd,
    Kde,
    Km,
    Sc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dsdd, Method::Lsdd, Method::Kde, Method::Km, Method::Sc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dsdd => "dsdd",
            Method::Lsdd => "lsdd",
            Method::Kde => "kde",
            Method::Km => "km",
            Method::Sc => "sc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("method", format!("unknown method {s:?} (expected dsdd, lsdd, kde, km or sc)")))
    }
}

fn default_sigma_multipliers() -> Vec<f64> {
    DEFAULT_SIGMA_MULTIPLIERS.to_vec()
}
fn default_lambdas() -> Vec<f64> {
    DEFAULT_LAMBDAS.to_vec()
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_max_centers() -> usize {
    DEFAULT_MAX_CENTERS
}
fn default_knn() -> usize {
    DEFAULT_KNN
}
fn default_restarts() -> usize {
    DEFAULT_KMEANS_RESTARTS
}
fn default_true() -> bool {
    true
}

/// Per-method tuning shared by the benchmark and one-off labeling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSettings {
    /// Bandwidth grid as multiples of the median pairwise distance.
    #[serde(default = "default_sigma_multipliers")]
    pub sigma_multipliers: Vec<f64>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_max_centers")]
    pub max_centers: usize,
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
    /// Skip bandwidth selection.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Skip regularization selection.
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            sigma_multipliers: default_sigma_multipliers(),
            lambdas: default_lambdas(),
            folds: DEFAULT_FOLDS,
            max_centers: DEFAULT_MAX_CENTERS,
            knn: DEFAULT_KNN,
            kmeans_restarts: DEFAULT_KMEANS_RESTARTS,
            sigma: None,
            lambda: None,
        }
    }
}

fn positive_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "must be non-empty"));
    }
    if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::invalid(name, format!("entries must be positive and finite, found {v}")));
    }
    Ok(())
}

impl MethodSettings {
    pub fn validate(&self) -> Result<()> {
        positive_grid("sigma_multipliers", &self.sigma_multipliers)?;
        positive_grid("lambdas", &self.lambdas)?;
        if self.folds < 2 {
            return Err(Error::invalid("folds", "must be at least 2"));
        }
        if self.max_centers == 0 {
            return Err(Error::invalid("max_centers", "must be at least 1"));
        }
        if self.knn == 0 {
            return Err(Error::invalid("knn", "must be at least 1"));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::invalid("kmeans_restarts", "must be at least 1"));
        }
        if let Some(s) = self.sigma {
            positive_grid("sigma", &[s])?;
        }
        if let Some(l) = self.lambda {
            positive_grid("lambda", &[l])?;
        }
        Ok(())
    }

    fn sigma_grid(&self, median: f64) -> Vec<f64> {
        match self.sigma {
            Some(s) => vec![s],
            None => self.sigma_multipliers.iter().map(|m| m * median).collect(),
        }
    }

    fn lambda_grid(&self) -> Vec<f64> {
        match self.lambda {
            Some(l) => vec![l],
            None => self.lambdas.clone(),
        }
    }
}

/// Label `X_p` and `X_p'` with one method, selecting hyperparameters by
/// cross-validation unless they are fixed in `settings`.
pub fn run_method(
    method: Method,
    xp: &Dataset<f64>,
    xq: &Dataset<f64>,
    settings: &MethodSettings,
    seed: u64,
) -> Result<LabelingResult> {
    settings.validate()?;
    if xp.dim() != xq.dim() {
        return Err(Error::DimensionMismatch {
            expected: xp.dim(),
            found: xq.dim(),
        });
    }
    let mut hyper = BTreeMap::new();
    let mut diag = BTreeMap::new();
    let mut model_doc = None;
    let median = || -> Result<f64> {
        match settings.sigma {
            Some(_) => Ok(f64::NAN),
            None => median_heuristic(xp, xq, seed),
        }
    };
    let (lp, lq) = match method {
        Method::Dsdd => {
            let med = median()?;
            let sigmas = settings.sigma_grid(med);
            let lambdas = settings.lambda_grid();
            let (sigma, lambda) = if sigmas.len() * lambdas.len() == 1 {
                (sigmas[0], lambdas[0])
            } else {
                let cv = cross_validate_dsdd_with(
                    xp,
                    xq,
                    &sigmas,
                    &lambdas,
                    &CvSettings {
                        folds: settings.folds,
                        max_centers: settings.max_centers,
                        seed,
                        cccp: CccpConfig::default(),
                    },
                )?;
                (cv.sigma, cv.lambda)
            };
            let basis = build_basis(xp, xq, sigma, settings.max_centers, seed)?;
            let model = cccp_fit(xp, xq, &basis, &CccpConfig::with_lambda(lambda))?;
            hyper.insert("sigma".into(), sigma);
            hyper.insert("lambda".into(), lambda);
            diag.insert("outer_iterations".into(), model.iterations as f64);
            diag.insert("converged".into(), f64::from(u8::from(model.converged)));
            diag.insert("objective".into(), *model.objective_trace.last().expect("trace"));
            model_doc = Some(model.to_document());
            (predict_sign(&model, xp)?, predict_sign(&model, xq)?)
        }
        Method::Lsdd => {
            let med = median()?;
            let sigmas = settings.sigma_grid(med);
            let lambdas = settings.lambda_grid();
            let (sigma, lambda) = if sigmas.len() * lambdas.len() == 1 {
                (sigmas[0], lambdas[0])
            } else {
                let cv = lsdd_cross_validate(xp, xq, &sigmas, &lambdas, settings.folds, settings.max_centers, seed)?;
                (cv.sigma, cv.lambda)
            };
            let model = lsdd_fit(xp, xq, sigma, lambda, settings.max_centers, seed)?;
            hyper.insert("sigma".into(), sigma);
            hyper.insert("lambda".into(), lambda);
            diag.insert("residual".into(), model.residual);
            model_doc = Some(model.to_document());
            (lsdd_label(&model, xp)?, lsdd_label(&model, xq)?)
        }
        Method::Kde => {
            let med = median()?;
            kde_label(xp, xq, &settings.sigma_grid(med))?
        }
        Method::Km => split_pooled(
            kmeans_labels(&xp.concat(xq)?, settings.kmeans_restarts, KMEANS_MAX_ITER, seed)?,
            xp.n(),
        ),
        Method::Sc => split_pooled(spectral_cluster(&xp.concat(xq)?, settings.knn, seed)?, xp.n()),
    };
    let mut result = LabelingResult::new(method.name(), lp, lq);
    result.hyperparams = hyper;
    result.diagnostics = diag;
    result.model = model_doc;
    Ok(result)
}

/// A benchmark run: which methods, how the pair is drawn, how often.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub methods: Vec<Method>,
    /// `p(y = +1)` for `X_p`.
    pub prior_p: f64,
    /// `p'(y = +1)` for `X_p'`.
    pub prior_q: f64,
    pub n: usize,
    pub nq: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Grids and method options; omitted keys take their defaults.
    #[serde(default)]
    pub settings: MethodSettings,
}

impl ExperimentConfig {
    pub fn new(methods: Vec<Method>, priors: (f64, f64), sizes: (usize, usize), trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            methods,
            prior_p: priors.0,
            prior_q: priors.1,
            n: sizes.0,
            nq: sizes.1,
            trials,
            seed,
            standardize: true,
            settings: MethodSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "must list at least one method"));
        }
        for (name, p) in [("prior_p", self.prior_p), ("prior_q", self.prior_q)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1), got {p}")));
            }
        }
        if self.n == 0 || self.nq == 0 {
            return Err(Error::invalid("n", "dataset sizes must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        self.settings.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}

/// Where benchmark pairs come from.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    /// Fresh draws every trial.
    Mixture(&'a MixtureSpec),
    /// Draws without replacement from a finite labeled pool.
    Labeled(&'a LabeledDataset<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub ler: Option<f64>,
    pub mcr: Option<f64>,
    pub per_dataset_rate: Option<f64>,
    pub hyperparams: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Over completed trials only.
    pub mean_ler: Option<f64>,
    pub sd_ler: Option<f64>,
    pub completed: usize,
    pub failures: usize,
    pub trials: Vec<TrialRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub config: ExperimentConfig,
    /// `n + n'`.
    pub m: usize,
    pub random_baseline: f64,
    pub rows: Vec<MethodSummary>,
}

impl ResultTable {
    pub fn row(&self, method: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_exact(self)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:>9} {:>9} {:>9} {:>7}\n",
            "method", "mean_ler", "sd_ler", "completed", "failed"
        );
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), sig4);
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>9} {:>9} {:>9} {:>7}\n",
                r.method.name(),
                opt(r.mean_ler),
                opt(r.sd_ler),
                r.completed,
                r.failures
            ));
        }
        out.push_str(&format!(
            "{:<8} {:>9} {:>9} {:>9} {:>7}\n",
            "random",
            sig4(self.random_baseline),
            "-",
            "-",
            "-"
        ));
        out
    }
}

fn check_source(config: &ExperimentConfig, source: &Source<'_>) -> Result<()> {
    match source {
        Source::Mixture(spec) => spec.validate(),
        Source::Labeled(ds) => {
            let (pos, neg) = ds.class_indices();
            let need_pos = (config.prior_p * config.n as f64).round() as usize
                + (config.prior_q * config.nq as f64).round() as usize;
            let need_neg = config.n + config.nq - need_pos;
            if need_pos > pos.len() || need_neg > neg.len() {
                return Err(Error::invalid(
                    "source",
                    format!(
                        "insufficient class counts: each trial needs {need_pos} positive and {need_neg} negative samples, source has {} and {}",
                        pos.len(),
                        neg.len()
                    ),
                ));
            }
            Ok(())
        }
    }
}

type Pair = (LabeledDataset<f64>, LabeledDataset<f64>);

fn draw_pair(config: &ExperimentConfig, source: &Source<'_>, rng: &mut crate::data::SeededRng) -> Result<Pair> {
    match source {
        Source::Mixture(spec) => {
            let sp: u64 = rng.random();
            let sq: u64 = rng.random();
            Ok((
                sample_mixture(spec, config.n, config.prior_p, sp)?,
                sample_mixture(spec, config.nq, config.prior_q, sq)?,
            ))
        }
        Source::Labeled(ds) => {
            let (pos, neg) = ds.class_indices();
            let mut pos = shuffled(pos, rng);
            let mut neg = shuffled(neg, rng);
            let xp = draw_by_prior(ds, &mut pos, &mut neg, config.n, config.prior_p)?;
            let xq = draw_by_prior(ds, &mut pos, &mut neg, config.nq, config.prior_q)?;
            Ok((xp, xq))
        }
    }
}

type TrialOutcome = Vec<(Method, std::result::Result<(LabelingResult, f64, f64, f64), String>)>;

fn run_trial(config: &ExperimentConfig, source: &Source<'_>, seed: u64) -> Result<TrialOutcome> {
    let mut rng = rng_from_seed(seed);
    let (lp, lq) = draw_pair(config, source, &mut rng)?;
    let method_seed: u64 = rng.random();
    let (xp, xq) = if config.standardize {
        standardize_pair(&lp.samples, &lq.samples)?
    } else {
        (lp.samples.clone(), lq.samples.clone())
    };
    Ok(config
        .methods
        .iter()
        .map(|&m| {
            let outcome = run_method(m, &xp, &xq, &config.settings, method_seed).and_then(|r| {
                let e = ler(&r, &lp.labels, &lq.labels)?;
                let c = mcr(&r, &lp.labels, &lq.labels)?;
                let d = per_dataset_rate(&r, &lp.labels, &lq.labels)?;
                Ok((r, e, c, d))
            });
            (m, outcome.map_err(|e| e.to_string()))
        })
        .collect())
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(sd))
}

/// Repeat: draw a pair at the configured priors, run every method, score
/// its labels. Trials run in parallel on the current rayon pool but each
/// has its own seed derived from `config.seed`, so results do not depend on
/// scheduling. Method failures are recorded and excluded from the means.
pub fn run_benchmark(config: &ExperimentConfig, source: Source<'_>) -> Result<ResultTable> {
    config.validate()?;
    check_source(config, &source)?;
    let mut seeder = rng_from_seed(config.seed);
    let seeds: Vec<u64> = (0..config.trials).map(|_| seeder.random()).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&s| run_trial(config, &source, s))
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<MethodSummary> = config
        .methods
        .iter()
        .map(|&method| MethodSummary {
            method,
            mean_ler: None,
            sd_ler: None,
            completed: 0,
            failures: 0,
            trials: Vec::with_capacity(config.trials),
        })
        .collect();
    for (trial, (outcome, &seed)) in outcomes.into_iter().zip(&seeds).enumerate() {
        for (row, (_, res)) in rows.iter_mut().zip(outcome) {
            let record = match res {
                Ok((r, e, c, d)) => TrialRecord {
                    trial,
                    seed,
                    ler: Some(e),
                    mcr: Some(c),
                    per_dataset_rate: Some(d),
                    hyperparams: r.hyperparams,
                    error: None,
                },
                Err(msg) => TrialRecord {
                    trial,
                    seed,
                    ler: None,
                    mcr: None,
                    per_dataset_rate: None,
                    hyperparams: BTreeMap::new(),
                    error: Some(msg),
                },
            };
            row.trials.push(record);
        }
    }
    for row in &mut rows {
        let lers: Vec<f64> = row.trials.iter().filter_map(|t| t.ler).collect();
        row.completed = lers.len();
        row.failures = row.trials.len() - lers.len();
        (row.mean_ler, row.sd_ler) = mean_sd(&lers);
    }
    let m = config.n + config.nq;
    Ok(ResultTable {
        config: config.clone(),
        m,
        random_baseline: expected_random_ler(m)?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Component;

    fn blobs() -> MixtureSpec {
        let cov = vec![vec![0.01, 0.0], vec![0.0, 0.01]];
        MixtureSpec {
            components: vec![
                Component {
                    mean: vec![-10.0, 0.0],
                    covariance: cov.clone(),
                    weight: 1.0,
                    class: 1,
                },
                Component {
                    mean: vec![10.0, 0.0],
                    covariance: cov,
                    weight: 1.0,
                    class: -1,
                },
            ],
        }
    }

    #[test]
    fn kmeans_on_separated_blobs() {
        let config = ExperimentConfig::new(vec![Method::Km], (0.2, 0.8), (20, 20), 1, 5);
        let table = run_benchmark(&config, Source::Mixture(&blobs())).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].mean_ler, Some(0.0));
        assert!((table.random_baseline - expected_random_ler(40).unwrap()).abs() == 0.0);
        assert!(table.to_text().contains("random"));
    }

    #[test]
    fn config_json_rules() {
        let config = ExperimentConfig::new(vec![Method::Km, Method::Sc], (0.2, 0.8), (40, 40), 5, 1);
        let text = serde_json::to_string(&config).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), config);
        let minimal = r#"{"schema_version":1,"methods":["km"],"prior_p":0.2,"prior_q":0.8,"n":40,"nq":40,"trials":5,"seed":3}"#;
        let parsed = ExperimentConfig::from_json(minimal).unwrap();
        assert_eq!(parsed.settings, MethodSettings::default());
        let unknown = minimal.replace("\"seed\":3", "\"seed\":3,\"bogus\":1");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
        let zero = minimal.replace("\"trials\":5", "\"trials\":0");
        assert!(ExperimentConfig::from_json(&zero).is_err());
        assert!("smic".parse::<Method>().is_err());
    }

    #[test]
    fn labeled_source_counts() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = (0..10).map(|i| if i < 5 { 1 } else { -1 }).collect();
        let ds = LabeledDataset::new(Dataset::from_rows(&rows).unwrap(), labels).unwrap();
        let config = ExperimentConfig::new(vec![Method::Km], (0.5, 0.5), (4, 4), 2, 0);
        let table = run_benchmark(&config, Source::Labeled(&ds)).unwrap();
        assert_eq!(table.rows[0].completed, 2);
        let greedy = ExperimentConfig::new(vec![Method::Km], (0.8, 0.8), (5, 5), 1, 0);
        assert!(run_benchmark(&greedy, Source::Labeled(&ds)).is_err());
    }
}
