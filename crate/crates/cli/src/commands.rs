use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use densdiff::data::{
    load_csv, load_labels, sample_mixture, standardize_pair, toy1_spec, toy2_spec, uniform_strip_pair, write_csv,
    write_labels, LabeledDataset, MixtureSpec,
};
use densdiff::dsdd::{sign_label, ModelDocument};
use densdiff::eval::{run_benchmark, run_method, to_json_exact, ExperimentConfig, Method, MethodSettings, Source};
use densdiff::{Dataset, GaussianBasis};
use serde::{Deserialize, Serialize};

use crate::manifest::{digest_inputs, file_name, sibling, RunManifest, TOOL};
use crate::CliError;

/// A fully resolved command, as stored in a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "lowercase")]
pub enum Invocation {
    Label(LabelArgs),
    Toy(ToyArgs),
    Bench(BenchArgs),
    Boundary(BoundaryArgs),
}

impl Invocation {
    pub fn run(self) -> Result<(), CliError> {
        match self {
            Invocation::Label(a) => label(a),
            Invocation::Toy(a) => toy(a),
            Invocation::Bench(a) => bench(a),
            Invocation::Boundary(a) => boundary(a),
        }
    }

    /// Point every output of a manifest-stored invocation into `dir`.
    pub fn relocate(self, dir: &Path) -> Self {
        let inside = |p: PathBuf| dir.join(file_name(&p));
        match self {
            Invocation::Label(a) => Invocation::Label(LabelArgs { out: inside(a.out), ..a }),
            Invocation::Toy(a) => Invocation::Toy(ToyArgs {
                out_dir: dir.to_path_buf(),
                ..a
            }),
            Invocation::Bench(a) => Invocation::Bench(BenchArgs { out: inside(a.out), ..a }),
            Invocation::Boundary(a) => Invocation::Boundary(BoundaryArgs { out: inside(a.out), ..a }),
        }
    }
}

fn delimiter_byte(c: char) -> Result<u8, CliError> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| CliError::usage(format!("delimiter must be a single ASCII character, got {c:?}")))
}

fn read_csv(path: &Path, delim: u8, header: bool) -> Result<Dataset, CliError> {
    load_csv(path, delim, header).map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, e: densdiff::Error) -> CliError {
    match CliError::from(e) {
        CliError::Input(m) => CliError::input(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn check_prior(name: &str, p: f64) -> Result<(), CliError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must lie strictly between 0 and 1, got {p}")))
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelArgs {
    /// CSV samples of X_p.
    #[arg(long)]
    pub xp: PathBuf,
    /// CSV samples of X_p'.
    #[arg(long)]
    pub xq: PathBuf,
    /// dsdd, lsdd, kde, km or sc.
    #[arg(long)]
    pub method: String,
    /// Fixed kernel width (skips bandwidth selection).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Fixed regularization (skips its selection).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Label file; diagnostics, model and manifest are written next to it.
    #[arg(long, default_value = "labels.txt")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = densdiff::eval::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = densdiff::basis::DEFAULT_MAX_CENTERS)]
    pub max_centers: usize,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Skip a header row in the CSV inputs.
    #[arg(long)]
    pub header: bool,
    /// Standardize with the pooled mean and deviation before fitting.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Serialize)]
struct LabelDiagnostics<'a> {
    method: &'a str,
    n_p: usize,
    n_q: usize,
    hyperparams: &'a std::collections::BTreeMap<String, f64>,
    diagnostics: &'a std::collections::BTreeMap<String, f64>,
}

fn label(args: LabelArgs) -> Result<(), CliError> {
    let method: Method = args.method.parse().map_err(|_| {
        CliError::usage(format!("unknown method {:?} (expected dsdd, lsdd, kde, km or sc)", args.method))
    })?;
    let delim = delimiter_byte(args.delimiter)?;
    let xp = read_csv(&args.xp, delim, args.header)?;
    let xq = read_csv(&args.xq, delim, args.header)?;
    let (xp, xq) = if args.standardize {
        standardize_pair(&xp, &xq)?
    } else {
        (xp, xq)
    };
    let settings = MethodSettings {
        folds: args.folds,
        max_centers: args.max_centers,
        sigma: args.sigma,
        lambda: args.lambda,
        ..MethodSettings::default()
    };
    let result = run_method(method, &xp, &xq, &settings, args.seed)?;

    ensure_parent(&args.out)?;
    let mut text = String::new();
    for y in &result.labels_p {
        text.push_str(&format!("{y}\n"));
    }
    text.push_str("---\n");
    for y in &result.labels_q {
        text.push_str(&format!("{y}\n"));
    }
    write_text(&args.out, &text)?;
    let mut outputs = vec![file_name(&args.out)];

    let diag_path = sibling(&args.out, "diagnostics.json");
    let diag = LabelDiagnostics {
        method: &result.method,
        n_p: xp.n(),
        n_q: xq.n(),
        hyperparams: &result.hyperparams,
        diagnostics: &result.diagnostics,
    };
    write_text(&diag_path, &to_json_exact(&diag)?)?;
    outputs.push(file_name(&diag_path));
    if let Some(model) = &result.model {
        let model_path = sibling(&args.out, "model.json");
        write_text(&model_path, &model.to_json()?)?;
        outputs.push(file_name(&model_path));
    }

    let inputs = digest_inputs(&[("xp", &args.xp), ("xq", &args.xq)])?;
    let manifest_path = sibling(&args.out, "manifest.json");
    let seed = Some(args.seed);
    let stored = LabelArgs {
        out: PathBuf::from(file_name(&args.out)),
        ..args
    };
    manifest(Invocation::Label(stored), seed, inputs, outputs).write(&manifest_path)
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
    #[value(name = "2")]
    #[serde(rename = "2")]
    Two,
    #[value(name = "hinge")]
    #[serde(rename = "hinge")]
    Hinge,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyArgs {
    #[arg(long, value_enum)]
    pub problem: Problem,
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 30)]
    pub nq: usize,
    /// p(y=+1) of X_p (ignored for the hinge example).
    #[arg(long, default_value_t = 0.3)]
    pub prior_p: f64,
    /// p'(y=+1) of X_p' (ignored for the hinge example).
    #[arg(long, default_value_t = 0.7)]
    pub prior_q: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn write_pair(dir: &Path, prefix: &str, xp: &LabeledDataset<f64>, xq: &LabeledDataset<f64>) -> Result<Vec<String>, CliError> {
    let names = [
        format!("{prefix}xp.csv"),
        format!("{prefix}xq.csv"),
        format!("{prefix}labels_p.txt"),
        format!("{prefix}labels_q.txt"),
    ];
    write_csv(&xp.samples, dir.join(&names[0]))?;
    write_csv(&xq.samples, dir.join(&names[1]))?;
    write_labels(&xp.labels, dir.join(&names[2]))?;
    write_labels(&xq.labels, dir.join(&names[3]))?;
    Ok(names.to_vec())
}

fn toy(args: ToyArgs) -> Result<(), CliError> {
    check_prior("prior-p", args.prior_p)?;
    check_prior("prior-q", args.prior_q)?;
    if args.n == 0 || args.nq == 0 {
        return Err(CliError::usage("--n and --nq must be positive"));
    }
    ensure_dir(&args.out_dir)?;
    let outputs = match args.problem {
        Problem::One | Problem::Two => {
            let spec = if args.problem == Problem::One { toy1_spec() } else { toy2_spec() };
            let xp = sample_mixture(&spec, args.n, args.prior_p, args.seed)?;
            let xq = sample_mixture(&spec, args.nq, args.prior_q, args.seed.wrapping_add(1))?;
            write_pair(&args.out_dir, "", &xp, &xq)?
        }
        Problem::Hinge => {
            let (sp, sq) = uniform_strip_pair(args.n, args.nq, false, args.seed)?;
            let (op, oq) = uniform_strip_pair(args.n, args.nq, true, args.seed)?;
            let mut names = write_pair(&args.out_dir, "separated_", &sp, &sq)?;
            names.extend(write_pair(&args.out_dir, "overlapping_", &op, &oq)?);
            names
        }
    };
    let path = args.out_dir.join("manifest.json");
    let seed = Some(args.seed);
    let stored = ToyArgs {
        out_dir: PathBuf::from("."),
        ..args
    };
    manifest(Invocation::Toy(stored), seed, Vec::new(), outputs).write(&path)
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchArgs {
    /// JSON experiment configuration; excludes the inline experiment flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated subset of dsdd,lsdd,kde,km,sc.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub prior_p: Option<f64>,
    #[arg(long)]
    pub prior_q: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub nq: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Synthetic source: toy problem 1 or 2 (default 1).
    #[arg(long, value_enum, conflicts_with_all = ["mixture", "data"])]
    pub problem: Option<Problem>,
    /// Synthetic source: a mixture specification in JSON.
    #[arg(long, conflicts_with = "data")]
    pub mixture: Option<PathBuf>,
    /// Finite labeled source: CSV samples (needs --labels).
    #[arg(long, requires = "labels")]
    pub data: Option<PathBuf>,
    /// One ±1 label per line for --data.
    #[arg(long, requires = "data")]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub header: bool,
    /// Result table JSON; the manifest is written next to it.
    #[arg(long, default_value = "bench.json")]
    pub out: PathBuf,
}

const INLINE_FLAGS: [&str; 8] = ["methods", "prior-p", "prior-q", "n", "nq", "trials", "seed", "folds"];

fn parse_methods(list: &str) -> Result<Vec<Method>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<Method>()
                .map_err(|_| CliError::usage(format!("unknown method {s:?} (expected dsdd, lsdd, kde, km or sc)")))
        })
        .collect()
}

/// Turn the flags into a validated configuration, filling defaults into
/// `args` so the manifest records them.
fn resolve_bench(args: &mut BenchArgs) -> Result<ExperimentConfig, CliError> {
    if let Some(path) = &args.config {
        let inline = [
            args.methods.is_some(),
            args.prior_p.is_some(),
            args.prior_q.is_some(),
            args.n.is_some(),
            args.nq.is_some(),
            args.trials.is_some(),
            args.seed.is_some(),
            args.folds.is_some(),
        ];
        if let Some(i) = inline.iter().position(|&set| set) {
            return Err(CliError::usage(format!("--{} cannot be combined with --config", INLINE_FLAGS[i])));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::input(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
        config
            .validate()
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        return Ok(config);
    }
    let methods = args.methods.get_or_insert_with(|| "dsdd,lsdd,kde,km,sc".into()).clone();
    let mut config = ExperimentConfig::new(
        parse_methods(&methods)?,
        (*args.prior_p.get_or_insert(0.2), *args.prior_q.get_or_insert(0.8)),
        (*args.n.get_or_insert(40), *args.nq.get_or_insert(40)),
        *args.trials.get_or_insert(20),
        *args.seed.get_or_insert(0),
    );
    config.settings.folds = *args.folds.get_or_insert(densdiff::eval::DEFAULT_FOLDS);
    config.validate()?;
    Ok(config)
}

fn bench(mut args: BenchArgs) -> Result<(), CliError> {
    let config = resolve_bench(&mut args)?;
    let delim = delimiter_byte(args.delimiter)?;
    let mut inputs: Vec<(&str, &Path)> = Vec::new();
    if let Some(p) = &args.config {
        inputs.push(("config", p));
    }
    let labeled;
    let spec;
    let source = if let (Some(data), Some(labels)) = (&args.data, &args.labels) {
        inputs.push(("data", data));
        inputs.push(("labels", labels));
        labeled = LabeledDataset::new(
            read_csv(data, delim, args.header)?,
            load_labels(labels).map_err(|e| with_path(labels, e))?,
        )?;
        Source::Labeled(&labeled)
    } else {
        spec = if let Some(path) = &args.mixture {
            inputs.push(("mixture", path));
            let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize::<_, MixtureSpec>(de)
                .map_err(|e| CliError::input(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?
        } else if *args.problem.get_or_insert(Problem::One) == Problem::Two {
            toy2_spec()
        } else if args.problem == Some(Problem::Hinge) {
            return Err(CliError::usage("--problem hinge is not a benchmark source (use 1 or 2)"));
        } else {
            toy1_spec()
        };
        Source::Mixture(&spec)
    };
    let digests = digest_inputs(&inputs)?;
    let table = run_benchmark(&config, source)?;

    ensure_parent(&args.out)?;
    write_text(&args.out, &table.to_json()?)?;
    let text = table.to_text();
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| CliError::input(format!("cannot write to stdout: {e}")))?;
    let manifest_path = sibling(&args.out, "manifest.json");
    let outputs = vec![file_name(&args.out)];
    let stored = BenchArgs {
        out: PathBuf::from(file_name(&args.out)),
        ..args
    };
    manifest(Invocation::Bench(stored), Some(config.seed), digests, outputs).write(&manifest_path)
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryArgs {
    /// Model JSON written by `label`.
    #[arg(long)]
    pub model: PathBuf,
    /// xmin,xmax,ymin,ymax,steps
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value = "boundary.csv")]
    pub out: PathBuf,
}

struct Grid {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    steps: usize,
}

fn parse_grid(text: &str) -> Result<Grid, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::usage(format!("--grid expects xmin,xmax,ymin,ymax,steps, got {text:?}"));
    if parts.len() != 5 {
        return Err(bad());
    }
    let v: Vec<f64> = parts[..4]
        .iter()
        .map(|p| p.parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(bad)?;
    let steps: usize = parts[4].parse().map_err(|_| bad())?;
    if steps == 0 || v[0] > v[1] || v[2] > v[3] {
        return Err(bad());
    }
    Ok(Grid {
        xmin: v[0],
        xmax: v[1],
        ymin: v[2],
        ymax: v[3],
        steps,
    })
}

fn axis(lo: f64, hi: f64, steps: usize, k: usize) -> f64 {
    if steps == 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (steps - 1) as f64
    }
}

fn boundary(args: BoundaryArgs) -> Result<(), CliError> {
    let grid = parse_grid(&args.grid)?;
    let text = fs::read_to_string(&args.model)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.model.display())))?;
    let doc = ModelDocument::from_json(&text).map_err(|e| with_path(&args.model, e))?;
    let (basis, coef): (GaussianBasis, Vec<f64>) = doc.basis_and_coefficients()?;
    if basis.dim() != 2 {
        return Err(CliError::usage(format!(
            "decision boundaries need a 2-dimensional model, this one has d = {}",
            basis.dim()
        )));
    }
    let mut out = String::from("x1,x2,g,sign\n");
    for i in 0..grid.steps {
        let x1 = axis(grid.xmin, grid.xmax, grid.steps, i);
        for j in 0..grid.steps {
            let x2 = axis(grid.ymin, grid.ymax, grid.steps, j);
            let g: f64 = basis.features(&[x1, x2]).iter().zip(&coef).map(|(f, a)| f * a).sum();
            out.push_str(&format!("{x1},{x2},{g},{}\n", sign_label(g)));
        }
    }
    ensure_parent(&args.out)?;
    write_text(&args.out, &out)?;
    let inputs = digest_inputs(&[("model", &args.model)])?;
    let manifest_path = sibling(&args.out, "manifest.json");
    let outputs = vec![file_name(&args.out)];
    let stored = BoundaryArgs {
        out: PathBuf::from(file_name(&args.out)),
        ..args
    };
    manifest(Invocation::Boundary(stored), None, inputs, outputs).write(&manifest_path)
}

fn manifest(
    invocation: Invocation,
    seed: Option<u64>,
    inputs: Vec<crate::manifest::InputDigest>,
    outputs: Vec<String>,
) -> RunManifest {
    RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        invocation,
        seed,
        inputs,
        outputs,
    }
}

/// Rerun a manifest with its outputs redirected into `out_dir`.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let manifest = RunManifest::read(manifest_path)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        return Err(CliError::input(format!(
            "manifest was written by version {}, this is {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        )));
    }
    manifest.verify_inputs()?;
    ensure_dir(out_dir)?;
    manifest.invocation.relocate(out_dir).run()
}
