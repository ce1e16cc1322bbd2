//! Command-line front end: estimate indices, evaluate closed-form oracles and
//! compare the two, writing long-format CSV.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gosa_core::oracle::{example1_indices, example2_components, gaussian_ml_indices, ishigami_sobol};
use gosa_core::sampling::GENERATOR;
use gosa_core::{
    estimate_index_sweep, ContrastSpec64, EstimatorConfig, GosaError, Grid64, IndexEstimate64, InnerMode,
    LikelihoodFamily64, ModelSpec64,
};
use thiserror::Error;

pub const MODELS: &[&str] = &["example1", "example2", "gaussian-linear", "ishigami"];
pub const CONTRASTS: &[&str] =
    &["mean", "median", "quantile", "excess", "prob-tail", "quantile-tail", "kde", "basis", "ml"];
pub const COMPARE_PAIRS: &[(&str, &str)] = &[
    ("example1", "quantile"),
    ("example1", "mean"),
    ("example2", "excess"),
    ("example2", "mean"),
    ("gaussian-linear", "ml"),
    ("gaussian-linear", "mean"),
    ("ishigami", "mean"),
];

pub const BASE_COLUMNS: &[&str] = &[
    "run_id",
    "model",
    "contrast",
    "param",
    "subset",
    "n1",
    "n2",
    "seed",
    "B",
    "estimate",
    "stderr",
    "numerator",
    "denominator",
    "degenerate_flag",
    "range_flag",
    "mode",
    "grid",
    "rng",
];
pub const COMPARE_COLUMNS: &[&str] = &["oracle", "abs_error", "z_score"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    /// Argument parsing failure, already formatted by the parser.
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] GosaError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 1,
            CliError::Core(GosaError::Contract(_) | GosaError::Domain(_)) => 1,
            CliError::Core(GosaError::Degenerate(_)) => 2,
            CliError::Core(_) | CliError::Io(_) | CliError::Csv(_) => 3,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "gosa", version, about = "Goal-oriented sensitivity analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo estimates of contrast indices.
    Estimate(CommonArgs),
    /// Closed-form index values for the built-in examples.
    Oracle(OracleArgs),
    /// Estimates joined with the closed-form values.
    Compare(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// example1 | example2 | gaussian-linear | ishigami
    #[arg(long)]
    pub model: Option<String>,
    /// Rate of the second input of example2.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Coefficient of the first input of gaussian-linear.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Append an inert standard uniform input.
    #[arg(long)]
    pub dummy: bool,
    /// mean | median | quantile | excess | prob-tail | quantile-tail | kde | basis | ml
    #[arg(long)]
    pub contrast: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// lo:hi:count
    #[arg(long = "alpha-grid", allow_hyphen_values = true)]
    pub alpha_grid: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// lo:hi:count
    #[arg(long = "t-grid", allow_hyphen_values = true)]
    pub t_grid: Option<String>,
    /// Quadrature grid lo:hi:count for prob-tail, quantile-tail and kde.
    #[arg(long = "grid-spec", allow_hyphen_values = true)]
    pub grid_spec: Option<String>,
    /// Kernel bandwidth for kde.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Number of basis functions for basis.
    #[arg(long)]
    pub order: Option<usize>,
    /// Support lo:hi for basis.
    #[arg(long, allow_hyphen_values = true)]
    pub support: Option<String>,
    /// Upper end of the parameter domain for ml.
    #[arg(long = "theta-max")]
    pub theta_max: Option<f64>,
    /// Use the constrained parameter domain [0, theta-max] for ml.
    #[arg(long)]
    pub constrained: bool,
    /// 1-based variable indices, comma-joined for a group; repeatable.
    #[arg(long)]
    pub subset: Vec<String>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Pick-freeze pairing of inner and outer samples.
    #[arg(long)]
    pub paired: bool,
    /// Independent inner sample for every outer point.
    #[arg(long = "fresh-inner")]
    pub fresh_inner: bool,
    /// Exit with status 2 when any row is degenerate.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Plain-text key=value file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OracleArgs {
    /// 1 | 2 | gaussian-ml
    #[arg(long)]
    pub example: Option<String>,
    #[arg(long)]
    pub ishigami: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelChoice {
    pub name: String,
    pub a: f64,
    pub theta: f64,
    pub dummy: bool,
}

impl ModelChoice {
    pub fn build(&self) -> Result<ModelSpec64, CliError> {
        let base = match self.name.as_str() {
            "example1" => ModelSpec64::example1(),
            "example2" => ModelSpec64::example2(self.a)?,
            "gaussian-linear" => ModelSpec64::gaussian_linear(self.theta)?,
            "ishigami" => ModelSpec64::ishigami(),
            other => return Err(usage(format!("unknown model '{other}'; valid: {}", MODELS.join(", ")))),
        };
        Ok(if self.dummy { ModelSpec64::dummy_augmented(&base) } else { base })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastChoice {
    pub name: String,
    /// Swept parameter values (alpha, t, ...); a single `None` for parameter-free contrasts.
    pub params: Vec<Option<f64>>,
    pub grid: Option<(f64, f64, usize)>,
    pub bandwidth: Option<f64>,
    pub order: usize,
    pub support: Option<(f64, f64)>,
    pub theta_max: f64,
    pub constrained: bool,
}

impl ContrastChoice {
    pub fn build(&self, param: Option<f64>) -> Result<ContrastSpec64, CliError> {
        let need = |what: &str| usage(format!("contrast '{}' needs {what}", self.name));
        let grid = || -> Result<Grid64, CliError> {
            let (lo, hi, n) = self.grid.ok_or_else(|| need("--grid-spec lo:hi:count"))?;
            Ok(Grid64::uniform(lo, hi, n)?)
        };
        Ok(match self.name.as_str() {
            "mean" => ContrastSpec64::Mean,
            "median" => ContrastSpec64::Median,
            "quantile" => ContrastSpec64::quantile(param.ok_or_else(|| need("--alpha or --alpha-grid"))?)?,
            "excess" => ContrastSpec64::excess(param.ok_or_else(|| need("--t or --t-grid"))?)?,
            "prob-tail" => ContrastSpec64::prob_tail(param.ok_or_else(|| need("--t or --t-grid"))?, grid()?)?,
            "quantile-tail" => {
                ContrastSpec64::quantile_tail(param.ok_or_else(|| need("--alpha or --alpha-grid"))?, grid()?)?
            }
            "kde" => ContrastSpec64::kernel_density(param.ok_or_else(|| need("--bandwidth"))?, grid()?)?,
            "basis" => {
                let support = self.support.ok_or_else(|| need("--support lo:hi"))?;
                ContrastSpec64::basis_density(self.order, support)?
            }
            "ml" => {
                let family = if self.constrained {
                    LikelihoodFamily64::gaussian_linear_constrained(self.theta_max)?
                } else {
                    LikelihoodFamily64::gaussian_linear(self.theta_max)?
                };
                ContrastSpec64::max_likelihood(family)
            }
            other => return Err(usage(format!("unknown contrast '{other}'; valid: {}", CONTRASTS.join(", ")))),
        })
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub contrast: ContrastChoice,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
    pub replicates: usize,
    /// 0-based variable groups.
    pub subsets: Vec<Vec<usize>>,
    pub mode: InnerMode,
    pub strict: bool,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        let model = ModelChoice {
            name: args.model.clone().ok_or_else(|| usage(format!("--model is required; valid: {}", MODELS.join(", "))))?,
            a: args.a.unwrap_or(1.0),
            theta: args.theta.unwrap_or(1.0),
            dummy: args.dummy,
        };
        let dim = model.build()?.dim();
        let name = args.contrast.clone().unwrap_or_else(|| "mean".to_string());
        let params = resolve_params(&name, args)?;
        let grid = args.grid_spec.as_deref().map(parse_grid).transpose()?;
        let support = args
            .support
            .as_deref()
            .map(|s| match parse_floats(s, "--support")?.as_slice() {
                [lo, hi] => Ok((*lo, *hi)),
                _ => Err(usage(format!("--support expects lo:hi, got '{s}'"))),
            })
            .transpose()?;
        let contrast = ContrastChoice {
            name,
            params,
            grid,
            bandwidth: args.bandwidth,
            order: args.order.unwrap_or(8),
            support,
            theta_max: args.theta_max.unwrap_or(10.0),
            constrained: args.constrained,
        };
        for p in &contrast.params {
            contrast.build(*p)?;
        }
        let subsets = if args.subset.is_empty() {
            (0..dim).map(|i| vec![i]).collect()
        } else {
            args.subset.iter().map(|s| parse_subset(s, dim)).collect::<Result<_, _>>()?
        };
        let mode = match (args.paired, args.fresh_inner) {
            (true, true) => return Err(usage("--paired and --fresh-inner are mutually exclusive")),
            (true, false) => InnerMode::Paired,
            (false, true) => InnerMode::Fresh,
            (false, false) => InnerMode::Shared,
        };
        let n1 = args.n1.unwrap_or(1000);
        let cfg = RunConfig {
            model,
            contrast,
            n1,
            n2: args.n2.unwrap_or(n1),
            seed: args.seed.unwrap_or(0),
            replicates: args.replicates.unwrap_or(10),
            subsets,
            mode,
            strict: args.strict,
            out: args.out.clone(),
            threads: args.threads,
        };
        for s in &cfg.subsets {
            cfg.estimator_config(s.clone()).validate(dim)?;
        }
        Ok(cfg)
    }

    pub fn estimator_config(&self, subset: Vec<usize>) -> EstimatorConfig {
        EstimatorConfig::new(self.n1, self.n2, self.seed, subset)
            .with_replicates(self.replicates)
            .with_mode(self.mode)
    }

    /// Canonical text identifying everything that determines the output values.
    pub fn canonical(&self, command: &str) -> String {
        let mut s = String::new();
        let m = &self.model;
        let c = &self.contrast;
        let _ = write!(s, "{command};model={};a={:e};theta={:e};dummy={}", m.name, m.a, m.theta, m.dummy);
        let _ = write!(s, ";contrast={};params={:?};grid={:?}", c.name, c.params, c.grid);
        let _ = write!(s, ";bandwidth={:?};order={};support={:?}", c.bandwidth, c.order, c.support);
        let _ = write!(s, ";theta_max={:e};constrained={}", c.theta_max, c.constrained);
        let _ = write!(s, ";n1={};n2={};seed={};B={}", self.n1, self.n2, self.seed, self.replicates);
        let _ = write!(s, ";subsets={:?};mode={};rng={GENERATOR}", self.subsets, self.mode.as_str());
        s
    }

    pub fn run_id(&self, command: &str) -> String {
        format!("{:016x}", fnv1a(self.canonical(command).as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn resolve_params(contrast: &str, args: &CommonArgs) -> Result<Vec<Option<f64>>, CliError> {
    let sweep = |single: Option<f64>, grid: &Option<String>, flag: &str| -> Result<Vec<Option<f64>>, CliError> {
        match (single, grid) {
            (Some(_), Some(_)) => Err(usage(format!("give either --{flag} or --{flag}-grid, not both"))),
            (Some(v), None) => Ok(vec![Some(v)]),
            (None, Some(g)) => {
                let (lo, hi, n) = parse_grid(g)?;
                Ok(linspace(lo, hi, n).into_iter().map(Some).collect())
            }
            (None, None) => Ok(vec![None]),
        }
    };
    match contrast {
        "quantile" | "quantile-tail" => sweep(args.alpha, &args.alpha_grid, "alpha"),
        "excess" | "prob-tail" => sweep(args.t, &args.t_grid, "t"),
        "kde" => Ok(vec![args.bandwidth]),
        _ => Ok(vec![None]),
    }
}

/// `count` evenly spaced values from `lo` to `hi` inclusive, rounded to 12
/// significant digits so decimal grids give decimal points.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let span = hi - lo;
    (0..count)
        .map(|i| lo + span * i as f64 / (count - 1) as f64)
        .map(|x| format!("{x:.11e}").parse().unwrap_or(x))
        .collect()
}

fn parse_floats(s: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    s.split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| usage(format!("{flag}: cannot parse '{p}' as a number"))))
        .collect()
}

/// Parses `lo:hi:count`.
pub fn parse_grid(s: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("expected lo:hi:count, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && hi <= lo) {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

/// Parses a comma-joined list of 1-based indices into a sorted 0-based group.
pub fn parse_subset(s: &str, dim: usize) -> Result<Vec<usize>, CliError> {
    let mut set = BTreeSet::new();
    for p in s.split(',') {
        let i: usize = p.trim().parse().map_err(|_| usage(format!("--subset: bad index '{p}'")))?;
        if i == 0 || i > dim {
            return Err(usage(format!("--subset: index {i} outside 1..={dim}")));
        }
        if !set.insert(i - 1) {
            return Err(usage(format!("--subset: index {i} repeated in '{s}'")));
        }
    }
    Ok(set.into_iter().collect())
}

fn subset_label(s: &[usize]) -> String {
    s.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// One output row before formatting.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub model: String,
    pub contrast: String,
    pub param: Option<f64>,
    pub subset: Vec<usize>,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub numerator: Option<f64>,
    pub denominator: Option<f64>,
    pub degenerate: bool,
    pub out_of_range: bool,
    pub grid: String,
    pub oracle: Option<f64>,
}

/// Rows plus the provenance shared by all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub run_id: String,
    pub sizes: Option<(usize, usize, u64, usize)>,
    pub mode: String,
    pub compare: bool,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn any_degenerate(&self) -> bool {
        self.rows.iter().any(|r| r.degenerate)
    }

    pub fn header(&self) -> Vec<&'static str> {
        let mut h = BASE_COLUMNS.to_vec();
        if self.compare {
            h.extend_from_slice(COMPARE_COLUMNS);
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for r in &self.rows {
            let (n1, n2, seed, b) = match self.sizes {
                Some((n1, n2, seed, b)) => (n1.to_string(), n2.to_string(), seed.to_string(), b.to_string()),
                None => Default::default(),
            };
            let mut rec = vec![
                self.run_id.clone(),
                r.model.clone(),
                r.contrast.clone(),
                fmt_opt(r.param),
                subset_label(&r.subset),
                n1,
                n2,
                seed,
                b,
                fmt_opt(r.estimate),
                fmt_opt(r.stderr),
                fmt_opt(r.numerator),
                fmt_opt(r.denominator),
                (r.degenerate as u8).to_string(),
                (r.out_of_range as u8).to_string(),
                self.mode.clone(),
                r.grid.clone(),
                GENERATOR.to_string(),
            ];
            if self.compare {
                let err = r.estimate.zip(r.oracle).map(|(e, o)| e - o);
                let z = err.zip(r.stderr).and_then(|(e, s)| (s > 0.0).then(|| e / s));
                rec.push(fmt_opt(r.oracle));
                rec.push(fmt_opt(err.map(f64::abs)));
                rec.push(fmt_opt(z));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    fn sort(&mut self) {
        self.rows.sort_by(|x, y| {
            x.model
                .cmp(&y.model)
                .then(x.param.unwrap_or(f64::NEG_INFINITY).total_cmp(&y.param.unwrap_or(f64::NEG_INFINITY)))
                .then(x.subset.cmp(&y.subset))
        });
    }
}

fn estimate_row(model: &str, contrast: &ContrastSpec64, subset: &[usize], res: gosa_core::Result<IndexEstimate64>) -> Result<Row, CliError> {
    let base = Row {
        model: model.to_string(),
        contrast: contrast.id().to_string(),
        param: contrast.param(),
        subset: subset.to_vec(),
        estimate: None,
        stderr: None,
        numerator: None,
        denominator: None,
        degenerate: false,
        out_of_range: false,
        grid: contrast.discretization(),
        oracle: None,
    };
    match res {
        Ok(e) => Ok(Row {
            estimate: Some(e.value),
            stderr: Some(e.std_error),
            numerator: Some(e.numerator),
            denominator: Some(e.denominator),
            out_of_range: e.out_of_range(),
            ..base
        }),
        Err(err) if err.is_degenerate() => Ok(Row { degenerate: true, ..base }),
        Err(err) => Err(err.into()),
    }
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(usage("--threads must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Monte-Carlo estimates, one row per (subset, contrast parameter).
pub fn cmd_estimate(cfg: &RunConfig) -> Result<Table, CliError> {
    let model = cfg.model.build()?;
    let contrasts: Vec<ContrastSpec64> =
        cfg.contrast.params.iter().map(|&p| cfg.contrast.build(p)).collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(contrasts.len() * cfg.subsets.len());
    with_threads(cfg.threads, || -> Result<(), CliError> {
        for subset in &cfg.subsets {
            let results = estimate_index_sweep(&model, &contrasts, &cfg.estimator_config(subset.clone()))?;
            for (c, r) in contrasts.iter().zip(results) {
                rows.push(estimate_row(model.name(), c, subset, r)?);
            }
        }
        Ok(())
    })??;
    let mut table = Table {
        run_id: cfg.run_id("estimate"),
        sizes: Some((cfg.n1, cfg.n2, cfg.seed, cfg.replicates)),
        mode: cfg.mode.as_str().to_string(),
        compare: false,
        rows,
    };
    table.sort();
    Ok(table)
}

/// Closed-form first-order values for every input of the model, or `None`
/// when the pair has no oracle. A degenerate configuration yields `Err`.
pub fn oracle_values(model: &ModelChoice, contrast: &str, param: Option<f64>) -> Result<Option<Vec<f64>>, CliError> {
    let need = |flag: &str| usage(format!("oracle for {}/{contrast} needs {flag}", model.name));
    let mut values = match (model.name.as_str(), contrast) {
        ("example1", "quantile") => {
            let r = example1_indices(param.ok_or_else(|| need("--alpha"))?)?;
            vec![r.s1, r.s2]
        }
        ("example1", "mean") => vec![0.5, 0.5],
        ("example2", "excess") => {
            let r = example2_components(model.a, param.ok_or_else(|| need("--t"))?)?;
            vec![r.s1, r.s2]
        }
        ("example2", "mean") => {
            let a2 = model.a * model.a;
            vec![a2 / (1.0 + a2), 1.0 / (1.0 + a2)]
        }
        ("gaussian-linear", "ml") => {
            let r = gaussian_ml_indices(model.theta)?;
            vec![r.s1, r.s2]
        }
        ("gaussian-linear", "mean") => {
            let t2 = model.theta * model.theta;
            vec![t2 / (1.0 + t2), 1.0 / (1.0 + t2)]
        }
        ("ishigami", "mean") => ishigami_sobol::<f64>().exact.to_vec(),
        _ => return Ok(None),
    };
    if model.dummy {
        values.push(0.0);
    }
    Ok(Some(values))
}

fn unsupported_pair(model: &str, contrast: &str) -> CliError {
    let pairs: Vec<String> = COMPARE_PAIRS.iter().map(|(m, c)| format!("{m}+{c}")).collect();
    usage(format!("no oracle for {model}+{contrast}; supported pairs: {}", pairs.join(", ")))
}

fn oracle_for(cfg: &RunConfig, param: Option<f64>) -> Result<Result<Vec<f64>, ()>, CliError> {
    match oracle_values(&cfg.model, &cfg.contrast.name, param) {
        Ok(Some(v)) => Ok(Ok(v)),
        Ok(None) => Err(unsupported_pair(&cfg.model.name, &cfg.contrast.name)),
        Err(CliError::Core(e)) if e.is_degenerate() => Ok(Err(())),
        Err(e) => Err(e),
    }
}

/// Closed-form rows in the estimate schema (stderr 0, sample sizes empty).
pub fn cmd_oracle(cfg: &RunConfig) -> Result<Table, CliError> {
    let model = cfg.model.build()?;
    let mut rows = Vec::new();
    for &p in &cfg.contrast.params {
        let contrast = cfg.contrast.build(p)?;
        let values = oracle_for(cfg, p)?;
        for subset in &cfg.subsets {
            if subset.len() != 1 {
                return Err(usage("oracles are first-order: give single-variable --subset values"));
            }
            let mut row = estimate_row(model.name(), &contrast, subset, Err(GosaError::Degenerate(String::new())))?;
            if let Ok(v) = &values {
                row.degenerate = false;
                row.estimate = Some(v[subset[0]]);
                row.stderr = Some(0.0);
                row.out_of_range = !(0.0..=1.0).contains(&v[subset[0]]);
            }
            rows.push(row);
        }
    }
    let mut table = Table { run_id: cfg.run_id("oracle"), sizes: None, mode: "oracle".into(), compare: false, rows };
    table.sort();
    Ok(table)
}

/// Estimates joined with oracle values, with absolute error and z-score.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Table, CliError> {
    if cfg.subsets.iter().any(|s| s.len() != 1) {
        return Err(usage("compare is first-order: give single-variable --subset values"));
    }
    let mut oracles = Vec::new();
    for &p in &cfg.contrast.params {
        oracles.push((p, oracle_for(cfg, p)?));
    }
    let mut table = cmd_estimate(cfg)?;
    for row in &mut table.rows {
        let (_, vals) = oracles.iter().find(|(p, _)| *p == row.param).expect("oracle for every swept parameter");
        row.oracle = vals.as_ref().ok().map(|v| v[row.subset[0]]);
    }
    table.run_id = cfg.run_id("compare");
    table.compare = true;
    Ok(table)
}

/// Merges `key=value` lines from a config file in front of explicit flags.
/// Keys are long flag names; a flag given on the command line replaces the
/// file value (for `subset`, all file entries).
pub fn merge_config_file(text: &str, explicit: &[OsString]) -> Result<Vec<OsString>, CliError> {
    let given: BTreeSet<String> = explicit
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut merged = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "config" {
            return Err(usage("config files cannot include other config files"));
        }
        if given.contains(key) {
            continue;
        }
        match value {
            "true" => merged.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                merged.push(OsString::from(format!("--{key}")));
                merged.push(OsString::from(value));
            }
        }
    }
    Ok(merged)
}

fn oracle_model(args: &OracleArgs) -> Result<CommonArgs, CliError> {
    let mut common = args.common.clone();
    let picked = match (args.example.as_deref(), args.ishigami) {
        (Some(_), true) => return Err(usage("give either --example or --ishigami")),
        (Some("1"), _) => Some(("example1", "quantile")),
        (Some("2"), _) => Some(("example2", "excess")),
        (Some("gaussian-ml"), _) => Some(("gaussian-linear", "ml")),
        (Some(other), _) => return Err(usage(format!("unknown example '{other}'; valid: 1, 2, gaussian-ml"))),
        (None, true) => Some(("ishigami", "mean")),
        (None, false) => None,
    };
    if let Some((m, c)) = picked {
        if common.model.as_deref().is_some_and(|given| given != m) {
            return Err(usage(format!("--model {} conflicts with the selected example", common.model.unwrap())));
        }
        common.model = Some(m.into());
        common.contrast.get_or_insert_with(|| c.into());
    }
    Ok(common)
}

fn emit(table: &Table, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => table.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => table.write_csv(stdout),
    }
}

fn execute(args: Vec<OsString>, stdout: &mut dyn Write) -> Result<bool, CliError> {
    let cli = Cli::try_parse_from(&args).map_err(|e| CliError::Parse(e.to_string()))?;
    let config_path = match &cli.command {
        Command::Estimate(c) | Command::Compare(c) => c.config.clone(),
        Command::Oracle(o) => o.common.config.clone(),
    };
    let cli = match config_path {
        None => cli,
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            let explicit = &args[2.min(args.len())..];
            let mut merged = args[..2.min(args.len())].to_vec();
            merged.extend(merge_config_file(&text, explicit)?);
            merged.extend_from_slice(explicit);
            Cli::try_parse_from(&merged).map_err(|e| CliError::Parse(e.to_string()))?
        }
    };
    let (table, cfg) = match &cli.command {
        Command::Estimate(c) => {
            let cfg = RunConfig::from_args(c)?;
            (cmd_estimate(&cfg)?, cfg)
        }
        Command::Compare(c) => {
            let cfg = RunConfig::from_args(c)?;
            (cmd_compare(&cfg)?, cfg)
        }
        Command::Oracle(o) => {
            let cfg = RunConfig::from_args(&oracle_model(o)?)?;
            (cmd_oracle(&cfg)?, cfg)
        }
    };
    emit(&table, &cfg.out, stdout)?;
    Ok(!(cfg.strict && table.any_degenerate()))
}

/// Runs the command line and returns the process exit status.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Err(e) = Cli::try_parse_from(&args) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = write!(stdout, "{e}");
            return 0;
        }
    }
    match execute(args, stdout) {
        Ok(true) => 0,
        Ok(false) => {
            let _ = writeln!(stderr, "degenerate rows present (--strict)");
            2
        }
        Err(CliError::Parse(msg)) => {
            let _ = write!(stderr, "{msg}");
            1
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_subsets_parse() {
        assert_eq!(parse_grid("0.01:0.99:99").unwrap(), (0.01, 0.99, 99));
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_subset("3,1", 3).unwrap(), vec![0, 2]);
        assert!(parse_subset("0", 3).is_err());
        assert!(parse_subset("1,1", 3).is_err());
        let v = linspace(0.05, 0.95, 19);
        assert_eq!(v.len(), 19);
        assert_eq!(v[18], 0.95);
        assert_eq!(v[9], 0.5);
        assert_eq!(v[1], 0.1);
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn explicit_flags_win_over_file() {
        let explicit: Vec<OsString> = ["--seed", "5"].iter().map(OsString::from).collect();
        let merged = merge_config_file("seed = 1\nn1=20\n# note\npaired=true\n", &explicit).unwrap();
        let merged: Vec<_> = merged.iter().map(|s| s.to_str().unwrap()).collect();
        assert_eq!(merged, ["--n1", "20", "--paired"]);
        assert!(merge_config_file("oops", &[]).is_err());
    }
}
