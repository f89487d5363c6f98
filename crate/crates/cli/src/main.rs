mod error;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};
use jmmd::data::{bread, Dataset, Schema};
use jmmd::glm::{diagnostics, Family, Link};
use jmmd::joint::{fit_joint, DispersionMetric, DispersionWeights, JointOptions};
use jmmd::moments::{unconditional_variance, NoiseDistribution, NoiseMoments};
use jmmd::selection::{candidate_pools, render_trace, select_joint, InitialTest, SelectionConfig};
use jmmd::sim::run_study;
use jmmd::terms::{simplex_centroid, simplex_lattice, MixtureOrder, NoiseOrder, TermSet};
use report::{FitReport, MomentsReport, PointMoments, SelectReport, StudyFile, SCHEMA_VERSION};

/// Joint mean and dispersion GLMs for mixture experiments.
#[derive(Parser)]
#[command(name = "jmmd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a simplex design as CSV.
    Design {
        #[arg(value_enum)]
        kind: DesignKind,
        /// Number of mixture components.
        components: usize,
        /// Lattice parameter m (lattice designs only).
        m: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a joint model with given mean and dispersion terms.
    Fit(FitArgs),
    /// Select mean and dispersion terms.
    Select(SelectArgs),
    /// Unconditional mean and variance over random noise variables.
    Moments(MomentsArgs),
    /// Run a Monte Carlo selection study.
    Simulate(SimulateArgs),
    /// Per-observation diagnostics of a fitted model.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKind {
    Lattice,
    Centroid,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file, or `bread` for the bundled data set.
    #[arg(long, default_value = "bread")]
    data: String,
    /// Response column.
    #[arg(long, default_value = "y")]
    response: String,
    /// Tolerance on the mixture sum.
    #[arg(long, default_value_t = 1e-6)]
    sum_tolerance: f64,
}

impl DataArgs {
    fn load(&self) -> CliResult<Dataset> {
        if self.data == "bread" {
            return Ok(bread());
        }
        let schema = Schema { response: self.response.clone(), sum_tolerance: self.sum_tolerance, ..Schema::default() };
        Ok(Dataset::load_csv(&self.data, &schema)?)
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "normal")]
    family: String,
    #[arg(long, default_value = "identity")]
    link: String,
    /// Dispersion prior weights: unit or leverage.
    #[arg(long, default_value = "unit")]
    disp_weights: String,
}

impl ModelArgs {
    fn family(&self) -> CliResult<Family> {
        Ok(self.family.parse()?)
    }

    fn link(&self) -> CliResult<Link> {
        Ok(self.link.parse()?)
    }

    fn disp_weights(&self) -> CliResult<DispersionWeights> {
        match self.disp_weights.as_str() {
            "unit" => Ok(DispersionWeights::Unit),
            "leverage" => Ok(DispersionWeights::Leverage),
            other => Err(CliError::Usage(format!("unknown dispersion weights `{other}`"))),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Mean terms, e.g. "x1,x2,x3,x1*z2".
    #[arg(long, required_unless_present = "spec")]
    mean_terms: Option<String>,
    /// Dispersion terms, e.g. "x1,x2,x3,x2*x3".
    #[arg(long, required_unless_present = "spec")]
    disp_terms: Option<String>,
    /// Reuse terms and options from an earlier fit JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Maximum outer iterations of the joint loop.
    #[arg(long, default_value_t = 25)]
    max_outer: usize,
    /// Tolerance on the change in Q+.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// One mean fit, one dispersion fit, one mean refit.
    #[arg(long)]
    single_pass: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// eaic, r2m:1, r2m:sqrtn or r2m:logn.
    #[arg(long, default_value = "r2m:sqrtn")]
    mean_criterion: String,
    /// aicc, r2d:1, r2d:sqrtn or r2d:logn.
    #[arg(long, default_value = "r2d:1")]
    disp_criterion: String,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    /// linear, quadratic, special-cubic or cubic.
    #[arg(long, default_value = "special-cubic")]
    mixture_order: String,
    /// constant, linear, interaction or quadratic.
    #[arg(long, default_value = "interaction")]
    noise_order: String,
    /// Explicit mean candidate pool (overrides the orders).
    #[arg(long)]
    mean_pool: Option<String>,
    /// Explicit dispersion candidate pool.
    #[arg(long)]
    disp_pool: Option<String>,
    /// R2d distance: squared or gamma.
    #[arg(long, default_value = "squared")]
    disp_metric: String,
    #[arg(long)]
    skip_initial_test: bool,
    #[arg(long)]
    max_terms: Option<usize>,
    /// JSON trace and fit.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table-style text rendering of the trace.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    /// Fit JSON written by `fit` or `select`.
    #[arg(long)]
    fit: PathBuf,
    /// Noise means, one per process variable.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    noise_mean: Vec<f64>,
    /// Noise variances, one per process variable.
    #[arg(long, value_delimiter = ',')]
    noise_var: Vec<f64>,
    /// Mixture point, e.g. --at 1,0,0; repeatable.
    #[arg(long, required = true)]
    at: Vec<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study configuration (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV report path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Fit JSON written by `fit` or `select`.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    component: ComponentArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for residual, Q-Q and histogram SVGs.
    #[arg(long)]
    svg_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComponentArg {
    Mean,
    Dispersion,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Relative output paths land under $JMMD_OUT_DIR when it is set.
fn output_path(p: &Path) -> PathBuf {
    match std::env::var_os("JMMD_OUT_DIR") {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            let p = output_path(p);
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn cmd_design(kind: DesignKind, a: usize, m: Option<usize>, out: Option<&PathBuf>) -> CliResult<()> {
    let design = match kind {
        DesignKind::Centroid => simplex_centroid(a)?,
        DesignKind::Lattice => {
            let m = m.ok_or_else(|| CliError::Usage("lattice designs need m".into()))?;
            simplex_lattice(a, m)?
        }
    };
    let mut s = (1..=a).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in &design.mixture {
        s.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    emit(out, &s)
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let data = args.data.load()?;
    let (mean_terms, disp_terms, family, link, opts) = match &args.spec {
        Some(path) => {
            let prev: FitReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            (prev.mean_terms, prev.disp_terms, prev.family, prev.link, prev.options)
        }
        None => {
            let mean: TermSet = args.mean_terms.as_deref().unwrap_or_default().parse()?;
            let disp: TermSet = args.disp_terms.as_deref().unwrap_or_default().parse()?;
            let mut opts = if args.single_pass { JointOptions::single_pass() } else { JointOptions::default() };
            if !args.single_pass {
                opts.max_outer = args.max_outer;
            }
            opts.tol = args.tol;
            opts.disp_weights = args.model.disp_weights()?;
            (mean, disp, args.model.family()?, args.model.link()?, opts)
        }
    };
    let joint = fit_joint(&mean_terms, &disp_terms, &data, family, link, &opts)?;
    let report = FitReport::new(&data, family, link, opts, joint)?;
    emit(args.out.as_ref(), &to_json(&report)?)
}

fn cmd_select(args: &SelectArgs) -> CliResult<()> {
    let data = args.data.load()?;
    let mixture: MixtureOrder = args.mixture_order.parse()?;
    let noise: NoiseOrder = args.noise_order.parse()?;
    let pools = candidate_pools(&data, mixture, noise)?;
    let mean_pool = match &args.mean_pool {
        Some(s) => s.parse()?,
        None => pools.mean,
    };
    let disp_pool = match &args.disp_pool {
        Some(s) => s.parse()?,
        None => pools.disp,
    };
    let mut cfg = SelectionConfig::new(mean_pool, disp_pool);
    cfg.criteria.mean = args.mean_criterion.parse()?;
    cfg.criteria.disp = args.disp_criterion.parse()?;
    cfg.alpha = args.alpha;
    cfg.family = args.model.family()?;
    cfg.link = args.model.link()?;
    cfg.disp_weights = args.model.disp_weights()?;
    cfg.disp_metric = match args.disp_metric.as_str() {
        "squared" => DispersionMetric::Squared,
        "gamma" => DispersionMetric::GammaArc,
        other => return Err(CliError::Usage(format!("unknown dispersion metric `{other}`"))),
    };
    if args.skip_initial_test {
        cfg.initial_test = InitialTest::Skip;
    }
    cfg.max_terms = args.max_terms;

    let outcome = select_joint(&data, &cfg)?;
    let text = render_trace(&outcome.trace);
    if let Some(p) = &args.text {
        emit(Some(p), &text)?;
    }
    let mut notes = pools.notes;
    notes.extend(outcome.trace.notes.iter().cloned());
    let fit = FitReport::new(&data, cfg.family, cfg.link, JointOptions::single_pass(), outcome.joint.clone())?;
    let report = SelectReport {
        schema_version: SCHEMA_VERSION,
        kind: "select".into(),
        iterations: outcome.iterations(),
        constant_dispersion: outcome.constant_dispersion,
        notes,
        config: cfg,
        trace: outcome.trace,
        fit,
    };
    match &args.out {
        Some(p) => emit(Some(p), &to_json(&report)?),
        None if args.text.is_none() => emit(None, &text),
        None => Ok(()),
    }
}

fn parse_point(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad mixture point `{s}`"))))
        .collect()
}

fn cmd_moments(args: &MomentsArgs) -> CliResult<()> {
    let fit = report::load_fit(&args.fit)?;
    if args.noise_mean.len() != args.noise_var.len() {
        return Err(CliError::Usage("--noise-mean and --noise-var need the same length".into()));
    }
    let noise = NoiseDistribution::new(
        args.noise_mean
            .iter()
            .zip(&args.noise_var)
            .map(|(m, v)| NoiseMoments { mean: *m, variance: *v })
            .collect(),
    )?;
    let model = unconditional_variance(&fit.mean_coefficients()?, &fit.disp_coefficients()?, fit.family, fit.link, &noise)?;
    let mut points = Vec::new();
    for at in &args.at {
        let x = parse_point(at)?;
        if (x.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(CliError::Usage(format!("mixture point `{at}` does not sum to 1")));
        }
        points.push(PointMoments { mean: model.mean_at(&x)?, variance: model.variance_at(&x)?, x });
    }
    let text = match args.format {
        Format::Json => to_json(&MomentsReport { schema_version: SCHEMA_VERSION, kind: "moments".into(), model, noise, points })?,
        Format::Csv => {
            let a = points.first().map(|p| p.x.len()).unwrap_or(0);
            let mut s = (1..=a).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
            s.push_str(",mean,variance\n");
            for p in &points {
                let xs: Vec<String> = p.x.iter().map(|v| v.to_string()).collect();
                s.push_str(&format!("{},{},{}\n", xs.join(","), p.mean, p.variance));
            }
            s
        }
    };
    emit(args.out.as_ref(), &text)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let file = match &args.config {
        Some(p) => StudyFile::load(p)?,
        None => StudyFile::default(),
    };
    let mut cfg = file.to_config()?;
    if let Some(n) = args.n_mc {
        cfg.n_mc = n;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    let report = run_study(&cfg, args.jobs)?;
    let csv = report.to_csv();
    if let Some(p) = &args.json {
        emit(Some(p), &to_json(&report::StudyReport::new(report.clone()))?)?;
    }
    match &args.csv {
        Some(p) => emit(Some(p), &csv),
        None if args.json.is_none() => emit(None, &csv),
        None => Ok(()),
    }
}

fn cmd_diagnose(args: &DiagnoseArgs) -> CliResult<()> {
    let fit = report::load_fit(&args.fit)?;
    let glm = match args.component {
        ComponentArg::Mean => &fit.joint.mean,
        ComponentArg::Dispersion => &fit.joint.dispersion,
    };
    let diag = diagnostics(glm);
    let mut sorted: Vec<f64> = diag.iter().map(|d| d.std_deviance_residual).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = diag.len();
    let theo: Vec<f64> = (0..n).map(|i| jmmd::special::normal_quantile((i as f64 + 0.5) / n as f64)).collect();

    let mut s = String::from("index,fitted,leverage,deviance_residual,std_deviance_residual,cooks_distance,qq_theoretical,qq_sample\n");
    for (k, d) in diag.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            d.index + 1,
            d.fitted,
            d.leverage,
            d.deviance_residual,
            d.std_deviance_residual,
            d.cooks_distance,
            theo[k],
            sorted[k]
        ));
    }
    if let Some(dir) = &args.svg_dir {
        let dir = output_path(dir);
        std::fs::create_dir_all(&dir)?;
        let fitted: Vec<f64> = diag.iter().map(|d| d.fitted).collect();
        let resid: Vec<f64> = diag.iter().map(|d| d.std_deviance_residual).collect();
        std::fs::write(
            dir.join("residuals.svg"),
            svg::scatter("Residuals vs fitted", "fitted", "standardized deviance residual", &fitted, &resid, Some((0.0, 0.0))),
        )?;
        std::fs::write(
            dir.join("qq.svg"),
            svg::scatter("Normal Q-Q", "theoretical quantile", "sample quantile", &theo, &sorted, Some((0.0, 1.0))),
        )?;
        std::fs::write(dir.join("histogram.svg"), svg::histogram("Residuals", "standardized deviance residual", &resid, 12))?;
    }
    emit(args.out.as_ref(), &s)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Design { kind, components, m, out } => cmd_design(kind, components, m, out.as_ref()),
        Command::Fit(a) => cmd_fit(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Moments(a) => cmd_moments(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
