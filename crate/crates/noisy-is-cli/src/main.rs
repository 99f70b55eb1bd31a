//! Command-line front end for the noisy importance sampling library.
//!
//! Subcommands:
//!
//! * `estimate`: replicated noisy runs for one noise model and proposal,
//!   reporting Z_hat and the integral estimates for f(x) = x.
//! * `variance`: theoretical variance table over a noise-level grid.
//! * `experiment`: theoretical vs empirical variance-ratio curves.
//! * `proposal-curve`: plot-ready optimal proposal densities.
//!
//! Every run echoes its resolved configuration to stderr and writes data to
//! stdout or `--out`. Output bytes are reproducible given `--seed` and do
//! not depend on `--threads`. Usage errors exit 2, runtime errors exit 1.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use noisy_is::error::Result as LibResult;
use noisy_is::estimators::{pilot_i_estimate, replicate, ReplicationSummary};
use noisy_is::experiments::{
    emit_proposal_curves, run_gaussian_experiment, run_uniform_experiment, ExperimentConfig,
    ExperimentKind, DEFAULT_GRID_NODES,
};
use noisy_is::io::{
    proposal_curves_csv, ratio_curve_csv, replication_rows_csv, variance_table_csv,
    VarianceTableRow,
};
use noisy_is::models::{
    make_bernoulli_noise, make_folded_gaussian_noise, make_latent_variable_noise,
    make_multiplicative_lognormal_noise, NoiseModel, VectorFunction,
};
use noisy_is::proposals::{
    build_proposal_from_shape, optimal_proposal_for_self, optimal_proposal_for_std,
    optimal_proposal_for_z, Proposal,
};
use noisy_is::rng::{substream_seed, RngStream};
use noisy_is::variance_analytics::{variance_report, QuadratureSpec};
use noisy_is::with_thread_limit;

/// Substream index reserved for the pilot run of `--proposal optimal-self`;
/// replication seeds are consecutive from the root seed, so a fixed split
/// keeps the pilot independent of every replication.
const PILOT_SUBSTREAM: u64 = 0x70696c6f74; // "pilot"

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(
    name = "noisy-is",
    version,
    about = "Importance sampling with noisy integrand evaluations",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run replicated noisy importance sampling and report the estimates.
    Estimate(EstimateArgs),
    /// Tabulate theoretical variances over a noise-level grid.
    Variance(VarianceArgs),
    /// Reproduce a variance-ratio experiment (theory and simulation).
    Experiment(ExperimentArgs),
    /// Emit optimal proposal densities on a plotting grid.
    ProposalCurve(ProposalCurveArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Uniform,
    Gaussian,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Uniform => ExperimentKind::Uniform,
            KindArg::Gaussian => ExperimentKind::Gaussian,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum NoiseArg {
    Bernoulli,
    FoldedGaussian,
    Multiplicative,
    Latent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ProposalArg {
    Target,
    OptimalZ,
    OptimalStd,
    OptimalSelf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SharedArgs {
    /// Root seed for all randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    /// JSON config file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GridArgs {
    /// Benchmark target family.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Comma-separated noise levels, all > 0.
    #[arg(
        long = "A",
        value_delimiter = ',',
        allow_negative_numbers = true,
        action = ArgAction::Set
    )]
    a_levels: Option<Vec<f64>>,
    /// Samples per run.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Replications per arm.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Lower interval bound (uniform kind).
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Upper interval bound (uniform kind).
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Truncation half-width (gaussian kind).
    #[arg(long)]
    trunc: Option<f64>,
    /// Proposal grid size.
    #[arg(long)]
    grid_nodes: Option<usize>,
    /// Quadrature node count.
    #[arg(long)]
    quad_nodes: Option<usize>,
    /// Use the printed closed-form optimal shape instead of the generic one.
    #[arg(long, action = ArgAction::SetTrue)]
    paper_closed_form: Option<bool>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    shared: SharedArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct ProposalCurveArgs {
    #[command(flatten)]
    shared: SharedArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct VarianceArgs {
    #[command(flatten)]
    shared: SharedArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Proposal whose variance fills the v_q column.
    #[arg(long, value_enum)]
    proposal: Option<ProposalArg>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Benchmark target family.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Lower interval bound (uniform kind).
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Upper interval bound (uniform kind).
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Truncation half-width (gaussian kind).
    #[arg(long)]
    trunc: Option<f64>,
    /// Noise model.
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    /// Bernoulli ceiling p_max.
    #[arg(long)]
    p_max: Option<f64>,
    /// Noise scale for folded-gaussian (additive) or multiplicative noise.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Latent-variable log-variance gamma^2.
    #[arg(long, allow_negative_numbers = true)]
    gamma_sq: Option<f64>,
    /// Latent-variable auxiliary sample count.
    #[arg(long = "R")]
    r: Option<u32>,
    /// Proposal construction.
    #[arg(long, value_enum)]
    proposal: Option<ProposalArg>,
    /// True normalizing constant; enables the standard (non-self-normalized)
    /// estimate columns.
    #[arg(long)]
    z_bar: Option<f64>,
    /// Samples per run.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Replications.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Proposal grid size.
    #[arg(long)]
    grid_nodes: Option<usize>,
}

/// Optional JSON config file; any subset of the flag names, flags win.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    kind: Option<KindArg>,
    a: Option<f64>,
    b: Option<f64>,
    trunc: Option<f64>,
    #[serde(rename = "A")]
    a_levels: Option<Vec<f64>>,
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "M")]
    m: Option<usize>,
    seed: Option<u64>,
    #[serde(alias = "grid-nodes")]
    grid_nodes: Option<usize>,
    #[serde(alias = "quad-nodes")]
    quad_nodes: Option<usize>,
    #[serde(alias = "paper-closed-form")]
    paper_closed_form: Option<bool>,
    format: Option<OutFormat>,
    threads: Option<usize>,
    noise: Option<NoiseArg>,
    #[serde(alias = "p-max")]
    p_max: Option<f64>,
    sigma: Option<f64>,
    #[serde(alias = "gamma-sq")]
    gamma_sq: Option<f64>,
    #[serde(rename = "R")]
    r: Option<u32>,
    proposal: Option<ProposalArg>,
    #[serde(alias = "z-bar")]
    z_bar: Option<f64>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<noisy_is::error::Error> for CliError {
    fn from(e: noisy_is::error::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Estimate(args) => run_estimate(args),
        Cmd::Variance(args) => run_variance(args),
        Cmd::Experiment(args) => run_experiment_cmd(args),
        Cmd::ProposalCurve(args) => run_proposal_curve(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_file_config(path: Option<&PathBuf>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
}

/// Resolved computation shared by variance, experiment, and proposal-curve.
struct GridRun {
    cfg: ExperimentConfig,
    format: OutFormat,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

fn resolve_grid(shared: &SharedArgs, grid: &GridArgs) -> CliResult<GridRun> {
    let file = load_file_config(shared.config.as_ref())?;
    let Some(kind) = grid.kind.or(file.kind) else {
        return usage("missing --kind {uniform, gaussian}");
    };
    let kind: ExperimentKind = kind.into();
    let base = match kind {
        ExperimentKind::Uniform => ExperimentConfig::uniform(),
        ExperimentKind::Gaussian => ExperimentConfig::gaussian(),
    };
    let cfg = ExperimentConfig {
        kind,
        a: grid.a.or(file.a).unwrap_or(base.a),
        b: grid.b.or(file.b).unwrap_or(base.b),
        trunc: grid.trunc.or(file.trunc).unwrap_or(base.trunc),
        a_grid: grid
            .a_levels
            .clone()
            .or(file.a_levels)
            .unwrap_or(base.a_grid),
        n: grid.n.or(file.n).unwrap_or(base.n),
        m: grid.m.or(file.m).unwrap_or(base.m),
        base_seed: shared.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        grid_nodes: grid.grid_nodes.or(file.grid_nodes).unwrap_or(base.grid_nodes),
        quad_nodes: grid.quad_nodes.or(file.quad_nodes).unwrap_or(base.quad_nodes),
        paper_closed_form: grid
            .paper_closed_form
            .or(file.paper_closed_form)
            .unwrap_or(false),
    };
    validate_grid_usage(&cfg)?;
    let threads = shared.threads.or(file.threads);
    if threads == Some(0) {
        return usage("--threads must be >= 1");
    }
    Ok(GridRun {
        cfg,
        format: shared.format.or(file.format).unwrap_or(OutFormat::Csv),
        out: shared.out.clone(),
        threads,
    })
}

/// Bad parameter values are usage errors (exit 2), not runtime errors, so
/// check here what the library would reject later.
fn validate_grid_usage(cfg: &ExperimentConfig) -> CliResult<()> {
    if !(cfg.a.is_finite() && cfg.b.is_finite() && cfg.a < cfg.b) {
        return usage(format!("bounds must satisfy a < b, got a = {}, b = {}", cfg.a, cfg.b));
    }
    if cfg.kind == ExperimentKind::Uniform && cfg.a <= 0.0 {
        return usage(format!("the uniform target needs a > 0, got a = {}", cfg.a));
    }
    if cfg.kind == ExperimentKind::Gaussian && !(cfg.trunc.is_finite() && cfg.trunc > 0.0) {
        return usage(format!("--trunc must be > 0, got {}", cfg.trunc));
    }
    if cfg.a_grid.is_empty() {
        return usage("--A needs at least one noise level");
    }
    for &a in &cfg.a_grid {
        if !(a.is_finite() && a > 0.0) {
            return usage(format!("noise level A must be > 0, got {a}"));
        }
    }
    if cfg.n < 2 {
        return usage(format!("--N must be >= 2, got {}", cfg.n));
    }
    if cfg.m < 2 {
        return usage(format!("--M must be >= 2, got {}", cfg.m));
    }
    Ok(())
}

fn echo_config(subcommand: &str, format: OutFormat, config: &impl Serialize) {
    // stderr, so machine-readable stdout stays clean
    let line = serde_json::json!({
        "subcommand": subcommand,
        "format": format,
        "config": config,
    });
    eprintln!("config: {line}");
}

fn write_output(out: Option<&PathBuf>, content: &str) -> CliResult<()> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => std::fs::write(path, content).map_err(|e| {
            CliError::Runtime(format!("io: failed to write {}: {e}", path.display()))
        }),
    }
}

fn to_json_doc(value: &impl Serialize) -> CliResult<String> {
    let mut doc = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("io: JSON encoding failed: {e}")))?;
    doc.push('\n');
    Ok(doc)
}

fn run_threaded<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> LibResult<T> + Send,
) -> CliResult<T> {
    Ok(with_thread_limit(threads, job)??)
}

fn run_experiment_cmd(args: ExperimentArgs) -> CliResult<()> {
    let run = resolve_grid(&args.shared, &args.grid)?;
    echo_config("experiment", run.format, &run.cfg);
    let cfg = run.cfg.clone();
    let curve = run_threaded(run.threads, move || match cfg.kind {
        ExperimentKind::Uniform => run_uniform_experiment(&cfg),
        ExperimentKind::Gaussian => run_gaussian_experiment(&cfg),
    })?;
    if let Some(err) = curve.truncation_mass_error {
        if err > 1e-8 {
            eprintln!("warning: truncation mass error {err:.3e} exceeds 1e-8");
        }
    }
    let content = match run.format {
        OutFormat::Csv => ratio_curve_csv(&curve),
        OutFormat::Json => to_json_doc(&curve)?,
    };
    write_output(run.out.as_ref(), &content)
}

fn run_proposal_curve(args: ProposalCurveArgs) -> CliResult<()> {
    let run = resolve_grid(&args.shared, &args.grid)?;
    echo_config("proposal-curve", run.format, &run.cfg);
    let cfg = run.cfg.clone();
    let curves = run_threaded(run.threads, move || {
        let a_levels = cfg.a_grid.clone();
        emit_proposal_curves(&cfg, &a_levels)
    })?;
    let content = match run.format {
        OutFormat::Csv => proposal_curves_csv(&curves),
        OutFormat::Json => to_json_doc(&curves)?,
    };
    write_output(run.out.as_ref(), &content)
}

#[derive(Serialize)]
struct VarianceDoc {
    config: ExperimentConfig,
    proposal: ProposalArg,
    rows: Vec<VarianceTableRow>,
}

fn run_variance(args: VarianceArgs) -> CliResult<()> {
    let run = resolve_grid(&args.shared, &args.grid)?;
    let file = load_file_config(args.shared.config.as_ref())?;
    let proposal = args.proposal.or(file.proposal).unwrap_or(ProposalArg::OptimalZ);
    if !matches!(proposal, ProposalArg::Target | ProposalArg::OptimalZ) {
        return usage("variance supports --proposal target or optimal-z only");
    }
    let cfg = run.cfg.clone();
    echo_config("variance", run.format, &cfg);
    let rows = run_threaded(run.threads, move || {
        let (lo, hi) = cfg.support();
        let spec = QuadratureSpec::simpson(lo, hi).with_nodes(cfg.quad_nodes);
        let mut rows = Vec::with_capacity(cfg.a_grid.len());
        for &a_level in &cfg.a_grid {
            let noise = cfg.noise_for(a_level)?;
            let q = match proposal {
                ProposalArg::Target => cfg.target_proposal()?,
                _ => cfg.optimal_arm(&noise, a_level)?,
            };
            let report = variance_report(&noise, &q, cfg.n, &spec)?;
            rows.push(VarianceTableRow {
                experiment: cfg.kind.to_string(),
                a_level,
                report,
            });
        }
        Ok(rows)
    })?;
    let content = match run.format {
        OutFormat::Csv => variance_table_csv(&rows),
        OutFormat::Json => to_json_doc(&VarianceDoc {
            config: run.cfg,
            proposal,
            rows,
        })?,
    };
    write_output(run.out.as_ref(), &content)
}

/// Every estimate parameter after defaulting, echoed and embedded in JSON
/// output.
#[derive(Clone, Serialize)]
struct ResolvedEstimate {
    kind: KindArg,
    a: f64,
    b: f64,
    trunc: f64,
    noise: NoiseArg,
    p_max: f64,
    sigma: f64,
    gamma_sq: f64,
    #[serde(rename = "R")]
    r: u32,
    proposal: ProposalArg,
    z_bar: Option<f64>,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    seed: u64,
    grid_nodes: usize,
}

fn resolve_estimate(args: &EstimateArgs) -> CliResult<(ResolvedEstimate, OutFormat, Option<usize>)> {
    let file = load_file_config(args.shared.config.as_ref())?;
    let Some(kind) = args.kind.or(file.kind) else {
        return usage("missing --kind {uniform, gaussian}");
    };
    let Some(noise) = args.noise.or(file.noise) else {
        return usage("missing --noise {bernoulli, folded-gaussian, multiplicative, latent}");
    };
    let resolved = ResolvedEstimate {
        kind,
        a: args.a.or(file.a).unwrap_or(0.1),
        b: args.b.or(file.b).unwrap_or(10.0),
        trunc: args.trunc.or(file.trunc).unwrap_or(12.0),
        noise,
        p_max: args.p_max.or(file.p_max).unwrap_or(1.0),
        sigma: args.sigma.or(file.sigma).unwrap_or(0.5),
        gamma_sq: args.gamma_sq.or(file.gamma_sq).unwrap_or(1.0),
        r: args.r.or(file.r).unwrap_or(1),
        proposal: args.proposal.or(file.proposal).unwrap_or(ProposalArg::Target),
        z_bar: args.z_bar.or(file.z_bar),
        n: args.n.or(file.n).unwrap_or(1000),
        m: args.m.or(file.m).unwrap_or(100),
        seed: args.shared.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        grid_nodes: args.grid_nodes.or(file.grid_nodes).unwrap_or(DEFAULT_GRID_NODES),
    };
    if !(resolved.a.is_finite() && resolved.b.is_finite() && resolved.a < resolved.b) {
        return usage(format!(
            "bounds must satisfy a < b, got a = {}, b = {}",
            resolved.a, resolved.b
        ));
    }
    if resolved.kind == KindArg::Uniform && resolved.a <= 0.0 {
        return usage(format!("the uniform target needs a > 0, got a = {}", resolved.a));
    }
    if resolved.kind == KindArg::Gaussian && !(resolved.trunc.is_finite() && resolved.trunc > 0.0)
    {
        return usage(format!("--trunc must be > 0, got {}", resolved.trunc));
    }
    match noise {
        NoiseArg::Bernoulli if !(resolved.p_max.is_finite() && resolved.p_max > 0.0) => {
            return usage(format!("--p-max must be > 0, got {}", resolved.p_max));
        }
        NoiseArg::FoldedGaussian if !(resolved.sigma.is_finite() && resolved.sigma > 0.0) => {
            return usage(format!("--sigma must be > 0, got {}", resolved.sigma));
        }
        NoiseArg::Multiplicative if !(resolved.sigma.is_finite() && resolved.sigma >= 0.0) => {
            return usage(format!("--sigma must be >= 0, got {}", resolved.sigma));
        }
        NoiseArg::Latent if !(resolved.gamma_sq.is_finite() && resolved.gamma_sq >= 0.0) => {
            return usage(format!("--gamma-sq must be >= 0, got {}", resolved.gamma_sq));
        }
        NoiseArg::Latent if resolved.r < 1 => {
            return usage("--R must be >= 1");
        }
        _ => {}
    }
    if let Some(z) = resolved.z_bar {
        if !(z.is_finite() && z > 0.0) {
            return usage(format!("--z-bar must be > 0, got {z}"));
        }
    }
    if resolved.n < 1 {
        return usage("--N must be >= 1");
    }
    if resolved.m < 2 {
        return usage(format!("--M must be >= 2, got {}", resolved.m));
    }
    let threads = args.shared.threads.or(file.threads);
    if threads == Some(0) {
        return usage("--threads must be >= 1");
    }
    Ok((
        resolved,
        args.shared.format.or(file.format).unwrap_or(OutFormat::Csv),
        threads,
    ))
}

#[derive(Serialize)]
struct EstimateDoc {
    config: ResolvedEstimate,
    summary: ReplicationSummary,
}

fn run_estimate(args: EstimateArgs) -> CliResult<()> {
    let (resolved, format, threads) = resolve_estimate(&args)?;
    echo_config("estimate", format, &resolved);
    let out = args.shared.out.clone();
    let r = resolved.clone();
    let summary = run_threaded(threads, move || estimate_job(&r))?;
    let content = match format {
        OutFormat::Csv => replication_rows_csv(&summary),
        OutFormat::Json => to_json_doc(&EstimateDoc {
            config: resolved,
            summary,
        })?,
    };
    write_output(out.as_ref(), &content)
}

fn estimate_job(r: &ResolvedEstimate) -> LibResult<ReplicationSummary> {
    // reuse the benchmark targets; A-grid and M are placeholders since only
    // the target and support are taken from the experiment config
    let cfg = ExperimentConfig {
        kind: r.kind.into(),
        a: r.a,
        b: r.b,
        trunc: r.trunc,
        ..match r.kind {
            KindArg::Uniform => ExperimentConfig::uniform(),
            KindArg::Gaussian => ExperimentConfig::gaussian(),
        }
    };
    let target = cfg.target()?;
    let support = cfg.support();
    let noise: Box<dyn NoiseModel> = match r.noise {
        NoiseArg::Bernoulli => Box::new(make_bernoulli_noise(target, r.p_max)?),
        NoiseArg::FoldedGaussian => Box::new(make_folded_gaussian_noise(target, r.sigma)?),
        NoiseArg::Multiplicative => {
            let s = r.sigma;
            Box::new(make_multiplicative_lognormal_noise(target, move |_| s))
        }
        NoiseArg::Latent => {
            let g = r.gamma_sq;
            Box::new(make_latent_variable_noise(target, move |_| g, r.r)?)
        }
    };
    let f = VectorFunction::new(1, |x| vec![x])?;
    let proposal: Proposal = match r.proposal {
        ProposalArg::Target => {
            let shape = cfg.target()?;
            build_proposal_from_shape(move |x| shape.eval(x), support, r.grid_nodes)?
                .with_label("target")
        }
        ProposalArg::OptimalZ => optimal_proposal_for_z(noise.as_ref(), support, r.grid_nodes)?,
        ProposalArg::OptimalStd => {
            optimal_proposal_for_std(noise.as_ref(), &f, support, r.grid_nodes)?
        }
        ProposalArg::OptimalSelf => {
            let mut pilot_stream = RngStream::from_seed(substream_seed(r.seed, PILOT_SUBSTREAM));
            let i_pilot =
                pilot_i_estimate(noise.as_ref(), &f, support, r.grid_nodes, r.n, &mut pilot_stream)?;
            optimal_proposal_for_self(noise.as_ref(), &f, &i_pilot, support, r.grid_nodes)?
        }
    };
    replicate(noise.as_ref(), &proposal, Some(&f), r.z_bar, r.n, r.m, r.seed)
}
