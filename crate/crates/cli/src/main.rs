use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use markov_gap::bounds::{
    cheeger_exact, cheeger_search, inequality_audit_with, path_bound, AuditConfig, BoundAudit,
    DEFAULT_EPS, ENUMERATION_LIMIT,
};
use markov_gap::empirical::{delta_curve, delta_exact, delta_monte_carlo, theorem1_audit};
use markov_gap::experiments::{
    ensemble_randthm, render_report, scan, Report, ReportFormat, ScanConfig, ScanMethod,
};
use markov_gap::spectral::{normal_gap, weighted_singular_spectrum};
use markov_gap::{ChainSpec, Error, FiniteChain};

#[derive(Parser)]
#[command(name = "markov-gap", version, about = "Spectral gaps and relaxation times of finite Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Chain specification (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Largest n for empirical-average curves and audits.
    #[arg(long, global = true)]
    n_max: Option<u64>,
    /// Accuracy for mixing-time comparisons.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Largest power for the pseudo-spectral gap.
    #[arg(long, global = true)]
    k_max: Option<u32>,
    /// Monte Carlo replicates, search restarts or ensemble size.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Allow slow grid points (7-card deck).
    #[arg(long, global = true)]
    extended: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Singular spectrum, gap and relaxation time.
    Gap,
    /// Worst-case deviation of empirical averages for n = 1..=n-max.
    Delta,
    /// Cheeger constant (exact up to 20 states, local search beyond).
    Cheeger,
    /// Canonical-path congestion and the gap lower bound it gives.
    PathBound,
    /// Every inequality relating the gap to the other quantities.
    Audit,
    /// Gap and relaxation time across a list of N.
    Scan {
        /// Comma-separated N values; overrides "N_list" in the spec.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
    },
    /// Tail fractions of τ for random circulant step sets.
    Ensemble,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    ClosedForm,
    Svd,
}

/// Ensemble configuration file: `{"N": 499, "p": [0.5, 0.5], "L_grid": [1, 2, 4, 8]}`.
/// `k` is optional and defaults to the length of `p` (uniform if `p` is absent).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleConfig {
    #[serde(rename = "N")]
    n: u64,
    k: Option<usize>,
    p: Option<Vec<f64>>,
    #[serde(rename = "L_grid")]
    l_grid: Vec<f64>,
}

type CliResult<T> = Result<T, Error>;

fn read_json(path: &Path) -> CliResult<Value> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn require_spec(cli: &Cli) -> CliResult<&Path> {
    cli.spec
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--spec FILE is required".into()))
}

fn load_chain(cli: &Cli) -> CliResult<FiniteChain> {
    let spec: ChainSpec = serde_json::from_value(read_json(require_spec(cli)?)?)?;
    spec.build()
}

fn require_seed(cli: &Cli, what: &str) -> CliResult<u64> {
    cli.seed
        .ok_or_else(|| Error::InvalidArgument(format!("{what} is randomized; pass --seed")))
}

fn write_output(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit<R: Report + ?Sized>(cli: &Cli, report: &R, default: Format) -> CliResult<()> {
    write_output(cli, &render_report(report, cli.format.unwrap_or(default).into())?)
}

fn emit_value(cli: &Cli, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_output(cli, &text)
}

/// Default `n_max`: enough to see the curve decay, bounded for large `τ`.
fn default_n_max(tau: f64) -> u64 {
    if tau.is_finite() {
        ((50.0 * tau).ceil() as u64).clamp(2, 2000)
    } else {
        200
    }
}

fn run(cli: &Cli) -> CliResult<bool> {
    match &cli.command {
        Command::Gap => {
            let chain = load_chain(cli)?;
            let spectrum = if chain.flags().normal {
                normal_gap(&chain)?
            } else {
                weighted_singular_spectrum(&chain)?
            };
            emit_value(
                cli,
                &json!({
                    "flags": chain.structure_flags(),
                    "gamma": spectrum.gap,
                    "spectrum": spectrum,
                    "states": chain.size(),
                    "tau": spectrum.relaxation,
                }),
            )?;
            Ok(true)
        }
        Command::Delta => {
            let chain = load_chain(cli)?;
            let tau = weighted_singular_spectrum(&chain)?.relaxation.value();
            let n_max = cli.n_max.unwrap_or_else(|| default_n_max(tau));
            let ns: Vec<u64> = (1..=n_max).collect();
            let mut curve = delta_curve(&chain, &ns)?;
            if let Some(reps) = cli.trials {
                let seed = require_seed(cli, "Monte Carlo")?;
                for entry in &mut curve.entries {
                    let (_, g) = delta_exact(&chain, entry.n)?;
                    let est = delta_monte_carlo(&chain, &g, entry.n, reps, seed)?;
                    entry.delta_mc = Some(est.estimate);
                    entry.mc_stderr = Some(est.stderr);
                }
            }
            emit(cli, &curve, Format::Csv)?;
            let audit = theorem1_audit(&chain, n_max)?;
            eprint!("{}", audit.to_table());
            Ok(audit.all_pass())
        }
        Command::Cheeger => {
            let chain = load_chain(cli)?;
            let result = if chain.size() <= ENUMERATION_LIMIT {
                cheeger_exact(&chain)?
            } else {
                let iters = cli.trials.unwrap_or(chain.size() as u64) as usize;
                cheeger_search(&chain, iters, require_seed(cli, "Cheeger search")?)?
            };
            emit_value(cli, &serde_json::to_value(result)?)?;
            Ok(true)
        }
        Command::PathBound => {
            let chain = load_chain(cli)?;
            let bound = path_bound(&chain, None)?;
            let gamma = weighted_singular_spectrum(&chain)?.gap;
            let holds = bound.gap_lower <= gamma + markov_gap::tol::AUDIT_MARGIN;
            emit_value(
                cli,
                &json!({
                    "congestion": bound.congestion,
                    "gamma": gamma,
                    "gap_lower": bound.gap_lower,
                    "holds": holds,
                    "paths": serde_json::to_value(&bound.ensemble)?["paths"],
                }),
            )?;
            Ok(holds)
        }
        Command::Audit => {
            let chain = load_chain(cli)?;
            let config = AuditConfig {
                eps: cli.eps.unwrap_or(DEFAULT_EPS),
                k_max: cli.k_max.unwrap_or(10),
                group_walk: false,
            };
            let mut audit: BoundAudit = inequality_audit_with(&chain, &config)?;
            let tau = weighted_singular_spectrum(&chain)?.relaxation.value();
            audit.extend(theorem1_audit(&chain, cli.n_max.unwrap_or_else(|| default_n_max(tau)))?);
            eprint!("{}", audit.to_table());
            emit(cli, &audit, Format::Json)?;
            Ok(audit.all_pass())
        }
        Command::Scan { n_list, method } => {
            let mut raw = read_json(require_spec(cli)?)?;
            let obj = raw
                .as_object_mut()
                .ok_or_else(|| Error::InvalidArgument("spec must be a JSON object".into()))?;
            let listed: Vec<usize> = match obj.remove("N_list") {
                Some(v) => serde_json::from_value(v)?,
                None => Vec::new(),
            };
            let ns = if n_list.is_empty() { listed } else { n_list.clone() };
            if let Some(&first) = ns.first() {
                obj.entry("N").or_insert(json!(first));
            }
            let template: ChainSpec = serde_json::from_value(raw)?;
            let config = ScanConfig {
                method: match method {
                    Method::Auto => ScanMethod::Auto,
                    Method::ClosedForm => ScanMethod::ClosedForm,
                    Method::Svd => ScanMethod::Svd,
                },
                extended: cli.extended,
            };
            let rows = scan(&template, &ns, config)?;
            emit(cli, rows.as_slice(), Format::Csv)?;
            Ok(true)
        }
        Command::Ensemble => {
            let cfg: EnsembleConfig = serde_json::from_value(read_json(require_spec(cli)?)?)?;
            let probs = match (&cfg.p, cfg.k) {
                (Some(p), Some(k)) if p.len() != k => {
                    return Err(Error::InvalidArgument(format!("k = {k} but {} probabilities", p.len())))
                }
                (Some(p), _) => p.clone(),
                (None, Some(k)) if k > 0 => vec![1.0 / k as f64; k],
                (None, _) => return Err(Error::InvalidArgument("give p or k".into())),
            };
            let trials = cli.trials.unwrap_or(2000);
            let rows = ensemble_randthm(cfg.n, &probs, trials, &cfg.l_grid, require_seed(cli, "ensemble")?)?;
            emit(cli, rows.as_slice(), Format::Csv)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
