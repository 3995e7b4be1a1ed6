//! Subcommand drivers behind the `riesz-rpo` binary.
//!
//! Exit codes: 0 success, 1 check or solve failure, 2 usage or config error,
//! 3 I/O error.

pub mod config;
pub mod results;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::design::RandomisationDesign;
use crate::functionals::ContrastFunctional;
use crate::montecarlo::{
    run_oracle_suite, run_records, summarise, with_pool, OracleConfig, RepRecord, SimConfig,
    SimReport,
};
use crate::representer::{BasisSet, FittedRepresenter, GramMethod};
use crate::Error;
use config::GridConfig;
use results::{fmt_g6, parse_csv, rows_from_reports, summary, write_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const SEED_ENV: &str = "RIESZ_RPO_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(
    name = "riesz-rpo",
    version,
    about = "Riesz-representer estimators and their Monte Carlo experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment grid and write results.csv plus manifest.json.
    Simulate(SimulateArgs),
    /// Brute-force checks of unbiasedness, inverse degree and representer identities.
    Oracle(OracleArgs),
    /// Fit a representer by Gram-matrix moment matching.
    Representer(RepresenterArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub threads: usize,
    /// Override a config key: `key=value` or `section.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Also write per-replication records to records.csv.
    #[arg(long)]
    pub records: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 6)]
    pub max_n: usize,
    #[arg(long, default_value_t = 100)]
    pub worlds: usize,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Graphs per inverse-degree grid point.
    #[arg(long, default_value_t = 1_000_000)]
    pub graphs: usize,
    /// Worlds for the FPO/RPO averaging check.
    #[arg(long, default_value_t = 10_000)]
    pub rpo_worlds: usize,
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct RepresenterArgs {
    #[arg(long)]
    pub n: usize,
    /// `bernoulli:P`.
    #[arg(long, default_value = "bernoulli:0.5")]
    pub design: String,
    /// `constant`, `indicator:K`, `poly:D` or comma-separated monomials such as `1,z0,z0*!z1`.
    #[arg(long, default_value = "indicator:0")]
    pub basis: String,
    /// `unit:K` (own-treatment effect) or `global:K` (all treated vs none).
    #[arg(long, default_value = "unit:0")]
    pub contrast: String,
    /// `exact` or `mc:S`.
    #[arg(long, default_value = "exact")]
    pub method: String,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Keep only the first m basis functions.
    #[arg(long, value_name = "M")]
    pub truncate: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: m.into(),
        }
    }
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
    fn failure(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: m.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularGram { .. } => EXIT_FAILURE,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let res = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Representer(a) => cmd_representer(&a),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Flag,
    Config,
    Env,
    Default,
}

/// `--seed`, then the config file, then `RIESZ_RPO_SEED`, then the built-in default.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<(u64, SeedSource), CliError> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Some(s) = config {
        return Ok((s, SeedSource::Config));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| (s, SeedSource::Env))
            .map_err(|_| CliError::usage(format!("{SEED_ENV}=`{v}` is not a u64"))),
        Err(_) => Ok((DEFAULT_SEED, SeedSource::Default)),
    }
}

#[derive(Debug, Serialize)]
struct GridEntry {
    dgp: String,
    n: usize,
    d: f64,
    mode: String,
    reps: usize,
    convention: String,
    centring: String,
    results: String,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    config_path: String,
    config_hash: String,
    master_seed: u64,
    seed_source: SeedSource,
    threads: usize,
    started_at: String,
    finished_at: String,
    results: String,
    records: Option<String>,
    grid: Vec<GridEntry>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn records_csv(configs: &[SimConfig], records: &[Vec<RepRecord>]) -> String {
    let mut s = String::from("dgp,n,d,mode,rep,tau_hat,sigma2_hat,tau_target,covered,degenerate\n");
    for (cfg, recs) in configs.iter().zip(records) {
        for (r, rec) in recs.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{r},{:e},{:e},{:e},{},{}\n",
                cfg.dgp,
                cfg.n,
                fmt_g6(cfg.d),
                cfg.mode,
                rec.tau_hat,
                rec.sigma2_hat,
                rec.tau_target,
                rec.covered as u8,
                rec.degenerate as u8
            ));
        }
    }
    s
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let started_at = now();
    let text = fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let mut grid = GridConfig::parse(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", a.config.display())))?;
    for s in &a.set {
        grid.set(s)
            .map_err(|e| CliError::usage(format!("--set: {e}")))?;
    }
    let file_seed = grid
        .seed()
        .map_err(|e| CliError::usage(format!("{}: {e}", a.config.display())))?;
    let (seed, seed_source) = resolve_seed(a.seed, file_seed)?;
    let configs = grid
        .expand(seed)
        .map_err(|e| CliError::usage(format!("{}: {e}", a.config.display())))?;

    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let results_path = a.out.join("results.csv");
    let records_path = a.out.join("records.csv");
    let manifest_path = a.out.join("manifest.json");

    let total = configs.len();
    let mut reports: Vec<SimReport> = Vec::with_capacity(total);
    let mut all_records = Vec::new();
    for (k, cfg) in configs.iter().enumerate() {
        if !a.quiet {
            eprintln!(
                "[{}/{total}] {} n={} d={} {} reps={}",
                k + 1,
                cfg.dgp,
                cfg.n,
                fmt_g6(cfg.d),
                cfg.mode,
                cfg.reps
            );
        }
        let recs = with_pool(a.threads, || run_records(cfg))?;
        reports.push(summarise(cfg, &recs));
        if a.records {
            all_records.push(recs);
        }
    }

    let csv = write_csv(&rows_from_reports(&reports));
    write_file(&results_path, &csv)?;
    if a.records {
        write_file(&records_path, &records_csv(&configs, &all_records))?;
    }
    // Printed from the written text so that re-parsing the file reproduces it.
    let rows = parse_csv(&csv).map_err(CliError::failure)?;
    print!("{}", summary(&rows));

    let results = results_path.display().to_string();
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_path: a.config.display().to_string(),
        config_hash: grid.hash(),
        master_seed: seed,
        seed_source,
        threads: a.threads,
        started_at,
        finished_at: now(),
        results: results.clone(),
        records: a.records.then(|| records_path.display().to_string()),
        grid: configs
            .iter()
            .map(|c| GridEntry {
                dgp: c.dgp.to_string(),
                n: c.n,
                d: c.d,
                mode: c.mode.to_string(),
                reps: c.reps,
                convention: c.convention.to_string(),
                centring: c.centring.to_string(),
                results: results.clone(),
            })
            .collect(),
    };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::failure(e.to_string()))?;
    write_file(&manifest_path, &(json + "\n"))?;
    Ok(())
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<(), CliError> {
    if a.worlds == 0 {
        return Err(CliError::usage("--worlds must be at least 1"));
    }
    let (seed, _) = resolve_seed(a.seed, None)?;
    let cfg = OracleConfig {
        degree_graphs: a.graphs,
        rpo_worlds: a.rpo_worlds,
        ..OracleConfig::new(a.max_n, a.worlds, seed)
    };
    let report = with_pool(a.threads, || run_oracle_suite(&cfg))?;
    for c in &report.checks {
        println!("{c}");
    }
    let worst = report
        .checks
        .iter()
        .filter(|c| c.tolerance <= 1e-10)
        .map(|c| c.discrepancy)
        .fold(0.0, f64::max);
    println!("worst enumeration discrepancy {worst:.3e}");
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::failure(format!(
            "oracle checks failed: {}",
            failed.join(", ")
        )))
    }
}

fn parse_design(spec: &str) -> Result<RandomisationDesign, CliError> {
    let p = spec
        .strip_prefix("bernoulli:")
        .and_then(|p| p.trim().parse::<f64>().ok())
        .ok_or_else(|| CliError::usage(format!("bad design `{spec}` (expected bernoulli:P)")))?;
    Ok(RandomisationDesign::bernoulli(p)?)
}

fn parse_contrast(spec: &str, n: usize) -> Result<ContrastFunctional, CliError> {
    let bad = || {
        CliError::usage(format!(
            "bad contrast `{spec}` (expected unit:K or global:K)"
        ))
    };
    let (kind, k) = spec.split_once(':').ok_or_else(bad)?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    if k >= n {
        return Err(CliError::usage(format!(
            "contrast unit {k} out of range for n = {n}"
        )));
    }
    match kind {
        "unit" => Ok(ContrastFunctional::unit_effect(k)),
        "global" => Ok(ContrastFunctional::global_effect(k)),
        _ => Err(bad()),
    }
}

fn parse_method(spec: &str, seed: u64) -> Result<GramMethod, CliError> {
    if spec == "exact" {
        return Ok(GramMethod::Exact);
    }
    spec.strip_prefix("mc:")
        .and_then(|s| s.trim().parse::<usize>().ok())
        .map(|draws| GramMethod::monte_carlo(draws, seed))
        .ok_or_else(|| CliError::usage(format!("bad method `{spec}` (expected exact or mc:S)")))
}

pub fn cmd_representer(a: &RepresenterArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let design = parse_design(&a.design)?;
    let functional = parse_contrast(&a.contrast, a.n)?;
    let (seed, _) = resolve_seed(a.seed, None)?;
    let method = parse_method(&a.method, seed)?;
    let mut basis = BasisSet::parse(&a.basis, a.n)?;
    if let Some(m) = a.truncate {
        basis = basis.truncate(m)?;
    }
    let fit = match FittedRepresenter::fit(basis, &functional, &design, a.n, method, a.ridge) {
        Ok(f) => f,
        Err(Error::SingularGram {
            ridge,
            min_eigenvalue,
            max_eigenvalue,
        }) => {
            let cond = if min_eigenvalue > 0.0 {
                max_eigenvalue / min_eigenvalue
            } else {
                f64::INFINITY
            };
            return Err(CliError::failure(format!(
                "singular Gram matrix after ridge {ridge:e}: eigenvalues in [{min_eigenvalue:e}, {max_eigenvalue:e}], condition number {cond:e}"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    if fit.target_is_zero() {
        eprintln!("warning: target vector is zero; the contrast has no representer in the span of this basis");
    }
    if fit.coefficients.ridge_used > a.ridge {
        eprintln!(
            "warning: ridge raised to {:e} to factorise the Gram matrix",
            fit.coefficients.ridge_used
        );
    }
    let table = (a.n <= crate::functionals::EXACT_CAP).then_some((&design, a.n));
    match &a.out {
        Some(path) => fit
            .write_text_file(path, table)
            .map_err(|e| CliError::io(path, e))?,
        None => {
            let stdout = std::io::stdout();
            fit.write_text(&mut stdout.lock(), table)
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}
