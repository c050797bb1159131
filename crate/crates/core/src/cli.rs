//! The `momcp` command line.
//!
//! Exit codes: 0 when the command ran (and, for `test`, did not reject),
//! 2 when `test` rejected the no-change hypothesis, 1 on any error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::error::Error;
use crate::limits::{self, CriticalValueTable, DEFAULT_GRID, DEFAULT_REPLICATIONS, SHIPPED_LEVELS};
use crate::models::{model_by_name, MomentModel};
use crate::montecarlo::{self, run_experiment, ExperimentResult, StudyConfig};
use crate::rng::DEFAULT_SEED;
use crate::zprocess::{analyze, run_test_with, PathAnalysis, TestOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: cannot parse `{text}` as a number")]
    Parse { path: PathBuf, line: usize, text: String },
    #[error("{path}: line {line}: non-finite value `{text}`")]
    NonFinite { path: PathBuf, line: usize, text: String },
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "momcp", version, about = "Method-of-moments change point test")]
pub struct Cli {
    /// Emit a single JSON document instead of the text report.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads for Monte Carlo work (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a data file for a single change in the parameter.
    Test(TestArgs),
    /// Estimate the change location without a decision.
    Detect(DetectArgs),
    /// Simulate critical values of the limit law and write them to a table file.
    Critval(CritvalArgs),
    /// Run a configured simulation study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// One observation per line; `#` starts a comment.
    pub data: PathBuf,

    #[arg(long, default_value = "gamma")]
    pub model: String,

    /// Write `k,u,t` rows of the statistic path to this CSV file.
    #[arg(long)]
    pub dump_path: Option<PathBuf>,

    /// Ridge added to the covariance diagonal (0 disables).
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 0.05)]
    pub level: f64,

    /// Critical value table consulted before the shipped one.
    #[arg(long)]
    pub table: Option<PathBuf>,

    /// Simulate the critical value for this level instead of looking it up.
    #[arg(long)]
    pub simulate_critval: bool,

    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub critval_reps: usize,

    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub critval_grid: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct CritvalArgs {
    /// Dimensions to simulate, e.g. `--dim 1,2,3`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dim: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = SHIPPED_LEVELS.to_vec())]
    pub level: Vec<f64>,

    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub reps: usize,

    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Table file to create or update.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON study file.
    pub config: PathBuf,

    /// Directory for the CSV outputs.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Overrides the number of replications `m`.
    #[arg(long)]
    pub replications: Option<usize>,
}

/// Captured result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Serialize)]
struct CliReport<'a, T: Serialize> {
    command: &'a str,
    config: serde_json::Value,
    result: T,
    exit_code: i32,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    let json = cli.json;
    let result = match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&cli.command, json))),
        None => dispatch(&cli.command, json),
    };
    match result {
        Ok((code, stdout)) => Outcome { code, stdout, stderr: String::new() },
        Err(e) => {
            let stdout = if json {
                let doc = json!({ "error": e.to_string(), "exit_code": EXIT_ERROR });
                format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
            } else {
                String::new()
            };
            Outcome { code: EXIT_ERROR, stdout, stderr: format!("error: {e}\n") }
        }
    }
}

fn dispatch(command: &Command, json: bool) -> Result<(i32, String), CliError> {
    match command {
        Command::Test(a) => cmd_test(a, json),
        Command::Detect(a) => cmd_detect(a, json),
        Command::Critval(a) => cmd_critval(a, json),
        Command::Simulate(a) => cmd_simulate(a, json),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

fn looks_like_header(text: &str) -> bool {
    text.chars()
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '"' || c == '\'')
        && !matches!(text.to_ascii_lowercase().as_str(), "nan" | "inf" | "infinity")
}

/// Parses observations: one per line, `#` comments and blank lines skipped.
/// A non-numeric first line that looks like a column name is taken as a header.
pub fn parse_observations(text: &str, path: &Path) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let line = line.trim_end_matches(',').trim();
        if line.is_empty() {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => {
                return Err(CliError::NonFinite {
                    path: path.to_owned(),
                    line: i + 1,
                    text: line.to_owned(),
                })
            }
            Err(_) if first && looks_like_header(line) => {}
            Err(_) => {
                return Err(CliError::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    text: line.to_owned(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_observations(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_observations(&text, path)
}

fn dump_path(path: &Path, t_path: &[f64]) -> Result<(), CliError> {
    let n = t_path.len().saturating_sub(1).max(1) as f64;
    let mut out = String::from("k,u,t\n");
    for (k, t) in t_path.iter().enumerate() {
        let _ = writeln!(out, "{},{:?},{:?}", k, k as f64 / n, t);
    }
    fs::write(path, out).map_err(io_err(path))
}

fn render_json<T: Serialize>(command: &str, config: serde_json::Value, result: T, code: i32) -> String {
    let report = CliReport { command, config, result, exit_code: code };
    format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes"))
}

fn analysis_lines(out: &mut String, model: &dyn MomentModel, a: &PathAnalysis) {
    let _ = writeln!(out, "model        {} (d = {})", model.name(), model.dim());
    let _ = writeln!(out, "n            {}", a.n);
    let _ = writeln!(out, "theta_hat    {}", a.theta_hat);
    let _ = writeln!(out, "T_n          {:.6}", a.t_stat);
}

fn cmd_test(args: &TestArgs, json: bool) -> Result<(i32, String), CliError> {
    let model = model_by_name(&args.data.model)?;
    let data = read_observations(&args.data.data)?;
    let mut options = TestOptions { ridge: args.data.ridge, ..Default::default() };
    if let Some(path) = &args.table {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        options.table = Some(CriticalValueTable::parse(&text)?);
    }
    if args.simulate_critval {
        let c = limits::critical_value(
            model.dim(),
            args.level,
            args.critval_reps,
            args.critval_grid,
            args.seed,
        )?;
        options.critical_value = Some(c.value);
    }
    let report = run_test_with(&data, model.as_ref(), args.level, &options)?;
    if let Some(path) = &args.data.dump_path {
        dump_path(path, report.t_path())?;
    }
    let code = if report.reject { EXIT_REJECT } else { EXIT_OK };
    if json {
        let config = json!({
            "data": args.data.data,
            "model": model.name(),
            "level": args.level,
            "table": args.table,
            "simulate_critval": args.simulate_critval,
            "seed": args.seed,
            "ridge": args.data.ridge,
        });
        return Ok((code, render_json("test", config, &report, code)));
    }
    let mut out = String::new();
    analysis_lines(&mut out, model.as_ref(), &report.analysis);
    let _ = writeln!(out, "critical     {:.6} (level {})", report.critical_value, report.level);
    let _ = writeln!(
        out,
        "decision     {}",
        if report.reject { "reject: change detected" } else { "no change detected" }
    );
    let (u_hat, k_hat) = report.change_point();
    let _ = writeln!(
        out,
        "u_hat        {u_hat:.6} (k_hat = {k_hat}){}",
        if report.reject { "" } else { " [not significant]" }
    );
    Ok((code, out))
}

fn cmd_detect(args: &DetectArgs, json: bool) -> Result<(i32, String), CliError> {
    let model = model_by_name(&args.data.model)?;
    let data = read_observations(&args.data.data)?;
    let options = TestOptions { ridge: args.data.ridge, ..Default::default() };
    let analysis = analyze(&data, model.as_ref(), &options)?;
    if let Some(path) = &args.data.dump_path {
        dump_path(path, &analysis.t_path)?;
    }
    if json {
        let config = json!({
            "data": args.data.data,
            "model": model.name(),
            "ridge": args.data.ridge,
        });
        return Ok((EXIT_OK, render_json("detect", config, &analysis, EXIT_OK)));
    }
    let mut out = String::new();
    analysis_lines(&mut out, model.as_ref(), &analysis);
    let _ = writeln!(out, "u_hat        {:.6}", analysis.u_hat);
    let _ = writeln!(out, "k_hat        {}", analysis.k_hat);
    Ok((EXIT_OK, out))
}

fn cmd_critval(args: &CritvalArgs, json: bool) -> Result<(i32, String), CliError> {
    let mut fresh = CriticalValueTable::default();
    for &d in &args.dim {
        fresh.merge(limits::simulate_critical_values(d, &args.level, args.reps, args.grid, args.seed)?);
    }
    if let Some(path) = &args.out {
        let mut table = if path.exists() {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            CriticalValueTable::parse(&text)?
        } else {
            CriticalValueTable::default()
        };
        table.merge(fresh.clone());
        fs::write(path, table.to_text()).map_err(io_err(path))?;
    }
    if json {
        let config = json!({
            "dim": args.dim,
            "level": args.level,
            "reps": args.reps,
            "grid": args.grid,
            "seed": args.seed,
            "out": args.out,
        });
        return Ok((EXIT_OK, render_json("critval", config, &fresh, EXIT_OK)));
    }
    let mut out = String::new();
    for e in &fresh.entries {
        let _ = writeln!(
            out,
            "d = {}  level = {}  critical value = {:.4} +- {:.4}  (R = {}, G = {}, seed = {})",
            e.dim, e.level, e.value, e.stderr, e.replications, e.grid, e.seed
        );
    }
    Ok((EXIT_OK, out))
}

/// Loads a study file, applying command-line overrides.
pub fn load_study(path: &Path, seed: Option<u64>, replications: Option<usize>) -> Result<StudyConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut study = StudyConfig::from_json(&text)?;
    if let Some(s) = seed {
        study.seed = s;
    }
    if let Some(m) = replications {
        study.m = m;
    }
    Ok(study)
}

fn write_study_outputs(dir: &Path, results: &[ExperimentResult]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(io_err(&p))
    };
    write("cells.csv", montecarlo::results_csv(results))?;
    write("rejection_table.csv", montecarlo::rejection_table_csv(results))?;
    if results.iter().any(|r| r.config.change.is_some()) {
        write("estimator_table.csv", montecarlo::estimator_table_csv(results))?;
        for (i, r) in results.iter().enumerate() {
            if r.config.change.is_some() {
                write(&format!("hist_{i}.csv"), r.histogram.to_csv())?;
            }
        }
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, json: bool) -> Result<(i32, String), CliError> {
    let study = load_study(&args.config, args.seed, args.replications)?;
    let cells = study.cells()?;
    let results = cells
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = &args.out {
        write_study_outputs(dir, &results)?;
    }
    if json {
        let config = json!({
            "config": args.config,
            "name": study.name,
            "model": study.model,
            "m": study.m,
            "seed": study.seed,
            "level": study.level,
            "out": args.out,
        });
        return Ok((EXIT_OK, render_json("simulate", config, &results, EXIT_OK)));
    }
    let mut out = String::new();
    if let Some(name) = &study.name {
        let _ = writeln!(out, "{name}");
    }
    let _ = writeln!(
        out,
        "{:<16} {:<16} {:>6} {:>6} {:>8} {:>10} {:>9} {:>9} {:>9}",
        "theta0", "theta1", "ustar", "n", "m", "reject", "mean u", "sd u", "rmse u"
    );
    let opt = |x: Option<f64>| x.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"));
    for r in &results {
        let c = &r.config;
        let (t1, us) = c.change.as_ref().map_or(("-".to_owned(), "-".to_owned()), |ch| {
            (ch.theta1.to_string(), ch.ustar.to_string())
        });
        let _ = writeln!(
            out,
            "{:<16} {:<16} {:>6} {:>6} {:>8} {:>10.4} {:>9} {:>9} {:>9}",
            c.theta0.to_string(),
            t1,
            us,
            c.n,
            r.completed,
            r.rejection_rate,
            opt(r.u_hat_mean),
            opt(r.u_hat_sd),
            opt(r.u_hat_rmse)
        );
        if r.failed > 0 {
            let _ = writeln!(out, "  ({} failed replications excluded)", r.failed);
        }
    }
    Ok((EXIT_OK, out))
}
