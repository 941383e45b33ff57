//! Command-line driver: `fit`, `decide` and `simulate`.
//!
//! Exit codes: 0 success, 2 invalid input or flags, 3 numerical failure
//! (rank deficiency, separation, empty arm), 4 too many failed simulation
//! replications.

mod report;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{load_csv, read_covariates};
use crate::error::{Error, Result};
use crate::estimators::{fit_regime, BandwidthChoice, DecisionRule, FitOptions, Method};
use crate::propensity::{PropensityOptions, DEFAULT_CLIP_EPS};
use crate::simulation::{coefficient_table, decision_table, run_study, Baseline, Model, SimConfig};

pub use report::{Diagnostics, FitReport, FIT_SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_FAILURES: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ssregime", version, about = "Optimal linear treatment regimes from partially labeled data")]
pub struct Cli {
    /// Worker threads for kernel evaluation and replications.
    #[arg(long, global = true, env = "SSREGIME_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a treatment regime from CSV data and write a JSON report.
    Fit(FitArgs),
    /// Apply one or two fitted regimes to covariate rows.
    Decide(DecideArgs),
    /// Run the Monte Carlo study for one model/baseline cell.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Labeled CSV with header x1,...,xp,a,y.
    #[arg(long)]
    pub labeled: PathBuf,
    /// Unlabeled CSV with header x1,...,xp (required for np and ss).
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Ss)]
    pub method: Method,
    #[arg(long, default_value_t = 5)]
    pub kfolds: usize,
    /// `auto` (cross-validated) or a positive bandwidth on the standardized scale.
    #[arg(long, default_value = "auto")]
    pub bandwidth: BandwidthChoice,
    #[arg(long, default_value_t = DEFAULT_CLIP_EPS)]
    pub clip_eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One-based covariate columns for the propensity model, e.g. `1,3`.
    #[arg(long, value_delimiter = ',')]
    pub propensity_cols: Option<Vec<usize>>,
    /// Report path; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    /// Fit report(s); with two, a cross-tabulation of decisions is printed.
    #[arg(long = "fit", required = true, num_args = 1)]
    pub fits: Vec<PathBuf>,
    /// Covariate CSV with header x1,...,xp on the raw scale.
    #[arg(long)]
    pub covariates: PathBuf,
    /// Decisions CSV path; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long, value_enum)]
    pub baseline: Baseline,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Unlabeled sample size.
    #[arg(long = "big-n", default_value_t = 5000)]
    pub big_n: usize,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Size of the Monte Carlo truth sample.
    #[arg(long, default_value_t = 500_000)]
    pub mc_size: usize,
    #[arg(long, default_value_t = 5)]
    pub kfolds: usize,
    #[arg(long, default_value = "auto")]
    pub bandwidth: BandwidthChoice,
    #[arg(long, default_value_t = DEFAULT_CLIP_EPS)]
    pub clip_eps: f64,
    /// Also fit the single-surface NP estimator.
    #[arg(long)]
    pub np: bool,
    /// JSON report path; tables are still printed.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::TooManyFailures { .. } => EXIT_FAILURES,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(t) = cli.threads {
        // Fails only if a pool already exists, in which case that one is used.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Decide(a) => cmd_decide(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    if args.method != Method::Tr && args.unlabeled.is_none() {
        return Err(Error::InvalidArgument(format!(
            "{} requires unlabeled data (--unlabeled)",
            args.method
        )));
    }
    if args.kfolds < 2 {
        return Err(Error::InvalidArgument(format!("--kfolds must be at least 2, got {}", args.kfolds)));
    }
    let columns = match &args.propensity_cols {
        Some(cols) => {
            if cols.iter().any(|&c| c == 0) {
                return Err(Error::InvalidArgument("--propensity-cols are one-based".into()));
            }
            Some(cols.iter().map(|c| c - 1).collect())
        }
        None => None,
    };
    let ds = load_csv(&args.labeled, args.unlabeled.as_deref())?;
    let opts = FitOptions {
        method: args.method,
        kfolds: args.kfolds,
        bandwidth: args.bandwidth,
        grid: None,
        propensity: PropensityOptions {
            clip_eps: args.clip_eps,
            columns,
            ..Default::default()
        },
        seed: args.seed,
    };
    let outcome = fit_regime(&ds, &opts)?;
    let report = FitReport::from_outcome(&outcome, args.seed);
    let text = match args.format {
        Format::Json => to_json(&report),
        Format::Table => report.to_table(),
    };
    emit(args.output.as_deref(), &text)
}

pub fn read_fit_report(path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let report: FitReport = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{} is not a fit report: {e}", path.display())))?;
    if report.schema_version != FIT_SCHEMA_VERSION {
        return Err(Error::InvalidArgument(format!(
            "{} has schema version {}, expected {}",
            path.display(),
            report.schema_version,
            FIT_SCHEMA_VERSION
        )));
    }
    if report.beta.len() != report.p + 1 || report.standardization.dim() != report.p {
        return Err(Error::InvalidArgument(format!("{} is internally inconsistent", path.display())));
    }
    Ok(report)
}

/// Counts of `(first decision, second decision)` pairs: `table[d1][d2]`.
pub fn cross_tabulate(first: &DecisionRule, second: &DecisionRule, rows: &[Vec<f64>]) -> [[usize; 2]; 2] {
    let mut t = [[0; 2]; 2];
    for x in rows {
        t[first.decide(x) as usize][second.decide(x) as usize] += 1;
    }
    t
}

pub fn cmd_decide(args: &DecideArgs) -> Result<()> {
    if args.fits.len() > 2 {
        return Err(Error::InvalidArgument("at most two --fit reports".into()));
    }
    let reports = args.fits.iter().map(|p| read_fit_report(p)).collect::<Result<Vec<_>>>()?;
    let rows = read_covariates(&args.covariates)?;
    for r in &reports {
        if let Some(x) = rows.first() {
            if x.len() != r.p {
                return Err(Error::DimensionMismatch {
                    expected: r.p,
                    found: x.len(),
                });
            }
        }
    }
    let rules: Vec<DecisionRule> = reports.iter().map(FitReport::rule).collect();
    let p = rules[0].p();

    let mut header: Vec<String> = (1..=p).map(|k| format!("x{k}")).collect();
    header.push("decision".into());
    if rules.len() == 2 {
        header.push("decision_2".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for x in &rows {
        let mut cells: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        cells.extend(rules.iter().map(|r| r.decide(x).to_string()));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    emit(args.output.as_deref(), &out)?;

    if let [a, b] = rules.as_slice() {
        let t = cross_tabulate(a, b, &rows);
        let (m1, m2) = (reports[0].method.as_str(), reports[1].method.as_str());
        let table = format!(
            "{:>12} | {m2}=0 {:>8} | {m2}=1 {:>8}\n{:>12} | {:>13} | {:>13}\n{:>12} | {:>13} | {:>13}\n",
            format!("{m1} \\ {m2}"),
            "",
            "",
            format!("{m1}=0"),
            t[0][0],
            t[0][1],
            format!("{m1}=1"),
            t[1][0],
            t[1][1],
        );
        if args.output.is_some() {
            print!("{table}");
        } else {
            eprint!("{table}");
        }
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = SimConfig {
        model: args.model,
        baseline: args.baseline,
        n: args.n,
        big_n: args.big_n,
        p: args.p,
        replications: args.reps,
        mc_truth_size: args.mc_size,
        seed: args.seed,
        kfolds: args.kfolds,
        bandwidth: args.bandwidth,
        grid: None,
        clip_eps: args.clip_eps,
        include_np: args.np,
    };
    cfg.validate()?;
    let report = run_study(&cfg)?;
    let tables = format!(
        "{}\n{}",
        decision_table(std::slice::from_ref(&report)),
        coefficient_table(&report)
    );
    match (&args.output, args.format) {
        (Some(path), _) => {
            write_atomic(path, to_json(&report).as_bytes())?;
            print!("{tables}");
        }
        (None, Format::Json) => print!("{}", to_json(&report)),
        (None, Format::Table) => print!("{tables}"),
    }
    Ok(())
}
