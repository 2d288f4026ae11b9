//! Command-line front end: `profile`, `certify` and `gram`.
//!
//! Exit codes: 0 certified (or success), 1 refuted, 2 inconclusive,
//! 3 malformed input or I/O failure, 4 grid incompatibility.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    check_onb, frame_certify, gram_oracle, hermitian_asymmetry, hermitian_eigenvalues, probe_from_gram,
    riesz_certify, CertOptions, CertReport, Verdict,
};
use crate::bracket::bracket_profile;
use crate::config::{BuiltField, FieldSpec};
use crate::error::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "HEISBRACKET_THREADS";

pub const EXIT_MALFORMED: i32 = 3;
pub const EXIT_GRID: i32 = 4;

/// Asymmetry above which a Gram matrix is flagged as non-Hermitian.
const HERMITIAN_TOL: f64 = 1e-10;
/// Slack on the upper frame bound for the truncated Gram spectrum.
const PROBE_SLACK: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "heisbracket", version, about = "Bracket profiles, frame certificates and Gram oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bracket profile [psi, psi](alpha) as CSV.
    Profile(CommonArgs),
    /// Run a certifier and write a JSON report.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Gram matrices from both paths, written as PREFIX.direct.csv,
    /// PREFIX.bracket.csv and PREFIX.summary.json.
    Gram(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Onb,
    Riesz,
    Frame,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Field spec JSON.
    pub spec: PathBuf,
    /// Output file (prefix for `gram`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Alpha samples per unit interval; a power of two.
    #[arg(long)]
    pub alpha_res: Option<usize>,
    /// Band window as `LO,HI`.
    #[arg(long, value_parser = parse_band, allow_hyphen_values = true)]
    pub band: Option<[i64; 2]>,
    #[arg(long)]
    pub r1: Option<usize>,
    #[arg(long)]
    pub r2: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Support threshold; relative default when omitted.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_band(s: &str) -> std::result::Result<[i64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected LO,HI, got `{s}`"));
    }
    let lo = parts[0].trim().parse::<i64>().map_err(|e| e.to_string())?;
    let hi = parts[1].trim().parse::<i64>().map_err(|e| e.to_string())?;
    Ok([lo, hi])
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_grid_incompatibility() { EXIT_GRID } else { EXIT_MALFORMED };
        CliError { code, message: e.to_string() }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError { code: EXIT_MALFORMED, message: format!("{}: {e}", path.display()) }
}

fn malformed(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_MALFORMED, message: message.into() }
}

/// Effective run configuration after flag overrides.
struct Run {
    spec: FieldSpec,
    built: BuiltField,
    hash: String,
    tol: f64,
    tau: Option<f64>,
}

impl CommonArgs {
    fn load(&self) -> std::result::Result<Run, CliError> {
        let text = fs::read_to_string(&self.spec).map_err(|e| io_error(&self.spec, e))?;
        let mut spec = FieldSpec::from_json(&text)?;
        if let Some(m) = self.alpha_res {
            spec.alpha_res = m;
        }
        if let Some(band) = self.band {
            spec.band = band;
        }
        if let Some(r1) = self.r1 {
            spec.gamma1_radius = r1;
        }
        if let Some(r2) = self.r2 {
            spec.gamma2_radius = r2;
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if !spec.alpha_res.is_power_of_two() {
            return Err(malformed(format!("alpha resolution {} is not a power of two", spec.alpha_res)));
        }
        if !(self.tol > 0.0) {
            return Err(malformed(format!("tolerance must be positive, got {}", self.tol)));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) {
                return Err(malformed(format!("support threshold must be positive, got {tau}")));
            }
        }
        let built = spec.build()?;
        let hash = spec.sha256();
        Ok(Run { spec, built, hash, tol: self.tol, tau: self.tau })
    }
}

impl Run {
    fn header(&self) -> String {
        format!(
            "# heisbracket {VERSION}\n# config_sha256 {}\n# grid {}\n",
            self.hash,
            self.built.grid_summary()
        )
    }

    fn meta(&self) -> serde_json::Value {
        json!({
            "version": VERSION,
            "config_sha256": self.hash,
            "grid": self.built.grid_summary(),
            "config": self.spec,
        })
    }

    fn options(&self) -> CertOptions {
        CertOptions { r1: self.spec.gamma1_radius, r2: self.spec.gamma2_radius, tau: self.tau, tol: self.tol }
    }
}

fn emit(out: Option<&Path>, contents: &str) -> std::result::Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, contents).map_err(|e| io_error(path, e)),
        None => io::stdout().write_all(contents.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn cmd_profile(args: &CommonArgs) -> std::result::Result<i32, CliError> {
    let run = args.load()?;
    let psi = &run.built.field;
    let profile = bracket_profile(psi, psi)?;
    let mut csv = run.header();
    csv.push_str("alpha,re,im\n");
    for (i, v) in profile.values.iter().enumerate() {
        writeln!(csv, "{},{},{}", profile.alpha(i), v.re, v.im).expect("write to string");
    }
    emit(args.out.as_deref(), &csv)?;
    Ok(0)
}

fn cmd_certify(args: &CommonArgs, mode: Mode) -> std::result::Result<i32, CliError> {
    let run = args.load()?;
    let psi = &run.built.field;
    let spec = &run.built.spec;
    let opts = run.options();
    let report: CertReport = match mode {
        Mode::Onb => check_onb(psi, spec, &opts)?,
        Mode::Riesz => riesz_certify(psi, spec, &opts)?,
        Mode::Frame => frame_certify(psi, spec, &opts)?,
    };
    let probe = if report.verdict == Verdict::Certified {
        let gram = gram_oracle(psi, spec, opts.r1, opts.r2)?;
        Some(probe_from_gram(&gram, opts.r2, report.b_est, PROBE_SLACK, run.spec.seed)?)
    } else {
        None
    };
    let doc = json!({ "meta": run.meta(), "report": report, "probe": probe });
    emit(args.out.as_deref(), &to_json(&doc))?;
    Ok(report.verdict.exit_code())
}

fn gram_csv(header: &str, labels: &[String], g: &nalgebra::DMatrix<Complex64>) -> String {
    let mut csv = header.to_string();
    csv.push_str("row,col,re,im\n");
    for (r, rl) in labels.iter().enumerate() {
        for (c, cl) in labels.iter().enumerate() {
            let v = g[(r, c)];
            writeln!(csv, "{rl},{cl},{},{}", v.re, v.im).expect("write to string");
        }
    }
    csv
}

fn cmd_gram(args: &CommonArgs) -> std::result::Result<i32, CliError> {
    let run = args.load()?;
    let (r1, r2) = (run.spec.gamma1_radius, run.spec.gamma2_radius);
    let gram = gram_oracle(&run.built.field, &run.built.spec, r1, r2)?;
    let labels: Vec<String> = gram.points.iter().map(|p| p.label()).collect();
    let header = run.header();
    let asym_direct = hermitian_asymmetry(&gram.direct);
    let asym_bracket = hermitian_asymmetry(&gram.bracket);
    let eigen = hermitian_eigenvalues(&gram.direct);
    let summary = json!({
        "meta": run.meta(),
        "points": labels,
        "max_abs_deviation": gram.max_abs_deviation(),
        "relative_deviation": gram.relative_deviation(),
        "hermitian_asymmetry_direct": asym_direct,
        "hermitian_asymmetry_bracket": asym_bracket,
        "non_hermitian": asym_direct > HERMITIAN_TOL || asym_bracket > HERMITIAN_TOL,
        "min_eigenvalue": eigen.first(),
        "max_eigenvalue": eigen.last(),
    });
    let direct = gram_csv(&header, &labels, &gram.direct);
    let bracket = gram_csv(&header, &labels, &gram.bracket);
    match &args.out {
        Some(prefix) => {
            let with = |ext: &str| {
                let mut s = prefix.as_os_str().to_owned();
                s.push(ext);
                PathBuf::from(s)
            };
            emit(Some(&with(".direct.csv")), &direct)?;
            emit(Some(&with(".bracket.csv")), &bracket)?;
            emit(Some(&with(".summary.json")), &to_json(&summary))?;
        }
        None => emit(None, &to_json(&summary))?,
    }
    Ok(0)
}

fn configure_threads() -> std::result::Result<(), CliError> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| malformed(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
        if n == 0 {
            return Err(malformed(format!("{THREADS_ENV} must be positive")));
        }
        // a pool may already exist when embedded; the cap is best effort then
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> std::result::Result<i32, CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Profile(args) => cmd_profile(args),
        Command::Certify { common, mode } => cmd_certify(common, *mode),
        Command::Gram(args) => cmd_gram(args),
    }
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_MALFORMED } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
