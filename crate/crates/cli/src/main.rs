// SPDX-License-Identifier: MIT OR Apache-2.0

//! `optseg`: changepoint detection and selective p-values from the command line.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 every tested
//! changepoint was numerically degenerate.

mod config;
mod input;

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optseg::format::sig12;
use optseg::sim::{run_timing_experiment, ExperimentReport, TimingConfig};
use optseg::{
    bonferroni_adjust, default_beta, estimate_variance_max_segment, loss_fixed, mad_variance, run_inference,
    segment_cost, Covariance, CpVector, Detection, InferenceOptions, Method, ObservedSequence, Selection, TestResult,
};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    AllDegenerate,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => write!(f, "{m}"),
            CliError::AllDegenerate => write!(f, "every tested changepoint is numerically degenerate"),
        }
    }
}

impl From<optseg::Error> for CliError {
    fn from(e: optseg::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::AllDegenerate => 3,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "optseg", version, about = "Optimal changepoints with selective p-values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect changepoints and write segments.csv.
    Detect {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Detect changepoints, test each one and write tests.csv.
    Infer {
        #[command(flatten)]
        run: RunArgs,
        /// Family-wise level, split over the detected changepoints.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// full, oc or naive.
        #[arg(long, default_value = "full")]
        method: Method,
        /// Use sigma^2 I with sigma^2 the largest within-segment variance.
        #[arg(long, conflicts_with_all = ["sigma2", "cov_file"])]
        estimate_variance: bool,
    },
    /// Run a simulation experiment described by a TOML file.
    Simulate {
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `out` in the config file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time full inference on synthetic sequences.
    Bench {
        /// Comma-separated N:K pairs.
        #[arg(long, default_value = "200:9,400:19")]
        cases: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Single-column CSV, header optional.
    input: PathBuf,
    /// Number of changepoints (fixed-K mode).
    #[arg(long, conflicts_with = "beta")]
    k: Option<usize>,
    /// Penalty per changepoint; defaults to 2 sigma^2 log N when K is not set.
    #[arg(long)]
    beta: Option<f64>,
    /// Known noise variance.
    #[arg(long, conflicts_with = "cov_file")]
    sigma2: Option<f64>,
    /// Dense N x N covariance matrix as CSV.
    #[arg(long)]
    cov_file: Option<PathBuf>,
    /// Minimum segment length.
    #[arg(long, default_value_t = 1)]
    min_seg: usize,
    /// Accepted for symmetry with the other commands; detection is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_cases(s: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let bad = |c: &str| CliError::Validation(format!("--cases: expected N:K pairs, got {c:?}"));
    s.split(',')
        .map(|c| {
            let (n, k) = c.trim().split_once(':').ok_or_else(|| bad(c))?;
            Ok((n.parse().map_err(|_| bad(c))?, k.parse().map_err(|_| bad(c))?))
        })
        .collect()
}

/// Loaded input with its covariance and chosen selection rule.
struct Prepared {
    x: Vec<f64>,
    cov: Covariance,
    selection: Selection,
}

impl RunArgs {
    fn prepare(&self) -> Result<Prepared, CliError> {
        let x = input::read_sequence(&self.input)?;
        if x.len() < 2 {
            return Err(CliError::Validation(format!("sequence too short: need N >= 2, got {}", x.len())));
        }
        let cov = match (&self.cov_file, self.sigma2) {
            (Some(path), _) => input::read_covariance(path)?,
            (None, Some(s)) => Covariance::ScaledIdentity { sigma2: s },
            (None, None) => Covariance::Identity,
        };
        cov.validate(x.len())?;
        let selection = match (self.k, self.beta) {
            (Some(k), _) => Selection::FixedK(k),
            (None, Some(b)) => Selection::Penalized(b),
            (None, None) => {
                let known = self.sigma2.is_some() || self.cov_file.is_some();
                let s2 = if known { cov.mean_variance(x.len()) } else { noise_variance(&x) };
                Selection::Penalized(default_beta(s2, x.len()))
            }
        };
        Ok(Prepared { x, cov, selection })
    }
}

/// MAD estimate, or the sample variance when more than half the differences vanish.
fn noise_variance(x: &[f64]) -> f64 {
    let mad = mad_variance(x);
    if mad > 0.0 {
        return mad;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(io_err(path))
}

fn describe_selection(selection: Selection) -> String {
    match selection {
        Selection::FixedK(k) => format!("fixed K = {k}"),
        Selection::Penalized(b) => format!("penalized, beta = {}", sig12(b)),
    }
}

fn cmd_detect(run: &RunArgs) -> Result<(), CliError> {
    let p = run.prepare()?;
    let det = Detection::run(&p.x, p.selection, run.min_seg)?;
    let n = p.x.len();
    let loss = loss_fixed(&p.x, &det.tau)?;

    let mut csv = String::from("segment,start,end,length,mean,cost\n");
    let mut out = String::new();
    out += &format!("N = {n}, {}\n", describe_selection(p.selection));
    out += &format!("changepoints: {}\n", positions(&det.tau));
    for (i, (s, e)) in det.tau.segments(n).enumerate() {
        let mean = p.x[s - 1..e].iter().sum::<f64>() / (e - s + 1) as f64;
        let cost = segment_cost(&p.x, s, e)?;
        csv += &format!("{},{s},{e},{},{},{}\n", i + 1, e - s + 1, sig12(mean), sig12(cost));
        out += &format!("segment {}: {s}..{e} mean {}\n", i + 1, sig12(mean));
    }
    out += &format!("loss: {}\n", sig12(loss));
    if let Selection::Penalized(_) = p.selection {
        out += &format!("penalized objective: {}\n", sig12(det.loss));
    }

    create_out(&run.out)?;
    write_file(&run.out.join("segments.csv"), &csv)?;
    print!("{out}");
    Ok(())
}

fn positions(tau: &CpVector) -> String {
    if tau.is_empty() {
        "none".into()
    } else {
        tau.positions().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// Rejection uses the p-value as rendered, so the printed table is self-consistent.
fn rejects(p: f64, level: f64) -> bool {
    sig12(p).parse::<f64>().is_ok_and(|printed| printed < level)
}

fn tests_csv(results: &[TestResult], level: f64) -> String {
    let mut csv = String::from("position,z_obs,variance,naive_p,selective_p,reject_at_alpha_bonferroni,method\n");
    for r in results {
        let selective = match (r.method, r.selective_p) {
            (Method::Naive, _) => "NA".to_string(),
            (_, Some(p)) => sig12(p),
            (_, None) => "degenerate".to_string(),
        };
        let reject = r.p_value().map_or("NA".to_string(), |p| rejects(p, level).to_string());
        csv += &format!(
            "{},{},{},{},{selective},{reject},{}\n",
            r.cp_position,
            sig12(r.z_obs),
            sig12(r.variance),
            sig12(r.naive_p),
            r.method
        );
    }
    csv
}

fn cmd_infer(run: &RunArgs, alpha: f64, method: Method, estimate_variance: bool) -> Result<(), CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let p = run.prepare()?;
    let mut cov = p.cov;
    if estimate_variance {
        let det = Detection::run(&p.x, p.selection, run.min_seg)?;
        cov = Covariance::ScaledIdentity { sigma2: estimate_variance_max_segment(&p.x, &det.tau)? };
    }
    let seq = ObservedSequence::new(p.x, cov)?;
    let opts = InferenceOptions { selection: p.selection, method, min_segment_len: run.min_seg, pruning: true };
    let (det, results) = run_inference(&seq, &opts)?;

    create_out(&run.out)?;
    let mut stdout = io::stdout().lock();
    let mut say = |s: String| writeln!(stdout, "{s}").map_err(|e| CliError::Io(e.to_string()));
    say(format!("N = {}, {}, method {method}", seq.len(), describe_selection(p.selection)))?;
    if results.is_empty() {
        write_file(&run.out.join("tests.csv"), &tests_csv(&[], alpha))?;
        return say("no changepoints detected".into());
    }
    let level = bonferroni_adjust(alpha, det.tau.dim())?;
    write_file(&run.out.join("tests.csv"), &tests_csv(&results, level))?;
    say(format!("changepoints: {}; Bonferroni level {}", positions(&det.tau), sig12(level)))?;
    for r in &results {
        let shown = match r.p_value() {
            Some(p) => format!("p = {}{}", sig12(p), if rejects(p, level) { " (reject)" } else { "" }),
            None => "p = degenerate".into(),
        };
        say(format!("position {}: z = {}, {shown}", r.cp_position, sig12(r.z_obs)))?;
    }
    for r in results.iter().filter(|r| r.is_degenerate()) {
        eprintln!(
            "warning: changepoint at {} is degenerate: {}",
            r.cp_position,
            r.diagnostic.as_deref().unwrap_or("region probability underflow")
        );
    }
    if results.iter().all(TestResult::is_degenerate) {
        return Err(CliError::AllDegenerate);
    }
    Ok(())
}

fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(), CliError> {
    report.write_to(dir).map_err(io_err(dir))
}

fn opt(v: Option<f64>) -> String {
    v.map_or("NA".into(), sig12)
}

fn cmd_simulate(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file = config::SimFile::parse(&text)?;
    let dir = out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let report = file.run(seed)?;
    write_report(&report, &dir)?;
    println!("{} experiment written to {}", report.kind, dir.display());
    for s in &report.summaries {
        println!(
            "N = {}, delta_mu = {}, {}: trials {}, tests {}, failed {}, FPR {}, power {}, KS p {}",
            s.n,
            opt(s.delta_mu),
            s.method,
            s.trials,
            s.tests,
            s.failed_tests,
            opt(s.fpr),
            opt(s.power),
            opt(s.ks_p_value)
        );
    }
    print_timings(&report);
    Ok(())
}

fn print_timings(report: &ExperimentReport) {
    for t in &report.timings {
        println!("N = {}, K = {}: median {} s over {} trials", t.n, t.k, sig12(t.median_seconds), t.trials);
    }
    for w in report.timings.windows(2) {
        println!("t({},{}) / t({},{}) = {}", w[1].n, w[1].k, w[0].n, w[0].k, sig12(w[1].median_seconds / w[0].median_seconds));
    }
}

fn cmd_bench(cases: &str, trials: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let cases = parse_cases(cases)?;
    let cfg = TimingConfig { cases, trials, seed, ..TimingConfig::default() };
    let report = run_timing_experiment(&cfg)?;
    write_report(&report, out)?;
    print_timings(&report);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect { run } => cmd_detect(&run),
        Command::Infer { run, alpha, method, estimate_variance } => cmd_infer(&run, alpha, method, estimate_variance),
        Command::Simulate { config, seed, out } => cmd_simulate(&config, seed, out),
        Command::Bench { cases, trials, seed, out } => cmd_bench(&cases, trials, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
