//! `urnlab`: batch reports for the infinite-color Pólya urn.
//!
//! Every command writes one CSV or JSON file and prints a one-line summary.
//! Exit codes: 0 success, 2 configuration error, 3 resource budget exceeded,
//! 4 failed invariant in a checking command.

mod parse;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use urnlab::berry_esseen::{be_report_1d, be_report_d, reports_to_csv, BeReport, DistanceMode};
use urnlab::format::g12;
use urnlab::gof::chi_square_gof;
use urnlab::ldp::{
    compound_poisson_pmf, gauss_ratio, lambda_n_csv, log_product_pi, rate_function_closed, rate_function_numeric,
    rate_properties, rate_rows_csv, tail_exponent_report, tail_records_csv, LambdaRow, Side, TailReportOptions,
};
use urnlab::mc::parallel_counts;
use urnlab::urn::{exact_pmf, sample_z_direct, sample_z_repr, PmfSampler};
use urnlab::{Error, IncrementDistribution, LatticePmf};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "URNLAB_OUT_DIR";
/// Largest `n` served exactly in `auto` mode, by dimension.
const AUTO_EXACT_1D: u64 = 100_000;
const AUTO_EXACT_DD: u64 = 1_000;
const GOF_SIGNIFICANCE: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "urnlab", version, about = "Exact and Monte Carlo reports for the random-walk Pólya urn")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Increment law: preset (det1d, ssrw1d, ne2d), inline JSON or a JSON file.
    #[arg(long)]
    dist: String,
    /// Output file; defaults to `$URNLAB_OUT_DIR/<command>.<ext>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Start {
    /// Initial composition: delta0, uniform:a:b, inline JSON atoms or a pmf CSV file.
    #[arg(long, default_value = "delta0")]
    u0: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Mc,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Direct,
    Repr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TailSide {
    Upper,
    Lower,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Sample Z_n and tabulate counts; `--check` adds a chi-square test against the exact law.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Method::Repr)]
        method: Method,
        #[arg(long)]
        check: bool,
    },
    /// Exact pmf of Z_n as CSV.
    ExactPmf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        #[arg(long)]
        n: u64,
    },
    /// One-dimensional Berry-Esseen report.
    BeReport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        #[arg(long)]
        n: String,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Multivariate Berry-Esseen report.
    BeReportD {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        #[arg(long)]
        n: String,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scaled log-MGF Λ_n against its limit e(λ) − 1.
    LdpLambda {
        #[command(flatten)]
        common: Common,
        /// λ grid: comma list (dimension one), `a,b;c,d` points or linspace:a:b:k.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        n: String,
    },
    /// Rate function by Legendre transform.
    LdpRate {
        #[command(flatten)]
        common: Common,
        /// x grid, same syntax as --lambda.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Tail exponents of Z_n / log n against I(μ ± ε).
    LdpTails {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        #[arg(long)]
        n: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = TailSide::Upper)]
        side: TailSide,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Π_n(z) Γ(z+1) / n^z, which tends to 1.
    GaussCheck {
        #[arg(long)]
        z: String,
        #[arg(long)]
        n: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncated compound-Poisson pmf of W = X_1 + … + X_N, N ~ Poisson(1).
    CpPmf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Convexity, monotonicity, growth and minimum checks on the rate function.
    RateProps {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

/// A report that was written but failed its check.
fn invariant(message: String) -> Failure {
    Failure { code: 4, message }
}

type Outcome = Result<String, Failure>;

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, Failure> {
    seed.ok_or_else(|| config(format!("{command} is stochastic here and needs --seed")))
}

fn out_path(out: Option<PathBuf>, default_name: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(default_name)
    })
}

fn write(path: &PathBuf, body: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| config(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("urnlab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Simulate {
            common,
            start,
            n,
            samples,
            seed,
            method,
            check,
        } => simulate(common, start, &n, samples, seed, method, check),
        Command::ExactPmf { common, start, n } => {
            let dist = parse::distribution(&common.dist)?;
            let u0 = parse::start(&start.u0, dist.dim())?;
            let pmf = exact_pmf(n, &u0, &dist)?;
            let path = out_path(common.out, "exact-pmf.csv");
            write(&path, &pmf.to_csv())?;
            let mean: Vec<String> = pmf.mean().iter().map(|&m| g12(m)).collect();
            Ok(format!(
                "exact-pmf: n={n}, {} support points, mean ({}) -> {}",
                pmf.iter().count(),
                mean.join(", "),
                path.display()
            ))
        }
        Command::BeReport {
            common,
            start,
            n,
            mode,
            samples,
            seed,
        } => be_report(common, start, &n, mode, samples, seed, false),
        Command::BeReportD {
            common,
            start,
            n,
            mode,
            samples,
            seed,
        } => be_report(common, start, &n, mode, samples, seed, true),
        Command::LdpLambda { common, lambda, n } => {
            let dist = parse::distribution(&common.dist)?;
            let grid = parse::grid(&lambda, dist.dim())?;
            let ns = parse::n_list(&n)?;
            let mut rows = Vec::with_capacity(grid.len() * ns.len());
            for l in &grid {
                for &n in &ns {
                    rows.push(LambdaRow::compute(l, n, &dist)?);
                }
            }
            let path = out_path(common.out, "ldp-lambda.csv");
            write(&path, &lambda_n_csv(&rows))?;
            let worst = rows.iter().map(|r| r.gap.abs()).fold(0.0, f64::max);
            Ok(format!(
                "ldp-lambda: {} rows, max |Lambda_n - (e-1)| = {} -> {}",
                rows.len(),
                g12(worst),
                path.display()
            ))
        }
        Command::LdpRate { common, x, format } => {
            let dist = parse::distribution(&common.dist)?;
            let grid = parse::grid(&x, dist.dim())?;
            let results = grid
                .iter()
                .map(|p| rate_function_numeric(p, &dist))
                .collect::<Result<Vec<_>, _>>()?;
            let (body, ext) = match format {
                Format::Json => {
                    let text = if results.len() == 1 {
                        serde_json::to_string_pretty(&results[0])
                    } else {
                        serde_json::to_string_pretty(&results)
                    };
                    (text.map_err(|e| config(e.to_string()))? + "\n", "json")
                }
                Format::Csv => {
                    if dist.dim() != 1 {
                        return Err(config("CSV rate output is one-dimensional; use --format json"));
                    }
                    let rows: Vec<_> = results
                        .into_iter()
                        .map(|r| {
                            let closed = dist.preset().and_then(|p| rate_function_closed(p, r.x[0]).ok());
                            (r, closed)
                        })
                        .collect();
                    let text = rate_rows_csv(&rows);
                    let summary_rows = rows.len();
                    let path = out_path(common.out, "ldp-rate.csv");
                    write(&path, &text)?;
                    return Ok(format!("ldp-rate: {summary_rows} points -> {}", path.display()));
                }
            };
            let path = out_path(common.out, &format!("ldp-rate.{ext}"));
            write(&path, &body)?;
            let first = &results[0];
            Ok(format!(
                "ldp-rate: {} points, I = {} at the first ({}) -> {}",
                results.len(),
                g12(first.value),
                serde_json::to_value(first.status).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
                path.display()
            ))
        }
        Command::LdpTails {
            common,
            start,
            n,
            eps,
            side,
            mode,
            samples,
            seed,
        } => {
            let dist = parse::distribution(&common.dist)?;
            let u0 = parse::start(&start.u0, dist.dim())?;
            let ns = parse::n_list(&n)?;
            let exact_limit = match mode {
                Mode::Exact => u64::MAX,
                Mode::Mc => 0,
                Mode::Auto => AUTO_EXACT_1D,
            };
            let monte_carlo = if ns.iter().any(|&n| n > exact_limit) {
                Some((samples, require_seed(seed, "ldp-tails")?))
            } else {
                None
            };
            let options = TailReportOptions {
                side: match side {
                    TailSide::Upper => Side::Upper,
                    TailSide::Lower => Side::Lower,
                },
                exact_limit,
                monte_carlo,
            };
            let records = tail_exponent_report(&ns, eps, &dist, &u0, options)?;
            let path = out_path(common.out, "ldp-tails.csv");
            write(&path, &tail_records_csv(&records))?;
            let last = records.last().ok_or_else(|| config("empty n list"))?;
            Ok(format!(
                "ldp-tails: {} rows, exponent {} at n={} vs target {} -> {}",
                records.len(),
                g12(last.exponent),
                last.n,
                g12(last.target_i),
                path.display()
            ))
        }
        Command::GaussCheck { z, n, out } => {
            let zs = parse::reals(&z)?;
            let ns = parse::n_list(&n)?;
            let mut body = String::from("z,n,log_Pi_n,ratio\n");
            let mut worst = 0.0f64;
            for &z in &zs {
                for &n in &ns {
                    let ratio = gauss_ratio(z, n)?;
                    worst = worst.max((ratio - 1.0).abs());
                    let _ = writeln!(body, "{},{n},{},{}", g12(z), g12(log_product_pi(z, n)?), g12(ratio));
                }
            }
            let path = out_path(out, "gauss-check.csv");
            write(&path, &body)?;
            if zs.len() * ns.len() == 1 {
                let ratio = gauss_ratio(zs[0], ns[0])?;
                Ok(format!("gauss-check: ratio {} -> {}", g12(ratio), path.display()))
            } else {
                Ok(format!("gauss-check: max |ratio - 1| = {} -> {}", g12(worst), path.display()))
            }
        }
        Command::CpPmf { common, tol } => {
            let dist = parse::distribution(&common.dist)?;
            let cp = compound_poisson_pmf(&dist, tol)?;
            let path = out_path(common.out, "cp-pmf.csv");
            write(&path, &cp.pmf.to_csv())?;
            Ok(format!(
                "cp-pmf: {} terms, truncated mass {}, {} support points -> {}",
                cp.terms,
                g12(cp.deficit),
                cp.pmf.iter().count(),
                path.display()
            ))
        }
        Command::RateProps { common, x } => {
            let dist = parse::distribution(&common.dist)?;
            let grid = parse::grid(&x, dist.dim())?;
            let report = rate_properties(&dist, &grid)?;
            let path = out_path(common.out, "rate-props.json");
            let body = serde_json::to_string_pretty(&report).map_err(|e| config(e.to_string()))? + "\n";
            write(&path, &body)?;
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            if failed.is_empty() {
                Ok(format!("rate-props: all checks passed on {} points -> {}", grid.len(), path.display()))
            } else {
                Err(invariant(format!("rate-props: failed {} -> {}", failed.join(", "), path.display())))
            }
        }
    }
}

fn simulate(
    common: Common,
    start: Start,
    n: &str,
    samples: u64,
    seed: Option<u64>,
    method: Method,
    check: bool,
) -> Outcome {
    let seed = require_seed(seed, "simulate")?;
    let dist = parse::distribution(&common.dist)?;
    let u0 = parse::start(&start.u0, dist.dim())?;
    let ns = parse::n_list(n)?;
    if samples == 0 {
        return Err(config("--samples must be positive"));
    }
    let d = dist.dim();
    let mut body = String::new();
    for k in 1..=d {
        let _ = write!(body, "{}c{k},", if k == 1 { "n," } else { "" });
    }
    body.push_str("count\n");
    let sampler = PmfSampler::new(&u0);
    let mut worst_p = f64::INFINITY;
    let mut failures = Vec::new();
    for &n in &ns {
        let counts = match method {
            Method::Direct => parallel_counts(samples, seed, |rng| {
                sample_z_direct(n, &u0, &dist, rng).expect("dimensions checked when parsing u0")
            }),
            Method::Repr => parallel_counts(samples, seed, |rng| sample_z_repr(n, &sampler, &dist, rng)),
        };
        for (p, c) in &counts {
            let coords: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
            let _ = writeln!(body, "{n},{},{c}", coords.join(","));
        }
        if check {
            let gof = chi_square_gof(&counts, &exact_pmf(n, &u0, &dist)?)?;
            worst_p = worst_p.min(gof.p_value);
            if !gof.passes(GOF_SIGNIFICANCE) {
                failures.push(format!("n={n} (p={}, outside={})", g12(gof.p_value), gof.outside));
            }
        }
    }
    let path = out_path(common.out, "simulate.csv");
    write(&path, &body)?;
    if !failures.is_empty() {
        return Err(invariant(format!(
            "simulate: chi-square rejected at {}: {} -> {}",
            GOF_SIGNIFICANCE,
            failures.join(", "),
            path.display()
        )));
    }
    let check_note = if check { format!(", min chi-square p = {}", g12(worst_p)) } else { String::new() };
    Ok(format!(
        "simulate: {} n values x {samples} draws{check_note} -> {}",
        ns.len(),
        path.display()
    ))
}

fn be_report(
    common: Common,
    start: Start,
    n: &str,
    mode: Mode,
    samples: u64,
    seed: Option<u64>,
    multivariate: bool,
) -> Outcome {
    let name = if multivariate { "be-report-d" } else { "be-report" };
    let dist: IncrementDistribution = parse::distribution(&common.dist)?;
    if !multivariate && dist.dim() != 1 {
        return Err(config("be-report is one-dimensional; use be-report-d"));
    }
    let u0: LatticePmf = parse::start(&start.u0, dist.dim())?;
    let ns = parse::n_list(n)?;
    let limit = if dist.dim() == 1 { AUTO_EXACT_1D } else { AUTO_EXACT_DD };
    let needs_mc = match mode {
        Mode::Exact => false,
        Mode::Mc => true,
        Mode::Auto => ns.iter().any(|&n| n > limit),
    };
    let seed = if needs_mc { Some(require_seed(seed, name)?) } else { None };
    let mut reports: Vec<BeReport> = Vec::with_capacity(ns.len());
    for &n in &ns {
        let exact = match mode {
            Mode::Exact => true,
            Mode::Mc => false,
            Mode::Auto => n <= limit,
        };
        let dm = if exact {
            DistanceMode::Exact
        } else {
            DistanceMode::MonteCarlo {
                samples,
                seed: seed.expect("seed resolved above"),
            }
        };
        let report = if multivariate {
            be_report_d(n, &dist, &u0, dm)?
        } else {
            be_report_1d(n, &dist, &u0, dm)?
        };
        reports.push(report);
    }
    let path = out_path(common.out, &format!("{name}.csv"));
    write(&path, &reports_to_csv(&reports))?;
    let max_ratio = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    // a Monte Carlo distance may exceed the bound only by its error bar
    let violations: Vec<u64> = reports
        .iter()
        .filter(|r| r.theorem_applies && r.distance - r.error_bar.unwrap_or(0.0) > r.bound)
        .map(|r| r.n)
        .collect();
    if !violations.is_empty() {
        return Err(invariant(format!(
            "{name}: distance above the bound at n = {violations:?} -> {}",
            path.display()
        )));
    }
    Ok(format!("{name}: {} rows, max ratio {} -> {}", reports.len(), g12(max_ratio), path.display()))
}
