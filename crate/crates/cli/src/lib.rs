//! Command-line front end for `fq_circle`: one subcommand per experiment,
//! JSON or CSV output, and an exit code that separates usage errors (1),
//! failed checks (2) and refused sizes (3).

pub mod emit;
pub mod instance;
pub mod suites;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fq_circle::circle::Route;
use fq_circle::expsums::Instance;
use fq_circle::polyring::Poly;
use fq_circle::DEFAULT_FEASIBILITY_CAP;
use serde_json::json;

use emit::{Format, Report, Table};
use instance::InstanceFile;
use suites::{ExpsumSuite, OscSuite};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fq_circle::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use fq_circle::Error as E;
        match self {
            CliError::Core(E::Infeasible { .. }) => 3,
            CliError::Core(E::Precision(_) | E::ConstancyViolation(_)) => 2,
            _ => 1,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fqcircle", version, about = "Exact circle-method experiments for quadrics over F_q[t]")]
#[command(after_help = "Polynomials are written as c*t^k terms joined by '+', e.g. t^2+2*t+1.\n\
Exit codes: 0 success, 1 usage error, 2 check failed, 3 instance too large for --cap.")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for every sampled check.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; 1 gives byte-identical output across runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Largest enumeration the run may attempt.
    #[arg(long, global = true, default_value_t = DEFAULT_FEASIBILITY_CAP)]
    pub cap: u128,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RouteArg {
    Auto,
    Direct,
    Dual,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::Auto => Route::Auto,
            RouteArg::Direct => Route::Direct,
            RouteArg::Dual => Route::Dual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DensityMode {
    /// `σ_ϖ` level by level at one prime (needs --prime).
    Sigma,
    /// Both sides of the `(N)!` identity (needs --n).
    Partial,
    /// The singular series over primes of degree at most --deg-bound.
    Series,
    /// Tail increments of the singular series up to degree --t-deg.
    Tail,
    /// Stabilization at the first level for good primes up to --deg-bound.
    Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CircleSuite {
    /// `N` by enumeration against the assembled expansion.
    Identity,
    /// Vanishing of the integral at ordinary frequencies (formula Q).
    Ordinary,
    /// Factorization through the centre below the threshold.
    Factorization,
    /// Exceptional constants outside the dual cone.
    Exceptional,
    /// Both descriptions of the cut-off region.
    Region,
    /// The zero-frequency integral against its shape.
    Zero,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Delta expansion against the indicator of n = 0.
    DeltaCheck {
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long = "Q")]
        big_q: i64,
        #[arg(long, default_value_t = 4)]
        deg_n: usize,
    },
    /// Exhaustive partition check of the dissection of the torus.
    Dissect {
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long = "Q")]
        big_q: i64,
    },
    /// Closed forms of oscillatory integrals against direct integration.
    OscCheck {
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, value_enum, default_value_t = OscSuite::All)]
        suite: OscSuite,
    },
    /// Exponential sums: evaluation paths, multiplicativity, closed forms, average scan.
    Expsum {
        /// Instance JSON (path or inline); defaults to two fixed instances.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long, value_enum, default_value_t = ExpsumSuite::All)]
        suite: ExpsumSuite,
        #[arg(long, default_value_t = 2)]
        max_deg_r: usize,
        /// Largest modulus degree in the average scan.
        #[arg(long, default_value_t = 3)]
        x_deg: usize,
    },
    /// Weil bound for Kloosterman and Salié sums over all small (m, n, c).
    WeilScan {
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, default_value_t = 2)]
        deg: usize,
    },
    /// Local densities and the singular series.
    Density {
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum, default_value_t = DensityMode::Stability)]
        mode: DensityMode,
        #[arg(long)]
        prime: Option<String>,
        #[arg(long, default_value_t = 2)]
        k_max: u32,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2)]
        deg_bound: usize,
        #[arg(long, default_value_t = 3)]
        t_deg: usize,
    },
    /// The weighted count against the delta-method assembly, and the vanishing checks.
    CircleCheck {
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum, default_value_t = CircleSuite::Identity)]
        suite: CircleSuite,
        #[arg(long)]
        alpha0: Option<i64>,
        /// Override the expansion parameter Q.
        #[arg(long = "Q")]
        big_q: Option<i64>,
        #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
        route: RouteArg,
        /// Threshold exponent for the exceptional suite.
        #[arg(long)]
        eta: Option<i64>,
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
    /// The weighted count N(w, λ) by enumeration.
    Count {
        #[arg(long)]
        instance: String,
        #[arg(long)]
        alpha0: Option<i64>,
    },
    /// Search for a solution in the cone and the congruence class.
    Solve {
        #[arg(long)]
        instance: String,
        /// Search deg x_i ≤ this; defaults to the window the cone forces.
        #[arg(long)]
        deg_bound: Option<i64>,
    },
    /// Smallest solvable deg f per residue class for sums of squares.
    ThresholdScan {
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long)]
        deg_g: usize,
        /// Defaults to 4 deg g + 1.
        #[arg(long)]
        max_deg_f: Option<i64>,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        /// Number of residue-class trials to run (0 gives an empty scan).
        #[arg(long, default_value_t = 2)]
        trials: usize,
    },
    /// Absence certificate below the degree threshold and a companion solution above it.
    OptimalityWitness {
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long)]
        g: String,
    },
    /// Build a Morgenstern Cayley graph and report its statistics.
    Morgenstern {
        /// Optional action word; `build` is the only one.
        #[arg(value_parser = ["build"])]
        action: Option<String>,
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        g: String,
        /// Write the edge list here, one `u v` pair per line.
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
    },
}

/// The report and whether its checks passed.
pub struct Outcome {
    pub report: Report,
    pub pass: bool,
}

fn ok(report: Report) -> Outcome {
    Outcome { report, pass: true }
}

fn checked(report: Report, pass: bool) -> Outcome {
    Outcome { report, pass }
}

fn load_instance(arg: &str) -> Result<Instance, CliError> {
    Ok(InstanceFile::read(arg)?.load()?.inst)
}

fn parse_poly(s: &str, q: u32) -> Result<Poly, CliError> {
    Ok(Poly::parse(s, q)?)
}

/// Refuse an enumeration of `q^exp` points above the cap.
fn guard_pow(q: u32, exp: i64, cap: u128) -> Result<(), CliError> {
    let est = (q as u128).checked_pow(exp.max(0) as u32).unwrap_or(u128::MAX);
    Ok(fq_circle::error::guard(est, cap)?)
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::DeltaCheck { q, big_q, deg_n } => {
            guard_pow(*q, *deg_n as i64 + 1 + *big_q + 1, cli.cap)?;
            let r = suites::delta_check(*q, *big_q, *deg_n)?;
            let pass = r.pass;
            Ok(checked(Report::new("delta-check", &r)?, pass))
        }
        Command::Dissect { q, big_q } => {
            let r = suites::dissect(*q, *big_q)?;
            let pass = r.pass;
            Ok(checked(Report::new("dissect", &r)?, pass))
        }
        Command::OscCheck { q, suite } => {
            let r = suites::osc_check(*suite, *q, seed)?;
            let pass = r.pass;
            let table = Table::new(&["family", "cases", "failures", "failing"], &r.rows)?;
            Ok(checked(Report::new("osc-check", &r)?.with_table(table), pass))
        }
        Command::Expsum { instance, suite, max_deg_r, x_deg } => {
            let insts = match instance {
                Some(a) => vec![load_instance(a)?],
                None => suites::default_expsum_instances()?,
            };
            let r = suites::expsum(*suite, &insts, *max_deg_r, *x_deg, seed)?;
            let pass = r.pass;
            let table = Table::new(suites::PATH_HEADERS, &r.paths)?;
            Ok(checked(Report::new("expsum", &r)?.with_table(table), pass))
        }
        Command::WeilScan { q, deg } => {
            guard_pow(*q, 3 * (*deg as i64 + 1) + 1, cli.cap)?;
            let (r, rows) = suites::weil(*q, *deg)?;
            let pass = r.pass;
            let failing: Vec<_> = rows.iter().filter(|x| !x.pass).take(5).cloned().collect();
            let body = json!({"q": r.q, "deg": r.deg, "rows_checked": r.rows_checked, "failures": r.failures, "failing": failing, "pass": r.pass});
            let report = Report::new("weil-scan", &body)?.with_table(Table::new(suites::WEIL_HEADERS, &rows)?);
            Ok(checked(report, pass))
        }
        Command::Density { instance, mode, prime, k_max, n, deg_bound, t_deg } => {
            let inst = load_instance(instance)?;
            match mode {
                DensityMode::Sigma => {
                    let w = prime.as_deref().ok_or_else(|| CliError::Usage("--mode sigma needs --prime".into()))?;
                    let r = suites::sigma(&inst, &parse_poly(w, inst.p())?, *k_max)?;
                    let table = Table::new(&["k", "count", "normalized"], &r.levels)?;
                    Ok(ok(Report::new("density", &r)?.with_table(table)))
                }
                DensityMode::Partial => {
                    let n = n.ok_or_else(|| CliError::Usage("--mode partial needs --n".into()))?;
                    let r = suites::partial(&inst, n)?;
                    let pass = r.equal;
                    Ok(checked(Report::new("density", &r)?, pass))
                }
                DensityMode::Series => {
                    let r = suites::series(&inst, *deg_bound)?;
                    let table = Table::new(&["prime", "stable_at", "status", "sigma", "sigma_approx", "deviation_constant"], &r.factors)?;
                    Ok(ok(Report::new("density", &r)?.with_table(table)))
                }
                DensityMode::Tail => {
                    let r = suites::tail(&inst, *t_deg)?;
                    let table = Table::new(suites::TAIL_HEADERS, &r.rows)?;
                    Ok(ok(Report::new("density", &r)?.with_table(table)))
                }
                DensityMode::Stability => {
                    let r = suites::stability(&inst, *deg_bound)?;
                    let pass = r.pass;
                    let table = Table::new(suites::STABILITY_HEADERS, &r.rows)?;
                    Ok(checked(Report::new("density", &r)?.with_table(table), pass))
                }
            }
        }
        Command::CircleCheck { instance, suite, alpha0, big_q, route, eta, samples } => {
            let loaded = InstanceFile::read(instance)?.load()?;
            let inst = &loaded.inst;
            let w = loaded.weight(*alpha0, *big_q)?;
            guard_pow(inst.p(), w.rho * inst.dim() as i64, cli.cap)?;
            match suite {
                CircleSuite::Identity => {
                    let r = suites::circle_identity(inst, &w, (*route).into())?;
                    let pass = r.equal;
                    Ok(checked(Report::new("circle-check", &r)?, pass))
                }
                CircleSuite::Ordinary => {
                    // ordinary vanishing is claimed at the formula value of Q
                    let w = if big_q.is_some() { w } else { w.with_q(w.q_formula)? };
                    let r = suites::ordinary(inst, &w, *samples, seed)?;
                    let pass = r.pass;
                    Ok(checked(Report::new("circle-check", &r)?, pass))
                }
                CircleSuite::Factorization => {
                    let r = suites::factorization(inst, &w, cli.cap.min(u128::from(u32::MAX)), *samples, seed)?;
                    let pass = r.pass;
                    Ok(checked(Report::new("circle-check", &r)?, pass))
                }
                CircleSuite::Exceptional => {
                    let r = suites::exceptional(inst, &w, &loaded.cone, *eta)?;
                    let pass = r.pass;
                    let table = Table::new(&["r", "c", "kappa", "in_dual_cone", "margin", "magnitude", "bound", "vanishes"], &r.report.rows)?;
                    Ok(checked(Report::new("circle-check", &r)?.with_table(table), pass))
                }
                CircleSuite::Region => {
                    let rows = suites::region(inst, &w)?;
                    let pass = rows.iter().all(|(_, r)| r.pass);
                    let body: Vec<_> = rows.iter().map(|(route, r)| json!({"route": route, "cases": r.cases, "failures": r.failures, "pass": r.pass})).collect();
                    Ok(checked(Report::new("circle-check", &json!({"routes": body, "pass": pass}))?, pass))
                }
                CircleSuite::Zero => {
                    let rows = suites::zero_rows(inst, &w)?;
                    let table = Table::new(&["deg_r", "value", "ratio"], &rows)?;
                    Ok(ok(Report::new("circle-check", &json!({"Q": w.big_q, "rows": rows}))?.with_table(table)))
                }
            }
        }
        Command::Count { instance, alpha0 } => {
            let loaded = InstanceFile::read(instance)?.load()?;
            let w = loaded.weight(*alpha0, None)?;
            guard_pow(loaded.inst.p(), w.rho * loaded.inst.dim() as i64, cli.cap)?;
            Ok(ok(Report::new("count", &suites::count(&loaded.inst, &w)?)?))
        }
        Command::Solve { instance, deg_bound } => {
            let loaded = InstanceFile::read(instance)?.load()?;
            let r = suites::solve_instance(&loaded.inst, &loaded.cone, *deg_bound)?;
            let pass = r.verified != Some(false);
            Ok(checked(Report::new("solve", &r)?, pass))
        }
        Command::ThresholdScan { q, d, deg_g, max_deg_f, samples, trials } => {
            let max_deg_f = max_deg_f.unwrap_or(4 * *deg_g as i64 + 1);
            let rows = suites::threshold(*q, *d, *deg_g, max_deg_f, *samples, *trials, seed)?;
            let body = json!({"q": q, "d": d, "deg_g": deg_g, "max_deg_f": max_deg_f, "samples": samples, "rows": rows});
            Ok(ok(Report::new("threshold-scan", &body)?.with_table(Table::new(suites::THRESHOLD_HEADERS, &rows)?)))
        }
        Command::OptimalityWitness { q, d, g } => {
            let r = suites::optimality(*q, *d, &parse_poly(g, *q)?)?;
            let pass = r.absent && r.companion_verified;
            Ok(checked(Report::new("optimality-witness", &r)?, pass))
        }
        Command::Morgenstern { action: _, q, nu, g, edges, iterations } => {
            let gp = parse_poly(g, *q)?;
            guard_pow(*q, 3 * gp.deg(), cli.cap)?;
            let run = suites::morgenstern(*q, *nu, &gp, *iterations, seed, edges.is_some())?;
            if let (Some(path), Some(buf)) = (edges, &run.edges) {
                std::fs::write(path, buf)?;
            }
            let pass = suites::graph_ok(&run.stats);
            Ok(checked(Report::new("morgenstern", &run.stats)?, pass))
        }
    }
}

/// Parse, run and write; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return EXIT_USAGE;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
        eprintln!("warning: could not size the thread pool: {e}");
    }
    match run(&cli).and_then(|o| o.report.write(cli.format, cli.output.as_deref()).map(|_| o.pass)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
