// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hessian_barrier::ahba::{ahba_solve, AhbaConfig};
use hessian_barrier::bench::{growth_ratios, load_dir, run_bench, write_bench_csv, BenchSettings};
use hessian_barrier::cones::ZetaMode;
use hessian_barrier::io::{load_problem_file, write_trace_csv, ReportFile};
use hessian_barrier::kkt::{check_2kkt, check_eps_kkt};
use hessian_barrier::report::{Algorithm, SolveReport, SolveStatus};
use hessian_barrier::sahba::{sahba_solve, SahbaConfig};
use hessian_barrier::selftest::run_selftest;
use hessian_barrier::Error;

const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_MAX_ITER: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hbsolve",
    version,
    about = "Adaptive Hessian-barrier solvers for conic problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Ahba,
    Sahba,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Ahba => Algorithm::Ahba,
            Algo::Sahba => Algorithm::Sahba,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// step bound from the local norm
    Sc,
    /// step bound from the cone's sigma function
    Ss,
}

impl From<Mode> for ZetaMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sc => ZetaMode::GeneralSc,
            Mode::Ss => ZetaMode::SelfScaled,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file
    Solve {
        #[arg(long, value_enum, default_value = "ahba")]
        algo: Algo,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        l0: f64,
        #[arg(long, default_value_t = 1.0)]
        m0: f64,
        #[arg(long, value_enum, default_value = "ss")]
        mode: Mode,
        /// restart from eps0 and halve down to eps (first-order method only)
        #[arg(long)]
        anytime: bool,
        #[arg(long, default_value_t = 1.0)]
        eps0: f64,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        problem: PathBuf,
    },
    /// Re-check the certificate stored in a report
    CheckKkt {
        #[arg(long)]
        eps1: f64,
        #[arg(long)]
        eps2: Option<f64>,
        report: PathBuf,
        problem: PathBuf,
    },
    /// Iterations-versus-eps table over a directory of problems
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        eps_grid: Vec<f64>,
        #[arg(long, value_enum, default_value = "ahba")]
        algo: Algo,
        #[arg(long, default_value_t = 1.0)]
        l0: f64,
        #[arg(long, default_value_t = 1.0)]
        m0: f64,
        #[arg(long, value_enum, default_value = "ss")]
        mode: Mode,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        problems: PathBuf,
    },
    /// Run the barrier, sigma and cubic-solver consistency suites
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            });
        }
    };
    let code = match cli.command {
        Command::Solve {
            algo,
            eps,
            l0,
            m0,
            mode,
            anytime,
            eps0,
            max_iters,
            trace,
            report,
            problem,
        } => {
            let args = SolveArgs {
                algo,
                eps,
                l0,
                m0,
                mode,
                anytime,
                eps0,
                max_iters,
                trace,
                report,
            };
            solve(&args, &problem)
        }
        Command::CheckKkt {
            eps1,
            eps2,
            report,
            problem,
        } => check_kkt(eps1, eps2, &report, &problem),
        Command::Bench {
            eps_grid,
            algo,
            l0,
            m0,
            mode,
            max_iters,
            out,
            problems,
        } => {
            let mut settings = BenchSettings::new(algo.into(), eps_grid);
            settings.l0 = l0;
            settings.m0 = m0;
            settings.mode = mode.into();
            if let Some(n) = max_iters {
                settings.max_iters = n;
            }
            bench(&settings, &problems, out.as_deref())
        }
        Command::Selftest { seed } => selftest(seed),
    };
    ExitCode::from(code)
}

fn input_error(e: &Error) -> u8 {
    eprintln!("error: {e}");
    match e {
        Error::Validation { .. } | Error::Parse(_) | Error::Io(_) | Error::NoInitialPoint => {
            EXIT_INVALID
        }
        _ => EXIT_FAIL,
    }
}

struct SolveArgs {
    algo: Algo,
    eps: f64,
    l0: f64,
    m0: f64,
    mode: Mode,
    anytime: bool,
    eps0: f64,
    max_iters: Option<usize>,
    trace: Option<PathBuf>,
    report: Option<PathBuf>,
}

fn solve(args: &SolveArgs, path: &Path) -> u8 {
    let (file, problem) = match load_problem_file(path) {
        Ok(p) => p,
        Err(e) => return input_error(&e),
    };
    let want_trace = args.trace.is_some();
    let outcome = match args.algo {
        Algo::Ahba => {
            let mut cfg = AhbaConfig::new(args.eps);
            cfg.l0 = args.l0;
            cfg.mode = args.mode.into();
            cfg.anytime = args.anytime;
            cfg.eps0 = args.eps0;
            cfg.trace = want_trace;
            if let Some(n) = args.max_iters {
                cfg.max_iters = n;
            }
            ahba_solve(&problem, &cfg)
        }
        Algo::Sahba => {
            if args.anytime {
                eprintln!("error: --anytime applies to --algo ahba only");
                return EXIT_INVALID;
            }
            let mut cfg = SahbaConfig::new(args.eps);
            cfg.m0 = args.m0;
            cfg.mode = args.mode.into();
            cfg.trace = want_trace;
            if let Some(n) = args.max_iters {
                cfg.max_iters = n;
            }
            sahba_solve(&problem, &cfg)
        }
    };
    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            let code = input_error(&e);
            if let Some(out) = &args.report {
                let failed = SolveReport::failed(args.algo.into(), args.eps, &e);
                let _ = std::fs::write(
                    out,
                    ReportFile::new(&failed, &problem, file.name.clone()).to_json(),
                );
            }
            return code;
        }
    };

    if let Some(out) = &args.trace {
        let written = File::create(out)
            .map_err(Error::from)
            .and_then(|f| write_trace_csv(BufWriter::new(f), &report.trace));
        if let Err(e) = written {
            eprintln!("error: writing trace {}: {e}", out.display());
            return EXIT_FAIL;
        }
    }
    let summary = ReportFile::new(&report, &problem, file.name.clone());
    if let Some(out) = &args.report {
        if let Err(e) = std::fs::write(out, summary.to_json()) {
            eprintln!("error: writing report {}: {e}", out.display());
            return EXIT_FAIL;
        }
    }

    println!("status: {}", summary.status);
    println!(
        "iterations: {}  inner trials: {}",
        summary.iterations, summary.inner_trials
    );
    println!("f: {:.10e} -> {:.10e}", summary.f_initial, summary.f_final);
    if let Some(c) = &summary.certificate {
        println!(
            "grad residual: {:.3e}  complementarity: {:.3e}  |Ax-b|: {:.3e}  interior margin: {:.3e}",
            c.grad_residual, c.complementarity, c.eq_residual, c.interior_margin
        );
    }
    if let Some(v) = &summary.verdict {
        println!(
            "certificate check at eps = {:.3e}: {}",
            v.eps,
            if v.passed() { "pass" } else { "FAIL" }
        );
    }
    match report.status {
        SolveStatus::KktReached => EXIT_OK,
        SolveStatus::MaxIter => EXIT_MAX_ITER,
        SolveStatus::Error(_) => EXIT_FAIL,
    }
}

fn check_kkt(eps1: f64, eps2: Option<f64>, report: &Path, problem: &Path) -> u8 {
    let (_, problem) = match load_problem_file(problem) {
        Ok(p) => p,
        Err(e) => return input_error(&e),
    };
    let report = match ReportFile::load(report) {
        Ok(r) => r,
        Err(e) => return input_error(&e),
    };
    let Some(cert) = report.certificate else {
        eprintln!(
            "error: report carries no certificate (status {})",
            report.status
        );
        return EXIT_FAIL;
    };
    let verdict = match eps2 {
        Some(e2) => match check_2kkt(&problem, &cert, eps1, e2) {
            Ok(v) => v,
            Err(e) => return input_error(&e),
        },
        None => check_eps_kkt(&problem, &cert, eps1),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&verdict).expect("verdicts serialize")
    );
    if verdict.passed() {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn bench(settings: &BenchSettings, dir: &Path, out: Option<&Path>) -> u8 {
    if settings.eps_grid.iter().any(|e| !(*e > 0.0)) {
        eprintln!("error: every eps in the grid must be positive");
        return EXIT_INVALID;
    }
    let cases = match load_dir(dir) {
        Ok(c) => c,
        Err(e) => return input_error(&e),
    };
    let rows = run_bench(&cases, settings);
    let written = match out {
        Some(p) => File::create(p)
            .map_err(Error::from)
            .and_then(|f| write_bench_csv(BufWriter::new(f), &rows)),
        None => write_bench_csv(io::stdout().lock(), &rows),
    };
    if let Err(e) = written {
        eprintln!("error: writing table: {e}");
        return EXIT_FAIL;
    }
    for (name, from, to, ratio) in growth_ratios(&rows) {
        eprintln!("{name}: iterations x{ratio:.2} from eps {from:e} to {to:e}");
    }
    if rows.iter().any(|r| r.status.starts_with("error")) {
        EXIT_FAIL
    } else {
        EXIT_OK
    }
}

fn selftest(seed: u64) -> u8 {
    let results = run_selftest(seed);
    for r in &results {
        println!(
            "{:<8} {:>4} cases  {:>3} failures  max error {:.3e}  {}",
            r.name,
            r.cases,
            r.failures,
            r.max_error,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    if results.iter().all(|r| r.passed()) {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}
