//! Iterations-versus-accuracy tables over a directory of problem files.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::ahba::{self, ahba_solve, AhbaConfig};
use crate::cones::ZetaMode;
use crate::error::{Error, Result};
use crate::io::load_problem_file;
use crate::kkt::{check_2kkt, check_eps_kkt};
use crate::problem::Problem;
use crate::report::{Algorithm, SolveReport};
use crate::sahba::{self, sahba_solve, SahbaConfig};

pub struct BenchCase {
    pub name: String,
    pub problem: Problem,
    pub known_fmin: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub algo: Algorithm,
    pub eps_grid: Vec<f64>,
    pub l0: f64,
    pub m0: f64,
    pub mode: ZetaMode,
    pub max_iters: usize,
}

impl BenchSettings {
    pub fn new(algo: Algorithm, eps_grid: Vec<f64>) -> Self {
        BenchSettings {
            algo,
            eps_grid,
            l0: 1.0,
            m0: 1.0,
            mode: ZetaMode::default(),
            max_iters: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub problem: String,
    pub algo: &'static str,
    pub eps: f64,
    pub status: String,
    pub iterations: usize,
    pub inner_trials: usize,
    pub m_hat: f64,
    pub f_initial: f64,
    pub f_final: f64,
    /// Theoretical iteration bound evaluated with the observed `M`, when `f_min` is known.
    pub iteration_bound: Option<f64>,
    pub grad_residual: f64,
    pub complementarity: f64,
    pub kkt_pass: bool,
    pub wall_ms: f64,
}

/// Loads every `*.json` file in `dir`, sorted by file name.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<BenchCase>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let (file, problem) = load_problem_file(&p)?;
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(BenchCase {
                name: file.name.unwrap_or(stem),
                problem,
                known_fmin: file.known_fmin,
            })
        })
        .collect()
}

pub fn solve_once(problem: &Problem, settings: &BenchSettings, eps: f64) -> Result<SolveReport> {
    match settings.algo {
        Algorithm::Ahba => {
            let cfg = AhbaConfig {
                l0: settings.l0,
                mode: settings.mode,
                max_iters: settings.max_iters,
                ..AhbaConfig::new(eps)
            };
            ahba_solve(problem, &cfg)
        }
        Algorithm::Sahba => {
            let cfg = SahbaConfig {
                m0: settings.m0,
                mode: settings.mode,
                max_iters: settings.max_iters,
                ..SahbaConfig::new(eps)
            };
            sahba_solve(problem, &cfg)
        }
    }
}

fn row(case: &BenchCase, settings: &BenchSettings, eps: f64) -> BenchRow {
    let start = Instant::now();
    let outcome = solve_once(&case.problem, settings, eps);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = BenchRow {
        problem: case.name.clone(),
        algo: settings.algo.as_str(),
        eps,
        status: String::new(),
        iterations: 0,
        inner_trials: 0,
        m_hat: f64::NAN,
        f_initial: f64::NAN,
        f_final: f64::NAN,
        iteration_bound: None,
        grad_residual: f64::NAN,
        complementarity: f64::NAN,
        kkt_pass: false,
        wall_ms,
    };
    match outcome {
        Err(e) => row.status = format!("error: {e}"),
        Ok(r) => {
            row.status = r.status.as_str().into();
            row.iterations = r.iterations;
            row.inner_trials = r.inner_trials;
            row.m_hat = r.m_hat;
            row.f_initial = r.f_initial;
            row.f_final = r.f_final;
            let nu = case.problem.nu();
            row.iteration_bound = case.known_fmin.map(|fmin| match settings.algo {
                Algorithm::Ahba => ahba::iteration_bound(r.f_initial, fmin, r.m_hat, nu, eps),
                Algorithm::Sahba => sahba::iteration_bound(r.f_initial, fmin, r.m_hat, nu, eps),
            });
            if let Some(cert) = &r.certificate {
                row.grad_residual = cert.grad_residual;
                row.complementarity = cert.complementarity;
                row.kkt_pass = r.certified()
                    && match (settings.algo, r.eps2_effective) {
                        (Algorithm::Sahba, Some(e2)) => check_2kkt(&case.problem, cert, eps, e2)
                            .map(|v| v.passed())
                            .unwrap_or(false),
                        _ => check_eps_kkt(&case.problem, cert, 2.0 * eps).passed(),
                    };
            }
        }
    }
    row
}

/// Runs every `(problem, eps)` pair; solves run in parallel, rows come back
/// ordered by problem and then by the grid order.
pub fn run_bench(cases: &[BenchCase], settings: &BenchSettings) -> Vec<BenchRow> {
    let jobs: Vec<(usize, f64)> = (0..cases.len())
        .flat_map(|i| settings.eps_grid.iter().map(move |&e| (i, e)))
        .collect();
    jobs.par_iter()
        .map(|&(i, eps)| row(&cases[i], settings, eps))
        .collect()
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Ratio of iteration counts between consecutive grid points of each problem.
pub fn growth_ratios(rows: &[BenchRow]) -> Vec<(String, f64, f64, f64)> {
    rows.windows(2)
        .filter(|w| w[0].problem == w[1].problem)
        .map(|w| {
            let ratio = w[1].iterations.max(1) as f64 / w[0].iterations.max(1) as f64;
            (w[0].problem.clone(), w[0].eps, w[1].eps, ratio)
        })
        .collect()
}
