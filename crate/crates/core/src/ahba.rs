//! First-order adaptive Hessian-barrier method.
//!
//! Each iteration takes the metric projection `v = -S_x grad F_mu(x)` of the
//! potential gradient, backtracks on a local Lipschitz estimate, and moves
//! with a step that keeps `x + alpha v` strictly inside the cone.

use std::time::Instant;

use nalgebra::DVector;

use crate::cones::ZetaMode;
use crate::error::{Error, Result, ValidationCode};
use crate::kkt::KktCertificate;
use crate::metric::MetricWorkspace;
use crate::problem::{analytic_center, Potential, Problem};
use crate::report::{Algorithm, Phase, SolveReport, SolveStatus, StepRecord, TraceRecord};

#[derive(Debug, Clone)]
pub struct AhbaConfig {
    pub eps: f64,
    pub l0: f64,
    pub max_iters: usize,
    pub max_inner: usize,
    pub mode: ZetaMode,
    /// Run the restart schedule `eps0, eps0/2, ...` down to `eps`.
    pub anytime: bool,
    pub eps0: f64,
    pub trace: bool,
}

impl Default for AhbaConfig {
    fn default() -> Self {
        AhbaConfig {
            eps: 1e-3,
            l0: 1.0,
            max_iters: 1_000_000,
            max_inner: 64,
            mode: ZetaMode::default(),
            anytime: false,
            eps0: 1.0,
            trace: false,
        }
    }
}

impl AhbaConfig {
    pub fn new(eps: f64) -> Self {
        AhbaConfig {
            eps,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::validation(ValidationCode::BadParams, msg));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return bad(format!("l0 must be positive, got {}", self.l0));
        }
        if self.max_inner == 0 {
            return bad("max_inner must be at least 1".into());
        }
        if self.anytime && !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad(format!("eps0 must be positive, got {}", self.eps0));
        }
        Ok(())
    }
}

/// Solves from the 1-analytic center of the feasible set (or runs the restart
/// schedule when `cfg.anytime` is set).
pub fn ahba_solve(problem: &Problem, cfg: &AhbaConfig) -> Result<SolveReport> {
    if cfg.anytime {
        return ahba_restart_solve(problem, cfg, cfg.eps0);
    }
    cfg.validate()?;
    let clock = Instant::now();
    let center = analytic_center(problem, 1.0)?;
    let mut trace = Vec::new();
    if cfg.trace {
        center_trace(problem, &center, &clock, &mut trace);
    }
    let mut report: SolveReport = run(problem, cfg, center.x, cfg.l0, &clock, trace)?.into();
    report.center_iterations = center.iterations;
    Ok(report)
}

/// Worst-case iteration count `4 (f0 - f_min + eps)(M nu + eps) / eps^2`.
pub fn iteration_bound(f0: f64, f_min: f64, m: f64, nu: f64, eps: f64) -> f64 {
    (4.0 * (f0 - f_min + eps) * (m * nu + eps) / (eps * eps)).ceil()
}

/// Worst-case line-search trial count after `k` iterations, `2(k+1) + log2(M / L0)`.
pub fn inner_trial_bound(k: usize, m: f64, l0: f64) -> f64 {
    2.0 * (k as f64 + 1.0) + (m / l0).log2()
}

/// Number of halvings from `eps0` to `eps`.
pub fn restart_count(eps0: f64, eps: f64) -> usize {
    if eps0 <= eps {
        0
    } else {
        (eps0 / eps).log2().ceil() as usize
    }
}

/// Runs with `eps_i = eps0 / 2^i`, `i = 0..p`, the last run at `cfg.eps`,
/// each warm-started from the previous output point and Lipschitz estimate.
pub fn ahba_restart_solve(problem: &Problem, cfg: &AhbaConfig, eps0: f64) -> Result<SolveReport> {
    let base = AhbaConfig {
        anytime: false,
        eps0,
        ..cfg.clone()
    };
    base.validate()?;
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::validation(
            ValidationCode::BadParams,
            format!("eps0 must be positive, got {eps0}"),
        ));
    }
    let p = restart_count(eps0, cfg.eps);
    let clock = Instant::now();
    let center = analytic_center(problem, 1.0)?;
    let mut trace = Vec::new();
    if cfg.trace {
        center_trace(problem, &center, &clock, &mut trace);
    }
    let mut x = center.x;
    let mut l = cfg.l0;
    let mut total: Option<SolveReport> = None;
    for i in 0..=p {
        let eps_i = if i == p {
            cfg.eps
        } else {
            eps0 / 2f64.powi(i as i32)
        };
        let run_cfg = AhbaConfig {
            eps: eps_i,
            max_iters: cfg.max_iters,
            ..base.clone()
        };
        let mut r = run(
            problem,
            &run_cfg,
            x.clone(),
            l,
            &clock,
            std::mem::take(&mut trace),
        )?;
        trace = std::mem::take(&mut r.trace);
        l = r.l_final;
        if let Some(cert) = &r.report.certificate {
            x = cert.x.clone();
        }
        let stop = r.report.status != SolveStatus::KktReached;
        total = Some(match total {
            None => r.report,
            Some(mut acc) => {
                let offset = acc.iterations;
                acc.steps.extend(r.report.steps.into_iter().map(|mut s| {
                    s.k += offset;
                    s
                }));
                acc.iterations += r.report.iterations;
                acc.inner_trials += r.report.inner_trials;
                acc.m_hat = acc.m_hat.max(r.report.m_hat);
                acc.status = r.report.status;
                acc.eps = r.report.eps;
                acc.mu = r.report.mu;
                acc.f_final = r.report.f_final;
                acc.certificate = r.report.certificate;
                acc.restarts = i;
                acc
            }
        });
        if stop {
            break;
        }
    }
    let mut report = total.expect("at least one run");
    report.l_initial = cfg.l0;
    report.center_iterations = center.iterations;
    report.trace = trace;
    Ok(report)
}

struct RunOutput {
    report: SolveReport,
    trace: Vec<TraceRecord>,
    l_final: f64,
}

impl From<RunOutput> for SolveReport {
    fn from(r: RunOutput) -> SolveReport {
        let mut report = r.report;
        report.trace = r.trace;
        report
    }
}

fn run(
    problem: &Problem,
    cfg: &AhbaConfig,
    x0: DVector<f64>,
    l_start: f64,
    clock: &Instant,
    trace: Vec<TraceRecord>,
) -> Result<RunOutput> {
    let nu = problem.nu();
    let mu = cfg.eps / nu;
    let pot = Potential::new(problem, mu)?;
    let stop_tol = cfg.eps / nu.sqrt();
    let fs = problem.feasible();
    let mut x = x0;
    let mut l = l_start;
    let mut m_hat = 0.0f64;
    let mut inner_total = 0usize;
    let mut steps = Vec::new();
    let mut trace = trace;
    let f_initial = problem.f_checked(&x, 0)?;
    let mut last = None;

    for k in 0..=cfg.max_iters {
        let ws = MetricWorkspace::new(fs, problem.barrier(), &x)?;
        let local = ws.local();
        let fx = problem.f_checked(&x, k)?;
        let gf = problem.grad_checked(&x, k)?;
        let g_pot = &gf + local.grad() * mu;
        let f_mu = fx + mu * local.value();
        let (v, y) = ws.project(&g_pot);
        let v_norm = local.local_norm(&v);
        let s = &gf - fs.adjoint(&y);

        if cfg.trace {
            let mut rec = TraceRecord::blank(k, Phase::Outer, clock.elapsed().as_nanos());
            rec.f = fx;
            rec.f_mu = f_mu;
            rec.v_norm_x = v_norm;
            rec.l_estimate = l;
            rec.grad_residual = (&g_pot - fs.adjoint(&y)).norm();
            rec.complementarity = s.dot(&x).abs();
            trace.push(rec);
        }

        if v_norm < stop_tol || k == cfg.max_iters {
            let status = if v_norm < stop_tol {
                SolveStatus::KktReached
            } else {
                SolveStatus::MaxIter
            };
            last = Some((status, x.clone(), y, fx));
            break;
        }

        let zeta = local.zeta(&v, cfg.mode);
        let alpha_cap = if zeta > 0.0 {
            1.0 / (2.0 * zeta)
        } else {
            f64::INFINITY
        };
        let slope = gf.dot(&v);
        let slack = 1e-12 * (1.0 + fx.abs());
        let mut accepted = None;
        for i in 0..cfg.max_inner {
            let c = l * 2f64.powi(i as i32);
            let alpha = (1.0 / (c + 2.0 * mu)).min(alpha_cap);
            let z = &x + &v * alpha;
            let fz = problem.f_checked(&z, k)?;
            let model = fx + alpha * slope + 0.5 * c * alpha * alpha * v_norm * v_norm;
            inner_total += 1;
            let ok = fz <= model + slack;
            if cfg.trace {
                let mut rec = TraceRecord::blank(k, Phase::Inner, clock.elapsed().as_nanos());
                rec.f = fz;
                rec.v_norm_x = v_norm;
                rec.alpha = alpha;
                rec.zeta = zeta;
                rec.l_estimate = c;
                rec.inner_trial = i;
                trace.push(rec);
            }
            if ok {
                accepted = Some((i, c, alpha, z));
                break;
            }
        }
        let (i, c, alpha, z) = accepted.ok_or(Error::MaxInner {
            iteration: k,
            limit: cfg.max_inner,
        })?;
        m_hat = m_hat.max(c);
        // L_{k+1} = 2^{i_k - 1} L_k; the floor only guards against underflow.
        l = (c / 2.0).max(f64::MIN_POSITIVE);
        let f_mu_next = pot.value(&z)?;
        steps.push(StepRecord {
            k,
            f: fx,
            f_mu,
            f_mu_next,
            v_norm,
            alpha,
            zeta,
            l_accepted: c,
            inner_trials: i + 1,
            eq_residual: fs.residual(&z),
            interior_margin: problem.barrier().spec().interior_margin(&z),
            delta: None,
            cubic_r: None,
            model_min_eig: None,
        });
        x = z;
    }

    let (status, x, y, f_final) = last.expect("loop always records its final iterate");
    let certificate = KktCertificate::from_multipliers(problem, x, y)?;
    Ok(RunOutput {
        report: SolveReport {
            algorithm: Algorithm::Ahba,
            status,
            eps: cfg.eps,
            mu,
            nu,
            iterations: steps.len(),
            inner_trials: inner_total,
            l_initial: l_start,
            m_hat,
            f_initial,
            f_final,
            restarts: 0,
            center_iterations: 0,
            eps2_effective: None,
            certificate: Some(certificate),
            steps,
            trace: Vec::new(),
        },
        trace,
        l_final: l,
    })
}

pub(crate) fn center_trace(
    problem: &Problem,
    center: &crate::problem::AnalyticCenter,
    clock: &Instant,
    trace: &mut Vec<TraceRecord>,
) {
    let f = problem.objective().value(&center.x);
    for (k, step) in center.history.iter().enumerate() {
        let mut rec = TraceRecord::blank(k, Phase::AnalyticCenter, clock.elapsed().as_nanos());
        rec.f_mu = step.barrier_value;
        rec.v_norm_x = step.decrement;
        rec.alpha = step.step;
        if k + 1 == center.history.len() {
            rec.f = f;
        }
        trace.push(rec);
    }
}
