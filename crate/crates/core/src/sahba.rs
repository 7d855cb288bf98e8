//! Second-order adaptive Hessian-barrier method with cubic regularization.
//!
//! The cubic model of the potential is minimized over `ker A` in null-space
//! coordinates, the regularization constant is found by backtracking on two
//! local smoothness tests, and the method stops once two consecutive
//! directions are short relative to `Delta_k = sqrt(eps / (4 L_k sqrt(nu)))`.

use std::time::Instant;

use nalgebra::DVector;

use crate::ahba::center_trace;
use crate::cones::{LocalBarrier, ZetaMode};
use crate::cubic::{solve_cubic, CubicModel, TOL_CUBIC};
use crate::error::{Error, Result, ValidationCode};
use crate::kkt::KktCertificate;
use crate::metric::reduce_to_nullspace;
use crate::packed::sorted_eigen;
use crate::problem::{analytic_center, Potential, Problem};
use crate::report::{Algorithm, Phase, SolveReport, SolveStatus, StepRecord, TraceRecord};

#[derive(Debug, Clone)]
pub struct SahbaConfig {
    pub eps: f64,
    /// Initial regularization guess; raised to at least `2 * 144 eps`.
    pub m0: f64,
    pub max_iters: usize,
    pub max_inner: usize,
    pub mode: ZetaMode,
    pub trace: bool,
}

impl Default for SahbaConfig {
    fn default() -> Self {
        SahbaConfig {
            eps: 1e-3,
            m0: 1.0,
            max_iters: 1_000_000,
            max_inner: 64,
            mode: ZetaMode::default(),
            trace: false,
        }
    }
}

impl SahbaConfig {
    pub fn new(eps: f64) -> Self {
        SahbaConfig {
            eps,
            ..Default::default()
        }
    }

    /// Lower bound `144 eps` on every regularization estimate.
    pub fn l_floor(&self) -> f64 {
        144.0 * self.eps
    }

    pub fn effective_m0(&self) -> f64 {
        self.m0.max(2.0 * self.l_floor())
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::validation(ValidationCode::BadParams, msg));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.m0 > 0.0 && self.m0.is_finite()) {
            return bad(format!("m0 must be positive, got {}", self.m0));
        }
        if self.max_inner == 0 {
            return bad("max_inner must be at least 1".into());
        }
        Ok(())
    }
}

/// Worst-case iteration count `192 nu^{3/4} sqrt(2M) (f0 - f_min + eps) / eps^{3/2}`.
pub fn iteration_bound(f0: f64, f_min: f64, m: f64, nu: f64, eps: f64) -> f64 {
    (192.0 * nu.powf(0.75) * (2.0 * m).sqrt() * (f0 - f_min + eps) / eps.powf(1.5)).ceil()
}

/// Worst-case line-search trial count after `k` iterations, `2(k+1) + 2 log2(2M / M0)`.
pub fn inner_trial_bound(k: usize, m: f64, m0: f64) -> f64 {
    2.0 * (k as f64 + 1.0) + 2.0 * (2.0 * m / m0).log2()
}

/// Both local smoothness tests for the step `x -> z` with constant `l`.
pub fn so_linesearch_check(
    problem: &Problem,
    x: &DVector<f64>,
    z: &DVector<f64>,
    l: f64,
) -> Result<bool> {
    let local = problem.barrier().at(x)?;
    if let Some(block) = problem.barrier().spec().first_non_interior(z) {
        return Err(Error::NotInterior { block });
    }
    let fx = problem.f_checked(x, 0)?;
    let gf = problem.grad_checked(x, 0)?;
    let d = z - x;
    let hd = problem.hess_checked(x, &d, 0)?;
    linesearch_ok(problem, &local, fx, &gf, &d, &hd, z, l, 0)
}

#[allow(clippy::too_many_arguments)]
fn linesearch_ok(
    problem: &Problem,
    local: &LocalBarrier<'_>,
    fx: f64,
    gf: &DVector<f64>,
    d: &DVector<f64>,
    hd: &DVector<f64>,
    z: &DVector<f64>,
    l: f64,
    k: usize,
) -> Result<bool> {
    let slack = 1e-12 * (1.0 + fx.abs());
    let r = local.local_norm(d);
    let fz = problem.f_checked(z, k)?;
    let cubic = fx + gf.dot(d) + 0.5 * hd.dot(d) + l / 6.0 * r * r * r;
    if fz > cubic + slack {
        return Ok(false);
    }
    let gz = problem.grad_checked(z, k)?;
    let rem = local.dual_local_norm(&(gz - gf - hd));
    Ok(rem <= 0.5 * l * r * r + slack)
}

struct Snapshot {
    v_norm: f64,
    delta: f64,
    y: DVector<f64>,
}

pub fn sahba_solve(problem: &Problem, cfg: &SahbaConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if !problem.objective().has_hessian() {
        return Err(Error::NoSecondOrderOracle);
    }
    let clock = Instant::now();
    let center = analytic_center(problem, 4.0)?;
    let mut trace = Vec::new();
    if cfg.trace {
        center_trace(problem, &center, &clock, &mut trace);
    }

    let nu = problem.nu();
    let sqrt_nu = nu.sqrt();
    let mu = cfg.eps / (4.0 * nu);
    let pot = Potential::new(problem, mu)?;
    let l_floor = cfg.l_floor();
    let m0 = cfg.effective_m0();
    let fs = problem.feasible();
    let z_basis = fs.null_basis();

    let mut x = center.x;
    let mut m = m0;
    let mut m_hat = 0.0f64;
    let mut inner_total = 0usize;
    let mut steps: Vec<StepRecord> = Vec::new();
    let f_initial = problem.f_checked(&x, 0)?;
    let mut prev: Option<Snapshot> = None;
    let mut outcome = None;

    for k in 0..cfg.max_iters.saturating_add(1) {
        let local = problem.barrier().at(&x)?;
        let fx = problem.f_checked(&x, k)?;
        let gf = problem.grad_checked(&x, k)?;
        let g_pot = &gf + local.grad() * mu;
        let f_mu = fx + mu * local.value();
        let hess = |v: &DVector<f64>| {
            problem
                .objective()
                .hessian_apply(&x, v)
                .unwrap_or_else(|| v * f64::NAN)
        };
        let red = reduce_to_nullspace(fs, &g_pot, hess, |v| local.hess_apply(v))?;

        if k == cfg.max_iters {
            // Uncertified: pair x^k with its own least-squares multiplier.
            let y = fs.multiplier_for(&gf);
            outcome = Some((SolveStatus::MaxIter, x.clone(), y, fx, None));
            break;
        }

        let mut accepted = None;
        for i in 0..cfg.max_inner {
            let l = m * 2f64.powi(i as i32);
            let model = CubicModel::new(red.g.clone(), red.j.clone(), red.h.clone(), l)?;
            let sol = solve_cubic(&model, TOL_CUBIC)?;
            let v = z_basis * &sol.u;
            let v_norm = local.local_norm(&v);
            let hv = problem.hess_checked(&x, &v, k)?;
            let hbv = local.hess_apply(&v);
            let y = fs.multiplier_for(&(&g_pot + &hv + &hbv * (0.5 * l * v_norm)));
            let zeta = local.zeta(&v, cfg.mode);
            let alpha = if zeta > 0.0 {
                (0.5 / zeta).min(1.0)
            } else {
                1.0
            };
            let z = &x + &v * alpha;
            let d = &v * alpha;
            let hd = &hv * alpha;
            inner_total += 1;
            let ok = linesearch_ok(problem, &local, fx, &gf, &d, &hd, &z, l, k)?;
            if cfg.trace {
                let mut rec = TraceRecord::blank(k, Phase::Inner, clock.elapsed().as_nanos());
                rec.f = problem.objective().value(&z);
                rec.v_norm_x = v_norm;
                rec.alpha = alpha;
                rec.zeta = zeta;
                rec.l_estimate = l;
                rec.inner_trial = i;
                trace.push(rec);
            }
            if ok {
                accepted = Some((i, l, sol, v_norm, y, zeta, alpha, z));
                break;
            }
        }
        let (i, l, sol, v_norm, y, zeta, alpha, z) = accepted.ok_or(Error::MaxInner {
            iteration: k,
            limit: cfg.max_inner,
        })?;
        m_hat = m_hat.max(l);
        let delta = (cfg.eps / (4.0 * l * sqrt_nu)).sqrt();

        if cfg.trace {
            let s = &gf - fs.adjoint(prev.as_ref().map_or(&y, |p| &p.y));
            let mut rec = TraceRecord::blank(k, Phase::Outer, clock.elapsed().as_nanos());
            rec.f = fx;
            rec.f_mu = f_mu;
            rec.v_norm_x = v_norm;
            rec.alpha = alpha;
            rec.zeta = zeta;
            rec.l_estimate = l;
            rec.inner_trial = i;
            rec.grad_residual = (&g_pot - fs.adjoint(&y)).norm();
            rec.complementarity = s.dot(&x).abs();
            trace.push(rec);
        }

        if let Some(p) = &prev {
            if p.v_norm < p.delta && v_norm < delta {
                let eps2 = l * cfg.eps / (16.0 * sqrt_nu);
                outcome = Some((
                    SolveStatus::KktReached,
                    x.clone(),
                    p.y.clone(),
                    fx,
                    Some(eps2),
                ));
                break;
            }
        }

        let shifted = &red.j + &red.h * (0.5 * l * sol.r);
        let model_min_eig = if shifted.nrows() > 0 {
            Some(sorted_eigen(&shifted).0[0])
        } else {
            None
        };
        steps.push(StepRecord {
            k,
            f: fx,
            f_mu,
            f_mu_next: pot.value(&z)?,
            v_norm,
            alpha,
            zeta,
            l_accepted: l,
            inner_trials: i + 1,
            eq_residual: fs.residual(&z),
            interior_margin: problem.barrier().spec().interior_margin(&z),
            delta: Some(delta),
            cubic_r: Some(sol.r),
            model_min_eig,
        });
        // M_{k+1} = max(2^{i_k - 1} M_k, L_floor)
        m = (l / 2.0).max(l_floor);
        prev = Some(Snapshot { v_norm, delta, y });
        x = z;
    }

    let (status, x, y, f_final, eps2) = outcome.expect("loop always records its final iterate");
    let mut certificate = KktCertificate::from_multipliers(problem, x, y)?;
    if let Some(e2) = eps2 {
        certificate.attach_second_order(problem, e2)?;
    }
    Ok(SolveReport {
        algorithm: Algorithm::Sahba,
        status,
        eps: cfg.eps,
        mu,
        nu,
        iterations: steps.len(),
        inner_trials: inner_total,
        l_initial: m0,
        m_hat,
        f_initial,
        f_final,
        restarts: 0,
        center_iterations: center.iterations,
        eps2_effective: eps2,
        certificate: Some(certificate),
        steps,
        trace,
    })
}
