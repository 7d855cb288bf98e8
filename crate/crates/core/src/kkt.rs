//! Approximate first- and second-order KKT certificates for
//! `min f(x) s.t. A x = b, x in K`.
//!
//! A triple `(x, y, s)` is an eps-KKT point when `A x = b`, `x` is strictly
//! interior, `s` lies in the dual cone, `|grad f(x) - A^T y - s| <= eps` and
//! `|<s, x>| <= eps`. The second-order variant additionally requires
//! `grad^2 f(x) + sqrt(eps2) H(x)` to be positive semidefinite on `ker A`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cones::TOL_CONE;
use crate::error::Result;
use crate::metric::reduce_to_nullspace;
use crate::packed::sorted_eigen;
use crate::problem::Problem;

/// Relative tolerance for the projected second-order condition.
pub const TOL_PSD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderInfo {
    pub eps2: f64,
    /// Smallest eigenvalue of `Z^T (grad^2 f + sqrt(eps2) H) Z`.
    pub min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    #[serde(with = "crate::serde_vec")]
    pub x: DVector<f64>,
    #[serde(with = "crate::serde_vec")]
    pub y: DVector<f64>,
    #[serde(with = "crate::serde_vec")]
    pub s: DVector<f64>,
    pub grad_residual: f64,
    pub complementarity: f64,
    pub eq_residual: f64,
    pub interior_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_order: Option<SecondOrderInfo>,
}

impl KktCertificate {
    /// Builds the triple with `s = grad f(x) - A^T y`.
    pub fn from_multipliers(problem: &Problem, x: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        let g = problem.grad_checked(&x, 0)?;
        let s = g - problem.feasible().adjoint(&y);
        Ok(Self::with_slack(problem, x, y, s))
    }

    /// Builds the triple with an explicit `s`.
    pub fn with_slack(
        problem: &Problem,
        x: DVector<f64>,
        y: DVector<f64>,
        s: DVector<f64>,
    ) -> Self {
        let g = problem.objective().gradient(&x);
        let grad_residual = (g - problem.feasible().adjoint(&y) - &s).norm();
        let complementarity = s.dot(&x).abs();
        let eq_residual = problem.feasible().residual(&x);
        let interior_margin = problem.barrier().spec().interior_margin(&x);
        KktCertificate {
            x,
            y,
            s,
            grad_residual,
            complementarity,
            eq_residual,
            interior_margin,
            second_order: None,
        }
    }

    /// Attaches the projected second-order information at weight `sqrt(eps2)`.
    pub fn attach_second_order(&mut self, problem: &Problem, eps2: f64) -> Result<()> {
        let min_eig = reduced_min_eig(problem, &self.x, eps2.max(0.0).sqrt())?.0;
        self.second_order = Some(SecondOrderInfo { eps2, min_eig });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderVerdict {
    pub ok: bool,
    pub eps2: f64,
    pub min_eig: f64,
    pub tolerance: f64,
}

/// Per-condition outcome of a certificate check, with raw residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktVerdict {
    pub eps: f64,
    pub eq_ok: bool,
    pub interior_ok: bool,
    pub dual_ok: bool,
    pub grad_ok: bool,
    pub compl_ok: bool,
    pub eq_residual: f64,
    pub interior_margin: f64,
    pub dual_margin: f64,
    pub grad_residual: f64,
    pub complementarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_order: Option<SecondOrderVerdict>,
}

impl KktVerdict {
    pub fn first_order_ok(&self) -> bool {
        self.eq_ok && self.interior_ok && self.dual_ok && self.grad_ok && self.compl_ok
    }

    pub fn passed(&self) -> bool {
        self.first_order_ok() && self.second_order.as_ref().is_none_or(|s| s.ok)
    }
}

/// Checks the eps-KKT conditions; residuals are recomputed from `(x, y, s)`.
pub fn check_eps_kkt(problem: &Problem, cert: &KktCertificate, eps: f64) -> KktVerdict {
    let spec = problem.barrier().spec();
    let x = &cert.x;
    let dims_ok = x.len() == problem.dim()
        && cert.s.len() == problem.dim()
        && cert.y.len() == problem.feasible().n_constraints();
    if !dims_ok {
        return KktVerdict {
            eps,
            eq_ok: false,
            interior_ok: false,
            dual_ok: false,
            grad_ok: false,
            compl_ok: false,
            eq_residual: f64::NAN,
            interior_margin: f64::NAN,
            dual_margin: f64::NAN,
            grad_residual: f64::NAN,
            complementarity: f64::NAN,
            second_order: None,
        };
    }
    let g = problem.objective().gradient(x);
    let grad_residual = (g - problem.feasible().adjoint(&cert.y) - &cert.s).norm();
    let complementarity = cert.s.dot(x).abs();
    let eq_residual = problem.feasible().residual(x);
    let interior_margin = spec.interior_margin(x);
    let dual_margin = spec.interior_margin(&cert.s);
    KktVerdict {
        eps,
        eq_ok: eq_residual <= problem.feasible().eq_tol(),
        interior_ok: spec.is_member(x, true),
        dual_ok: spec.is_dual_member(&cert.s),
        grad_ok: grad_residual <= eps,
        compl_ok: complementarity <= eps,
        eq_residual,
        interior_margin,
        dual_margin,
        grad_residual,
        complementarity,
        second_order: None,
    }
}

/// eps1-KKT plus `Z^T (grad^2 f + sqrt(eps2) H) Z >= -TOL_PSD * scale`.
pub fn check_2kkt(
    problem: &Problem,
    cert: &KktCertificate,
    eps1: f64,
    eps2: f64,
) -> Result<KktVerdict> {
    let mut verdict = check_eps_kkt(problem, cert, eps1);
    let (min_eig, scale) = if verdict.interior_ok {
        reduced_min_eig(problem, &cert.x, eps2.max(0.0).sqrt())?
    } else {
        if !problem.objective().has_hessian() {
            return Err(crate::Error::NoSecondOrderOracle);
        }
        (f64::NAN, f64::NAN)
    };
    let tolerance = TOL_PSD * scale;
    verdict.second_order = Some(SecondOrderVerdict {
        ok: min_eig >= -tolerance,
        eps2,
        min_eig,
        tolerance,
    });
    Ok(verdict)
}

/// `(lambda_min, max |lambda|)` of `Z^T (grad^2 f(x) + weight H(x)) Z`.
pub fn reduced_min_eig(problem: &Problem, x: &DVector<f64>, weight: f64) -> Result<(f64, f64)> {
    if !problem.objective().has_hessian() {
        return Err(crate::Error::NoSecondOrderOracle);
    }
    let local = problem.barrier().at(x)?;
    let zero = DVector::zeros(x.len());
    let red = reduce_to_nullspace(
        problem.feasible(),
        &zero,
        |v| {
            problem
                .objective()
                .hessian_apply(x, v)
                .expect("objective reported a Hessian")
                + local.hess_apply(v) * weight
        },
        |v| local.hess_apply(v),
    )?;
    if red.j.nrows() == 0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let (values, _) = sorted_eigen(&red.j);
    Ok((values[0], values.amax()))
}

/// Non-strict tolerance used for dual membership, exposed for reporting.
pub fn dual_tolerance(s: &DVector<f64>) -> f64 {
    TOL_CONE * (1.0 + s.norm())
}
