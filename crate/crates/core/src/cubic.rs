//! Global minimization of the cubic-regularized model
//!
//! ```text
//! m(u) = <g, u> + 1/2 <J u, u> + (L / 6) |u|_H^3
//! ```
//!
//! with `H` positive definite and `J` symmetric (possibly indefinite). The
//! model is whitened with `H^{-1/2}`, the whitened `J` is diagonalized and the
//! scalar secular equation `|(J + (L r / 2) I)^{-1} g| = r` is solved by a
//! safeguarded Newton iteration on `1/|w(r)| - 1/r`. A global minimizer `u`
//! satisfies `J + (L |u|_H / 2) H >= 0`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::packed::{sorted_eigen, spectral_fn};

/// Default tolerance for the secular root and the optimality certificate.
pub const TOL_CUBIC: f64 = 1e-10;
/// Relative size of the bottom-eigenspace gradient component that triggers the hard case.
pub const HARD_CASE_TOL: f64 = 1e-12;
const MAX_ROOT_ITERS: usize = 200;

#[derive(Debug, Clone)]
pub struct CubicModel {
    pub g: DVector<f64>,
    pub j: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub reg: f64,
}

impl CubicModel {
    pub fn new(g: DVector<f64>, j: DMatrix<f64>, h: DMatrix<f64>, reg: f64) -> Result<Self> {
        let p = g.len();
        if j.shape() != (p, p) || h.shape() != (p, p) {
            return Err(Error::SingularModel(format!(
                "inconsistent shapes: g {p}, J {:?}, H {:?}",
                j.shape(),
                h.shape()
            )));
        }
        if !(reg > 0.0) || !reg.is_finite() {
            return Err(Error::SingularModel(format!(
                "regularization {reg} must be positive"
            )));
        }
        if p > 0 && Cholesky::new(h.clone()).is_none() {
            return Err(Error::SingularModel("H is not positive definite".into()));
        }
        Ok(CubicModel { g, j, h, reg })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn h_norm(&self, u: &DVector<f64>) -> f64 {
        (&self.h * u).dot(u).max(0.0).sqrt()
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        let r = self.h_norm(u);
        self.g.dot(u) + 0.5 * (&self.j * u).dot(u) + self.reg / 6.0 * r * r * r
    }

    /// `g + J u + (L |u|_H / 2) H u`.
    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let r = self.h_norm(u);
        &self.g + &self.j * u + (&self.h * u) * (0.5 * self.reg * r)
    }
}

#[derive(Debug, Clone)]
pub struct CubicSolution {
    pub u: DVector<f64>,
    /// `|u|_H`.
    pub r: f64,
    pub stationarity_residual: f64,
    /// Smallest eigenvalue of the whitened `J + (L r / 2) I`.
    pub min_eig_shifted: f64,
    pub hard_case: bool,
    pub iterations: usize,
}

struct Secular<'a> {
    theta: &'a DVector<f64>,
    gamma: &'a DVector<f64>,
    half_reg: f64,
}

impl Secular<'_> {
    /// `(|w(r)|, d|w|/dr)`.
    fn norm_and_slope(&self, r: f64) -> (f64, f64) {
        let mut n2 = 0.0;
        let mut s = 0.0;
        for (t, g) in self.theta.iter().zip(self.gamma.iter()) {
            let d = t + self.half_reg * r;
            n2 += g * g / (d * d);
            s += g * g / (d * d * d);
        }
        let n = n2.sqrt();
        (n, -self.half_reg * s / n)
    }

    fn w(&self, r: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.theta.len(),
            self.theta
                .iter()
                .zip(self.gamma.iter())
                .map(|(t, g)| -g / (t + self.half_reg * r)),
        )
    }
}

/// Global minimizer of the cubic model.
pub fn solve_cubic(model: &CubicModel, tol: f64) -> Result<CubicSolution> {
    let p = model.dim();
    if p == 0 {
        return Ok(CubicSolution {
            u: DVector::zeros(0),
            r: 0.0,
            stationarity_residual: 0.0,
            min_eig_shifted: 0.0,
            hard_case: false,
            iterations: 0,
        });
    }
    let (hvals, hvecs) = sorted_eigen(&model.h);
    if !(hvals[0] > 0.0) {
        return Err(Error::SingularModel("H is not positive definite".into()));
    }
    let h_isqrt = spectral_fn(&hvals, &hvecs, |l| 1.0 / l.sqrt());
    let j_white = &h_isqrt * &model.j * &h_isqrt;
    let (theta, q) = sorted_eigen(&j_white);
    let gamma = q.transpose() * (&h_isqrt * &model.g);
    let half_reg = 0.5 * model.reg;
    let theta_min = theta[0];
    let r_min = (-theta_min / half_reg).max(0.0);
    let gnorm = gamma.norm();

    let spread = HARD_CASE_TOL * (1.0 + theta.amax());
    let bottom: Vec<usize> = (0..p).filter(|&i| theta[i] - theta_min <= spread).collect();
    let bottom_mass = bottom
        .iter()
        .map(|&i| gamma[i] * gamma[i])
        .sum::<f64>()
        .sqrt();

    let secular = Secular {
        theta: &theta,
        gamma: &gamma,
        half_reg,
    };
    let mut hard_case = false;
    let mut iterations = 0;

    let w = if gnorm == 0.0 && theta_min >= 0.0 {
        DVector::zeros(p)
    } else if theta_min < 0.0 && bottom_mass <= HARD_CASE_TOL * gnorm {
        // Candidate hard case: the secular function may have no root above r_min.
        let mut rest = DVector::zeros(p);
        for i in 0..p {
            if !bottom.contains(&i) {
                rest[i] = -gamma[i] / (theta[i] - theta_min);
            }
        }
        let rest_norm = rest.norm();
        if rest_norm <= r_min {
            hard_case = true;
            let tau = (r_min * r_min - rest_norm * rest_norm).max(0.0).sqrt();
            let first = bottom[0];
            let sign = if gamma[first] > 0.0 { -1.0 } else { 1.0 };
            rest[first] = sign * tau;
            rest
        } else {
            let (r, it) = secular_root(&secular, r_min, gnorm, model.reg, tol)?;
            iterations = it;
            polish(&theta, &gamma, half_reg, secular.w(r))
        }
    } else {
        let (r, it) = secular_root(&secular, r_min, gnorm, model.reg, tol)?;
        iterations = it;
        polish(&theta, &gamma, half_reg, secular.w(r))
    };

    let r = w.norm();
    let u = &h_isqrt * (&q * &w);
    let stationarity_residual = model.gradient(&u).norm();
    Ok(CubicSolution {
        u,
        r,
        stationarity_residual,
        min_eig_shifted: theta_min + half_reg * r,
        hard_case,
        iterations,
    })
}

/// Newton steps on `gamma + diag(theta) w + (L/2)|w| w = 0`.
///
/// Near the hard case the secular root fixes `theta_min + L r / 2` only to
/// rounding in `r`, which leaves the bottom component of `w` inaccurate. The
/// Jacobian `diag(theta + L r/2) + (L / 2r) w w^T` stays well conditioned there.
fn polish(
    theta: &DVector<f64>,
    gamma: &DVector<f64>,
    half_reg: f64,
    mut w: DVector<f64>,
) -> DVector<f64> {
    let residual = |w: &DVector<f64>| -> DVector<f64> {
        let r = w.norm();
        gamma + theta.component_mul(w) + w * (half_reg * r)
    };
    let mut res = residual(&w);
    for _ in 0..3 {
        let r = w.norm();
        if r == 0.0 || res.norm() == 0.0 {
            break;
        }
        let mut jac = &w * w.transpose() * (half_reg / r);
        for i in 0..w.len() {
            jac[(i, i)] += theta[i] + half_reg * r;
        }
        let Some(step) = jac.lu().solve(&res) else {
            break;
        };
        let next = &w - step;
        let next_res = residual(&next);
        if next_res.norm() >= res.norm() {
            break;
        }
        w = next;
        res = next_res;
    }
    w
}

/// Root of `|w(r)| = r` on `(r_min, inf)`.
fn secular_root(
    sec: &Secular<'_>,
    r_min: f64,
    gnorm: f64,
    reg: f64,
    tol: f64,
) -> Result<(f64, usize)> {
    let mut lo = r_min;
    // (theta_min + L r / 2) r >= L (r - r_min)^2 / 2 bounds |w(r)| <= r past this point.
    let mut hi = r_min + (2.0 * gnorm / reg).sqrt() * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    while sec.norm_and_slope(hi).0 > hi {
        hi *= 2.0;
    }
    let mut r = hi;
    for it in 1..=MAX_ROOT_ITERS {
        let (n, dn) = sec.norm_and_slope(r);
        let psi = 1.0 / n - 1.0 / r;
        if psi < 0.0 {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
        if (n - r).abs() <= 4.0 * f64::EPSILON * r || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok((r, it));
        }
        let dpsi = -dn / (n * n) + 1.0 / (r * r);
        let newton = r - psi / dpsi;
        let next = if dpsi > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - r).abs() <= 4.0 * f64::EPSILON * r {
            return Ok((next, it));
        }
        r = next;
    }
    let n = sec.norm_and_slope(r).0;
    if (n - r).abs() <= tol * r.max(1.0) {
        Ok((r, MAX_ROOT_ITERS))
    } else {
        Err(Error::NoConvergence {
            iterations: MAX_ROOT_ITERS,
        })
    }
}

/// Verifies first- and second-order global optimality of `sol.u`.
///
/// Recomputes `|u|_H`, the stationarity residual and the smallest
/// eigenvalue of `L^{-1} J L^{-T} + (L_reg r / 2) I` with `H = L L^T`.
pub fn certify_global(model: &CubicModel, sol: &CubicSolution, tol: f64) -> bool {
    let p = model.dim();
    if p == 0 {
        return true;
    }
    let Some(chol) = Cholesky::new(model.h.clone()) else {
        return false;
    };
    let r = model.h_norm(&sol.u);
    let station = model.gradient(&sol.u).norm();
    if !(station <= tol * (1.0 + model.g.norm())) {
        return false;
    }
    let l = chol.l();
    let Some(l_inv) = l.clone().try_inverse() else {
        return false;
    };
    let shifted = &l_inv * &model.j * l_inv.transpose();
    let (values, _) = sorted_eigen(&shifted);
    values[0] + 0.5 * model.reg * r >= -tol * (1.0 + values.amax())
}
