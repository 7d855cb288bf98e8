//! Objective oracles, problem assembly, the barrier potential and the
//! analytic-center preprocessing step.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cones::{omega_star, Barrier};
use crate::error::{Error, Result, ValidationCode};
use crate::metric::{FeasibleSet, MetricWorkspace};

/// First- and (optionally) second-order oracle for the objective `f`.
///
/// Implementations must be finite on the interior of the feasible set.
pub trait Objective: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `grad^2 f(x) v`, or `None` when no second-order information exists.
    fn hessian_apply(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn has_hessian(&self) -> bool {
        false
    }
}

/// `f(x) = 1/2 x^T Q x + q^T x + c0`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q_mat: DMatrix<f64>,
    q: DVector<f64>,
    c0: f64,
}

impl Quadratic {
    pub fn new(q_mat: DMatrix<f64>, q: DVector<f64>, c0: f64) -> Result<Self> {
        if q_mat.nrows() != q_mat.ncols() || q_mat.nrows() != q.len() {
            return Err(Error::validation(
                ValidationCode::DimensionMismatch,
                format!(
                    "Q is {}x{} but q has {} entries",
                    q_mat.nrows(),
                    q_mat.ncols(),
                    q.len()
                ),
            ));
        }
        let q_mat = 0.5 * (&q_mat + q_mat.transpose());
        Ok(Quadratic { q_mat, q, c0 })
    }

    pub fn linear(c: DVector<f64>) -> Self {
        let n = c.len();
        Quadratic {
            q_mat: DMatrix::zeros(n, n),
            q: c,
            c0: 0.0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q_mat
    }
}

impl Objective for Quadratic {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.q_mat * x).dot(x) + self.q.dot(x) + self.c0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q_mat * x + &self.q
    }

    fn hessian_apply(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.q_mat * v)
    }

    fn has_hessian(&self) -> bool {
        true
    }
}

/// `f(x) = -(scale / 2) |x|^2`, a concave test objective.
#[derive(Debug, Clone, Copy)]
pub struct NegativeSqNorm {
    pub scale: f64,
}

impl Objective for NegativeSqNorm {
    fn value(&self, x: &DVector<f64>) -> f64 {
        -0.5 * self.scale * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        -self.scale * x
    }

    fn hessian_apply(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(-self.scale * v)
    }

    fn has_hessian(&self) -> bool {
        true
    }
}

/// `f(x) = (weight / 2) |x - point|^2`.
#[derive(Debug, Clone)]
pub struct DistanceToPoint {
    pub point: DVector<f64>,
    pub weight: f64,
}

impl Objective for DistanceToPoint {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.weight * (x - &self.point).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.weight * (x - &self.point)
    }

    fn hessian_apply(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.weight * v)
    }

    fn has_hessian(&self) -> bool {
        true
    }
}

type ValueFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type HessFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// Objective assembled from closures.
pub struct FnObjective {
    value: Box<ValueFn>,
    grad: Box<GradFn>,
    hess: Option<Box<HessFn>>,
}

impl FnObjective {
    pub fn new(
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        FnObjective {
            value: Box::new(value),
            grad: Box::new(grad),
            hess: None,
        }
    }

    pub fn with_hessian(
        mut self,
        hess: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Box::new(hess));
        self
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("hessian", &self.hess.is_some())
            .finish()
    }
}

impl Objective for FnObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.grad)(x)
    }

    fn hessian_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.hess.as_ref().map(|h| h(x, v))
    }

    fn has_hessian(&self) -> bool {
        self.hess.is_some()
    }
}

/// `min f(x) s.t. A x = b, x in K`.
#[derive(Clone)]
pub struct Problem {
    objective: Arc<dyn Objective>,
    feasible: FeasibleSet,
    barrier: Barrier,
    x_init: Option<DVector<f64>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("dim", &self.dim())
            .field("constraints", &self.feasible.n_constraints())
            .field("nu", &self.barrier.nu())
            .finish()
    }
}

impl Problem {
    pub fn new(
        objective: Arc<dyn Objective>,
        feasible: FeasibleSet,
        barrier: Barrier,
        x_init: Option<DVector<f64>>,
    ) -> Result<Self> {
        if feasible.dim() != barrier.dim() {
            return Err(Error::validation(
                ValidationCode::DimensionMismatch,
                format!(
                    "A has {} columns but the cone has dimension {}",
                    feasible.dim(),
                    barrier.dim()
                ),
            ));
        }
        let problem = Problem {
            objective,
            feasible,
            barrier,
            x_init: None,
        };
        match x_init {
            Some(x) => problem.with_x_init(x),
            None => Ok(problem),
        }
    }

    /// Attach a strictly feasible starting point, validating it.
    pub fn with_x_init(mut self, x: DVector<f64>) -> Result<Self> {
        self.validate_point(&x)?;
        self.x_init = Some(x);
        Ok(self)
    }

    /// Checks dimension, `A x = b` and strict interiority.
    pub fn validate_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::validation(
                ValidationCode::DimensionMismatch,
                format!("point has {} entries, expected {}", x.len(), self.dim()),
            ));
        }
        let res = self.feasible.residual(x);
        if !(res <= self.feasible.eq_tol()) {
            return Err(Error::validation(
                ValidationCode::InfeasibleInit,
                format!(
                    "|Ax - b| = {res:.3e} exceeds {:.3e}",
                    self.feasible.eq_tol()
                ),
            ));
        }
        if let Some(block) = self.barrier.spec().first_non_interior(x) {
            return Err(Error::validation(
                ValidationCode::InitNotInterior,
                format!("point is not strictly inside cone block {block}"),
            ));
        }
        Ok(())
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective.as_ref()
    }

    pub fn feasible(&self) -> &FeasibleSet {
        &self.feasible
    }

    pub fn barrier(&self) -> &Barrier {
        &self.barrier
    }

    pub fn x_init(&self) -> Option<&DVector<f64>> {
        self.x_init.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.barrier.dim()
    }

    pub fn nu(&self) -> f64 {
        self.barrier.nu()
    }

    pub(crate) fn f_checked(&self, x: &DVector<f64>, iteration: usize) -> Result<f64> {
        let v = self.objective.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ObjectiveFailure {
                iteration,
                detail: format!("f(x) = {v}"),
            })
        }
    }

    pub(crate) fn grad_checked(&self, x: &DVector<f64>, iteration: usize) -> Result<DVector<f64>> {
        let g = self.objective.gradient(x);
        if g.len() != x.len() {
            return Err(Error::ObjectiveFailure {
                iteration,
                detail: format!("gradient has {} entries, expected {}", g.len(), x.len()),
            });
        }
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::ObjectiveFailure {
                iteration,
                detail: "gradient is not finite".into(),
            })
        }
    }

    pub(crate) fn hess_checked(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
        iteration: usize,
    ) -> Result<DVector<f64>> {
        let hv = self
            .objective
            .hessian_apply(x, v)
            .ok_or(Error::NoSecondOrderOracle)?;
        if hv.iter().all(|t| t.is_finite()) {
            Ok(hv)
        } else {
            Err(Error::ObjectiveFailure {
                iteration,
                detail: "Hessian action is not finite".into(),
            })
        }
    }
}

/// `F_mu(x) = f(x) + mu h(x)`.
#[derive(Debug, Clone, Copy)]
pub struct Potential<'a> {
    problem: &'a Problem,
    mu: f64,
}

impl<'a> Potential<'a> {
    pub fn new(problem: &'a Problem, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Domain {
                function: "potential",
                value: mu,
            });
        }
        Ok(Potential { problem, mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        let h = self.problem.barrier.value(x)?;
        Ok(self.problem.f_checked(x, 0)? + self.mu * h)
    }

    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let gh = self.problem.barrier.grad(x)?;
        Ok(self.problem.grad_checked(x, 0)? + gh * self.mu)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CenterOptions {
    pub max_iters: usize,
    /// Newton decrement at which iteration stops early.
    pub decrement_tol: f64,
}

impl Default for CenterOptions {
    fn default() -> Self {
        CenterOptions {
            max_iters: 500,
            decrement_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CenterStep {
    pub barrier_value: f64,
    pub decrement: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct AnalyticCenter {
    pub x: DVector<f64>,
    /// Newton decrement `|S_x grad h(x)|_x` at the returned point.
    pub decrement: f64,
    /// Certified upper bound on `h(x) - inf h` over the feasible set.
    pub gap_bound: f64,
    pub iterations: usize,
    pub history: Vec<CenterStep>,
}

/// Damped Newton on `h` restricted to the affine set, started at `x_init`.
///
/// The result satisfies `h(x) >= h(x0) - slack * nu` on the feasible set;
/// `slack = 1` for the first-order method and `4` for the second-order one.
pub fn analytic_center(problem: &Problem, slack: f64) -> Result<AnalyticCenter> {
    analytic_center_with(problem, slack, &CenterOptions::default())
}

pub fn analytic_center_with(
    problem: &Problem,
    slack: f64,
    opts: &CenterOptions,
) -> Result<AnalyticCenter> {
    let start = problem.x_init.as_ref().ok_or(Error::NoInitialPoint)?;
    analytic_center_from(problem, start.clone(), slack, opts)
}

pub(crate) fn analytic_center_from(
    problem: &Problem,
    mut x: DVector<f64>,
    slack: f64,
    opts: &CenterOptions,
) -> Result<AnalyticCenter> {
    let bound = slack * problem.nu();
    let mut history = Vec::new();
    for it in 0..=opts.max_iters {
        let ws = MetricWorkspace::new(&problem.feasible, &problem.barrier, &x)?;
        let local = ws.local();
        let (dir, _) = ws.project(&local.grad());
        let decrement = local.local_norm(&dir);
        let barrier_value = local.value();
        let gap = certified_gap(decrement);
        if decrement <= opts.decrement_tol || (it == opts.max_iters && gap <= bound) {
            history.push(CenterStep {
                barrier_value,
                decrement,
                step: 0.0,
            });
            return Ok(AnalyticCenter {
                x,
                decrement,
                gap_bound: gap,
                iterations: it,
                history,
            });
        }
        if it == opts.max_iters {
            break;
        }
        // Full Newton steps once inside the quadratic convergence region.
        let step = if decrement > 0.25 {
            1.0 / (1.0 + decrement)
        } else {
            1.0
        };
        history.push(CenterStep {
            barrier_value,
            decrement,
            step,
        });
        x += dir * step;
    }
    Err(Error::MaxIterExceeded {
        what: "analytic center",
        limit: opts.max_iters,
    })
}

fn certified_gap(decrement: f64) -> f64 {
    omega_star(decrement).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{Block, ConeSpec};
    use approx::assert_relative_eq;

    fn simplex(n: usize, objective: Arc<dyn Objective>, x0: DVector<f64>) -> Problem {
        let fs = FeasibleSet::new(
            DMatrix::from_element(1, n, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let b = Barrier::new(ConeSpec::new(vec![Block::Orthant(n)]).unwrap());
        Problem::new(objective, fs, b, Some(x0)).unwrap()
    }

    #[test]
    fn potential_examples() {
        let n = 2;
        let fs = FeasibleSet::unconstrained(n);
        let b = Barrier::new(ConeSpec::new(vec![Block::Orthant(n)]).unwrap());
        let quad = Quadratic::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        let p = Problem::new(Arc::new(quad), fs, b, None).unwrap();
        let ones = DVector::from_element(2, 1.0);
        assert_relative_eq!(Potential::new(&p, 1.0).unwrap().value(&ones).unwrap(), 1.0);

        let x = DVector::from_column_slice(&[0.5, 3.0]);
        let pot = Potential::new(&p, 2.0).unwrap();
        let expected = p.objective().gradient(&x) + p.barrier().grad(&x).unwrap() * 2.0;
        assert_relative_eq!(pot.grad(&x).unwrap(), expected);
        assert!(Potential::new(&p, 0.0).is_err());
    }

    #[test]
    fn zero_objective_potential_is_scaled_barrier() {
        let p = simplex(
            3,
            Arc::new(Quadratic::linear(DVector::zeros(3))),
            DVector::from_element(3, 1.0 / 3.0),
        );
        let x = DVector::from_column_slice(&[0.2, 0.3, 0.5]);
        let pot = Potential::new(&p, 0.7).unwrap();
        assert_relative_eq!(pot.value(&x).unwrap(), 0.7 * p.barrier().value(&x).unwrap());
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let obj = FnObjective::new(|_| f64::NAN, |x| x.clone());
        let p = simplex(2, Arc::new(obj), DVector::from_element(2, 0.5));
        let pot = Potential::new(&p, 1.0).unwrap();
        assert!(matches!(
            pot.value(&DVector::from_element(2, 0.5)),
            Err(Error::ObjectiveFailure { .. })
        ));
    }

    #[test]
    fn x_init_is_validated() {
        let fs = FeasibleSet::new(
            DMatrix::from_element(1, 2, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let b = Barrier::new(ConeSpec::new(vec![Block::Orthant(2)]).unwrap());
        let obj: Arc<dyn Objective> = Arc::new(Quadratic::linear(DVector::zeros(2)));
        let bad = Problem::new(
            obj.clone(),
            fs.clone(),
            b.clone(),
            Some(DVector::from_column_slice(&[0.5, 0.501])),
        );
        assert!(matches!(
            bad,
            Err(Error::Validation {
                code: ValidationCode::InfeasibleInit,
                ..
            })
        ));
        let edge = Problem::new(obj, fs, b, Some(DVector::from_column_slice(&[1.0, 0.0])));
        assert!(matches!(
            edge,
            Err(Error::Validation {
                code: ValidationCode::InitNotInterior,
                ..
            })
        ));
    }

    #[test]
    fn simplex_center_is_uniform() {
        let x0 = DVector::from_column_slice(&[0.7, 0.1, 0.1, 0.1]);
        let p = simplex(4, Arc::new(Quadratic::linear(DVector::zeros(4))), x0);
        let c = analytic_center(&p, 1.0).unwrap();
        assert_relative_eq!(c.x, DVector::from_element(4, 0.25), epsilon = 1e-9);
        assert!(c.decrement <= 1e-9);
        assert!(c.gap_bound <= p.nu());
    }

    #[test]
    fn weighted_slice_center() {
        // min -ln x1 - ln x2 s.t. x1 + 2 x2 = 2  =>  x = (1, 1/2)
        let fs = FeasibleSet::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let b = Barrier::new(ConeSpec::new(vec![Block::Orthant(2)]).unwrap());
        let obj: Arc<dyn Objective> = Arc::new(Quadratic::linear(DVector::zeros(2)));
        let p = Problem::new(obj, fs, b, Some(DVector::from_column_slice(&[1.9, 0.05]))).unwrap();
        let c = analytic_center(&p, 1.0).unwrap();
        assert_relative_eq!(c.x, DVector::from_column_slice(&[1.0, 0.5]), epsilon = 1e-8);
        assert!(c.decrement < 1e-8);
    }

    #[test]
    fn unbounded_barrier_hits_iteration_cap() {
        let fs = FeasibleSet::unconstrained(2);
        let b = Barrier::new(ConeSpec::new(vec![Block::Orthant(2)]).unwrap());
        let obj: Arc<dyn Objective> = Arc::new(Quadratic::linear(DVector::zeros(2)));
        let p = Problem::new(obj, fs, b, Some(DVector::from_element(2, 1.0))).unwrap();
        let r = analytic_center_with(
            &p,
            1.0,
            &CenterOptions {
                max_iters: 50,
                decrement_tol: 1e-9,
            },
        );
        assert!(matches!(r, Err(Error::MaxIterExceeded { .. })));
    }

    #[test]
    fn missing_start_point() {
        let fs = FeasibleSet::unconstrained(1);
        let b = Barrier::new(ConeSpec::new(vec![Block::Orthant(1)]).unwrap());
        let p = Problem::new(Arc::new(Quadratic::linear(DVector::zeros(1))), fs, b, None).unwrap();
        assert!(matches!(
            analytic_center(&p, 1.0),
            Err(Error::NoInitialPoint)
        ));
    }
}
