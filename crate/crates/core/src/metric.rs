//! Affine-constraint geometry in the metric induced by the barrier Hessian.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cones::{Barrier, LocalBarrier};
use crate::error::{Error, Result, ValidationCode};

/// Relative rank tolerance applied to `|A|`.
pub const RANK_TOL: f64 = 1e-10;

/// The affine set `{x : A x = b}` together with an orthonormal basis of `ker A`.
#[derive(Debug, Clone)]
pub struct FeasibleSet {
    a: DMatrix<f64>,
    b: DVector<f64>,
    null_basis: DMatrix<f64>,
    gram: Option<Cholesky<f64, Dyn>>,
    rank_tol: f64,
}

impl FeasibleSet {
    /// Builds the set, rejecting matrices without full row rank.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if b.len() != m {
            return Err(Error::validation(
                ValidationCode::DimensionMismatch,
                format!("A has {m} rows but b has {} entries", b.len()),
            ));
        }
        if n == 0 {
            return Err(Error::validation(
                ValidationCode::DimensionMismatch,
                "A has no columns",
            ));
        }
        let rank_tol = RANK_TOL * a.norm();
        if m == 0 {
            return Ok(FeasibleSet {
                a,
                b,
                null_basis: DMatrix::identity(n, n),
                gram: None,
                rank_tol,
            });
        }
        if m > n {
            return Err(Error::validation(
                ValidationCode::RankDeficient,
                format!("A has {m} rows but only {n} columns"),
            ));
        }

        let rank = a
            .transpose()
            .col_piv_qr()
            .r()
            .diagonal()
            .iter()
            .filter(|d| d.abs() > rank_tol)
            .count();
        if rank < m {
            return Err(Error::validation(
                ValidationCode::RankDeficient,
                format!("A has rank {rank} < {m} rows (tolerance {rank_tol:.3e})"),
            ));
        }

        // QR of [A^T | I]: the trailing n - m columns of Q span ker A.
        let mut completed = DMatrix::zeros(n, m + n);
        completed.view_mut((0, 0), (n, m)).copy_from(&a.transpose());
        completed.view_mut((0, m), (n, n)).fill_with_identity();
        let q = completed.qr().q();
        let null_basis = q.columns(m, n - m).into_owned();

        let gram = Cholesky::new(&a * a.transpose()).ok_or_else(|| {
            Error::validation(
                ValidationCode::RankDeficient,
                "A A^T is not positive definite",
            )
        })?;
        Ok(FeasibleSet {
            a,
            b,
            null_basis,
            gram: Some(gram),
            rank_tol,
        })
    }

    /// No affine constraints on an `n`-dimensional space.
    pub fn unconstrained(n: usize) -> Self {
        Self::new(DMatrix::zeros(0, n), DVector::zeros(0)).expect("empty constraint set is valid")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Orthonormal basis `Z` of `ker A`, `n x p`.
    pub fn null_basis(&self) -> &DMatrix<f64> {
        &self.null_basis
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn null_dim(&self) -> usize {
        self.null_basis.ncols()
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `|A x - b|`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        if self.a.nrows() == 0 {
            return 0.0;
        }
        (&self.a * x - &self.b).norm()
    }

    /// Tolerance on `|A x - b|` accepted as feasible.
    pub fn eq_tol(&self) -> f64 {
        1e-10 * (1.0 + self.b.norm())
    }

    pub fn satisfies(&self, x: &DVector<f64>) -> bool {
        self.residual(x) <= self.eq_tol()
    }

    /// `A^T y`.
    pub fn adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.a.nrows() == 0 {
            return DVector::zeros(self.a.ncols());
        }
        self.a.transpose() * y
    }

    /// Least-squares multiplier `argmin_y |A^T y - r|`.
    pub fn multiplier_for(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.gram {
            Some(chol) => chol.solve(&(&self.a * r)),
            None => DVector::zeros(0),
        }
    }
}

/// How the metric projection solves its linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    /// Factor `A H^{-1} A^T` (m x m).
    Schur,
    /// Factor `Z^T H Z` (p x p).
    NullSpace,
}

#[derive(Debug, Clone)]
enum Factor {
    Schur {
        hinv_at: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
    NullSpace {
        chol: Cholesky<f64, Dyn>,
    },
    Unconstrained,
}

/// Factorizations for the metric projector `S_x` at a fixed interior point.
#[derive(Debug, Clone)]
pub struct MetricWorkspace<'a> {
    feasible: &'a FeasibleSet,
    local: LocalBarrier<'a>,
    factor: Factor,
}

impl<'a> MetricWorkspace<'a> {
    /// Picks the smaller of the Schur and null-space systems.
    pub fn new(feasible: &'a FeasibleSet, barrier: &'a Barrier, x: &DVector<f64>) -> Result<Self> {
        let method = if feasible.n_constraints() <= feasible.null_dim() {
            ProjectionMethod::Schur
        } else {
            ProjectionMethod::NullSpace
        };
        Self::with_method(feasible, barrier, x, method)
    }

    pub fn with_method(
        feasible: &'a FeasibleSet,
        barrier: &'a Barrier,
        x: &DVector<f64>,
        method: ProjectionMethod,
    ) -> Result<Self> {
        let local = barrier.at(x)?;
        let factor = if feasible.n_constraints() == 0 {
            Factor::Unconstrained
        } else {
            match method {
                ProjectionMethod::Schur => {
                    let at = feasible.a.transpose();
                    let mut hinv_at = DMatrix::zeros(at.nrows(), at.ncols());
                    for (j, col) in at.column_iter().enumerate() {
                        hinv_at.set_column(j, &local.hess_inv_apply(&col.into_owned()));
                    }
                    let schur = &feasible.a * &hinv_at;
                    let schur = 0.5 * (&schur + schur.transpose());
                    let chol = Cholesky::new(schur).ok_or_else(|| {
                        Error::SingularSystem("A H^-1 A^T is not positive definite".into())
                    })?;
                    Factor::Schur { hinv_at, chol }
                }
                ProjectionMethod::NullSpace => {
                    let z = &feasible.null_basis;
                    let hz = hess_times(&local, z);
                    let reduced = z.transpose() * hz;
                    let reduced = 0.5 * (&reduced + reduced.transpose());
                    let chol = Cholesky::new(reduced).ok_or_else(|| {
                        Error::SingularSystem("Z^T H Z is not positive definite".into())
                    })?;
                    Factor::NullSpace { chol }
                }
            }
        };
        Ok(MetricWorkspace {
            feasible,
            local,
            factor,
        })
    }

    pub fn local(&self) -> &LocalBarrier<'a> {
        &self.local
    }

    pub fn feasible(&self) -> &FeasibleSet {
        self.feasible
    }

    /// Solves `g + H v - A^T y = 0, A v = 0`; returns `(v, y)` with `v = -S_x g`.
    pub fn project(&self, g: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.factor {
            Factor::Unconstrained => (-self.local.hess_inv_apply(g), DVector::zeros(0)),
            Factor::Schur { hinv_at, chol } => {
                let hinv_g = self.local.hess_inv_apply(g);
                let y = chol.solve(&(&self.feasible.a * &hinv_g));
                let v = hinv_at * &y - hinv_g;
                (v, y)
            }
            Factor::NullSpace { chol } => {
                let z = &self.feasible.null_basis;
                let u = -chol.solve(&(z.transpose() * g));
                let v = z * u;
                let y = self
                    .feasible
                    .multiplier_for(&(g + self.local.hess_apply(&v)));
                (v, y)
            }
        }
    }

    /// `S_x g`.
    pub fn apply_projector(&self, g: &DVector<f64>) -> DVector<f64> {
        -self.project(g).0
    }
}

fn hess_times(local: &LocalBarrier<'_>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (j, col) in m.column_iter().enumerate() {
        out.set_column(j, &local.hess_apply(&col.into_owned()));
    }
    out
}

/// `D_h(u, x) = h(u) - h(x) - <grad h(x), u - x>`.
pub fn bregman_div(barrier: &Barrier, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
    let lx = barrier.at(x)?;
    let hu = barrier.value(u)?;
    Ok(hu - lx.value() - lx.grad().dot(&(u - x)))
}

/// Data of a subproblem restricted to `ker A` in the coordinates of `Z`.
#[derive(Debug, Clone)]
pub struct ReducedData {
    pub g: DVector<f64>,
    pub j: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

/// `(Z^T g, Z^T J Z, Z^T H Z)` for symmetric operators given by their actions.
pub fn reduce_to_nullspace(
    feasible: &FeasibleSet,
    g: &DVector<f64>,
    j_action: impl Fn(&DVector<f64>) -> DVector<f64>,
    h_action: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<ReducedData> {
    let z = feasible.null_basis();
    let p = z.ncols();
    let mut jz = DMatrix::zeros(z.nrows(), p);
    let mut hz = DMatrix::zeros(z.nrows(), p);
    for (k, col) in z.column_iter().enumerate() {
        let c = col.into_owned();
        jz.set_column(k, &j_action(&c));
        hz.set_column(k, &h_action(&c));
    }
    let j = z.transpose() * jz;
    let h = z.transpose() * hz;
    let j = 0.5 * (&j + j.transpose());
    let h = 0.5 * (&h + h.transpose());
    if p > 0 && Cholesky::new(h.clone()).is_none() {
        return Err(Error::SingularSystem(
            "reduced Hessian Z^T H Z is not positive definite".into(),
        ));
    }
    Ok(ReducedData {
        g: z.transpose() * g,
        j,
        h,
    })
}
