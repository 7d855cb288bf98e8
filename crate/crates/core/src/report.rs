//! Solver outcomes, per-step records and trace rows shared by both methods.

use serde::{Deserialize, Serialize};

use crate::kkt::KktCertificate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ahba,
    Sahba,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ahba => "ahba",
            Algorithm::Sahba => "sahba",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail")]
pub enum SolveStatus {
    KktReached,
    MaxIter,
    Error(String),
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::KktReached => "kkt_reached",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Outer,
    Inner,
    AnalyticCenter,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Outer => "outer",
            Phase::Inner => "inner",
            Phase::AnalyticCenter => "analytic_center",
        }
    }
}

/// One row of the iteration trace. Fields that do not apply are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub phase: Phase,
    pub f: f64,
    pub f_mu: f64,
    pub v_norm_x: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub l_estimate: f64,
    pub inner_trial: usize,
    pub grad_residual: f64,
    pub complementarity: f64,
    pub wall_time_ns: u128,
}

impl TraceRecord {
    pub(crate) fn blank(k: usize, phase: Phase, wall_time_ns: u128) -> Self {
        TraceRecord {
            k,
            phase,
            f: f64::NAN,
            f_mu: f64::NAN,
            v_norm_x: f64::NAN,
            alpha: f64::NAN,
            zeta: f64::NAN,
            l_estimate: f64::NAN,
            inner_trial: 0,
            grad_residual: f64::NAN,
            complementarity: f64::NAN,
            wall_time_ns,
        }
    }
}

/// Quantities of one accepted step `x^k -> x^{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub f: f64,
    pub f_mu: f64,
    pub f_mu_next: f64,
    pub v_norm: f64,
    pub alpha: f64,
    pub zeta: f64,
    /// Constant used by the accepted line-search test.
    pub l_accepted: f64,
    pub inner_trials: usize,
    /// `|A x^{k+1} - b|`.
    pub eq_residual: f64,
    pub interior_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic_r: Option<f64>,
    /// Smallest eigenvalue of the reduced regularized model Hessian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_min_eig: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub status: SolveStatus,
    pub eps: f64,
    pub mu: f64,
    pub nu: f64,
    pub iterations: usize,
    pub inner_trials: usize,
    /// Initial Lipschitz estimate (`L0` or the clamped `M0`).
    pub l_initial: f64,
    /// Largest constant accepted by a line search over the run.
    pub m_hat: f64,
    /// Objective value at the preprocessed starting point.
    pub f_initial: f64,
    pub f_final: f64,
    pub restarts: usize,
    pub center_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2_effective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<KktCertificate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

impl SolveReport {
    pub fn certified(&self) -> bool {
        self.status == SolveStatus::KktReached
    }

    /// A report describing a run that failed before producing an iterate.
    pub fn failed(algorithm: Algorithm, eps: f64, err: &crate::Error) -> Self {
        SolveReport {
            algorithm,
            status: SolveStatus::Error(err.to_string()),
            eps,
            mu: f64::NAN,
            nu: f64::NAN,
            iterations: 0,
            inner_trials: 0,
            l_initial: f64::NAN,
            m_hat: f64::NAN,
            f_initial: f64::NAN,
            f_final: f64::NAN,
            restarts: 0,
            center_iterations: 0,
            eps2_effective: None,
            certificate: None,
            steps: Vec::new(),
            trace: Vec::new(),
        }
    }
}
