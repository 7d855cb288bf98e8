//! Problem files, trace CSV and report JSON.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::{Barrier, Block, ConeSpec};
use crate::error::{Error, Result, ValidationCode};
use crate::kkt::{check_2kkt, check_eps_kkt, KktCertificate, KktVerdict};
use crate::metric::FeasibleSet;
use crate::problem::{DistanceToPoint, NegativeSqNorm, Objective, Problem, Quadratic};
use crate::report::{Algorithm, SolveReport, TraceRecord};

/// Header of the iteration trace CSV.
pub const TRACE_HEADER: [&str; 12] = [
    "k",
    "phase",
    "f",
    "F_mu",
    "v_norm_x",
    "alpha",
    "zeta",
    "l_estimate",
    "inner_trial",
    "grad_residual",
    "complementarity",
    "wall_time_ns",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeEntry {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

/// A dense row-major or triplet-form matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplets: Option<Vec<(usize, usize, f64)>>,
}

impl MatrixSpec {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let dense = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        MatrixSpec {
            rows: m.nrows(),
            cols: m.ncols(),
            dense: Some(dense),
            triplets: None,
        }
    }

    pub fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>> {
        let mismatch = |msg: String| {
            Error::validation(ValidationCode::DimensionMismatch, format!("{what}: {msg}"))
        };
        match (&self.dense, &self.triplets) {
            (Some(d), None) => {
                if d.len() != self.rows * self.cols {
                    return Err(mismatch(format!(
                        "{} entries for a {}x{} matrix",
                        d.len(),
                        self.rows,
                        self.cols
                    )));
                }
                Ok(DMatrix::from_row_slice(self.rows, self.cols, d))
            }
            (None, Some(t)) => {
                let mut m = DMatrix::zeros(self.rows, self.cols);
                for &(i, j, v) in t {
                    if i >= self.rows || j >= self.cols {
                        return Err(mismatch(format!(
                            "triplet ({i}, {j}) outside {}x{}",
                            self.rows, self.cols
                        )));
                    }
                    m[(i, j)] += v;
                }
                Ok(m)
            }
            _ => Err(Error::Parse(format!(
                "{what}: exactly one of \"dense\" or \"triplets\" is required"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: String,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q_mat: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

impl ObjectiveSpec {
    pub fn quadratic(q_mat: &DMatrix<f64>, q: &DVector<f64>, c0: f64) -> Self {
        ObjectiveSpec {
            kind: "quadratic".into(),
            q_mat: Some(MatrixSpec::from_dense(q_mat)),
            q: Some(q.as_slice().to_vec()),
            c0: Some(c0),
            name: None,
            params: None,
        }
    }

    pub fn builtin(name: &str, params: serde_json::Value) -> Self {
        ObjectiveSpec {
            kind: "builtin".into(),
            q_mat: None,
            q: None,
            c0: None,
            name: Some(name.into()),
            params: Some(params),
        }
    }

    pub fn build(&self, n: usize) -> Result<Arc<dyn Objective>> {
        match self.kind.as_str() {
            "quadratic" => Ok(Arc::new(quadratic(
                self.q_mat.as_ref(),
                self.q.as_deref(),
                self.c0,
                n,
            )?)),
            "builtin" => {
                let name = self.name.as_deref().ok_or_else(|| {
                    Error::validation(
                        ValidationCode::UnknownObjective,
                        "builtin objective needs a \"name\"",
                    )
                })?;
                let params = self.params.clone().unwrap_or(serde_json::Value::Null);
                builtin(name, &params, n)
            }
            other => Err(Error::validation(
                ValidationCode::UnknownObjective,
                format!("unknown objective kind {other:?}"),
            )),
        }
    }
}

fn quadratic(
    q_mat: Option<&MatrixSpec>,
    q: Option<&[f64]>,
    c0: Option<f64>,
    n: usize,
) -> Result<Quadratic> {
    let q_mat = match q_mat {
        Some(m) => m.to_matrix("Q")?,
        None => DMatrix::zeros(n, n),
    };
    let q = q
        .map(DVector::from_column_slice)
        .unwrap_or_else(|| DVector::zeros(n));
    if q.len() != n || q_mat.nrows() != n {
        return Err(Error::validation(
            ValidationCode::DimensionMismatch,
            format!(
                "objective has dimension {} but the cone has dimension {n}",
                q.len().max(q_mat.nrows())
            ),
        ));
    }
    Quadratic::new(q_mat, q, c0.unwrap_or(0.0))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearParams {
    c: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticParams {
    #[serde(rename = "Q")]
    q_mat: Option<MatrixSpec>,
    q: Option<Vec<f64>>,
    c0: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleParams {
    #[serde(default = "one")]
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointParams {
    point: Vec<f64>,
    #[serde(default = "one")]
    weight: f64,
}

fn one() -> f64 {
    1.0
}

fn params<T: serde::de::DeserializeOwned>(name: &str, v: &serde_json::Value) -> Result<T> {
    let v = if v.is_null() {
        serde_json::json!({})
    } else {
        v.clone()
    };
    serde_json::from_value(v).map_err(|e| {
        Error::validation(
            ValidationCode::BadParams,
            format!("params of builtin {name:?}: {e}"),
        )
    })
}

fn builtin(name: &str, p: &serde_json::Value, n: usize) -> Result<Arc<dyn Objective>> {
    let check_len = |len: usize, what: &str| {
        if len == n {
            Ok(())
        } else {
            Err(Error::validation(
                ValidationCode::DimensionMismatch,
                format!("{what} has {len} entries, expected {n}"),
            ))
        }
    };
    match name {
        "linear" => {
            let LinearParams { c } = params(name, p)?;
            check_len(c.len(), "c")?;
            Ok(Arc::new(Quadratic::linear(DVector::from_vec(c))))
        }
        "quadratic" => {
            let QuadraticParams { q_mat, q, c0 } = params(name, p)?;
            Ok(Arc::new(quadratic(q_mat.as_ref(), q.as_deref(), c0, n)?))
        }
        "negative_sqnorm" => {
            let ScaleParams { scale } = params(name, p)?;
            Ok(Arc::new(NegativeSqNorm { scale }))
        }
        "distance_to_point" => {
            let PointParams { point, weight } = params(name, p)?;
            check_len(point.len(), "point")?;
            Ok(Arc::new(DistanceToPoint {
                point: DVector::from_vec(point),
                weight,
            }))
        }
        other => Err(Error::validation(
            ValidationCode::UnknownObjective,
            format!("unknown builtin objective {other:?}"),
        )),
    }
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub cones: Vec<ConeEntry>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixSpec>,
    #[serde(default)]
    pub b: Vec<f64>,
    pub objective: ObjectiveSpec,
    pub x_init: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_fmin: Option<f64>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn cone_spec(&self) -> Result<ConeSpec> {
        let mut blocks = Vec::with_capacity(self.cones.len());
        for (i, c) in self.cones.iter().enumerate() {
            let bad =
                |msg: &str| Error::validation(ValidationCode::BadCone, format!("cone {i}: {msg}"));
            let block = match (c.kind.as_str(), c.dim, c.order) {
                ("orthant", Some(d), None) => Block::Orthant(d),
                ("soc", Some(d), None) => Block::Lorentz(d),
                ("psd", None, Some(o)) => Block::Psd(o),
                ("orthant" | "soc", _, _) => return Err(bad("expects exactly \"dim\"")),
                ("psd", _, _) => return Err(bad("expects exactly \"order\"")),
                (other, _, _) => return Err(bad(&format!("unknown cone type {other:?}"))),
            };
            blocks.push(block);
        }
        ConeSpec::new(blocks)
    }

    pub fn build(&self) -> Result<Problem> {
        let spec = self.cone_spec()?;
        let n = spec.dim();
        let fs = match &self.a {
            Some(a) => {
                let a = a.to_matrix("A")?;
                if a.nrows() != self.b.len() {
                    return Err(Error::validation(
                        ValidationCode::DimensionMismatch,
                        format!(
                            "A has {} rows but b has {} entries",
                            a.nrows(),
                            self.b.len()
                        ),
                    ));
                }
                FeasibleSet::new(a, DVector::from_column_slice(&self.b))?
            }
            None if self.b.is_empty() => FeasibleSet::unconstrained(n),
            None => {
                return Err(Error::validation(
                    ValidationCode::DimensionMismatch,
                    "b given without A",
                ));
            }
        };
        let objective = self.objective.build(n)?;
        Problem::new(
            objective,
            fs,
            Barrier::new(spec),
            Some(DVector::from_column_slice(&self.x_init)),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }
}

/// Parses and validates a problem, anchoring validation errors to the line of
/// the offending key.
pub fn parse_problem(text: &str) -> Result<(ProblemFile, Problem)> {
    let file = ProblemFile::parse(text)?;
    match file.build() {
        Ok(p) => Ok((file, p)),
        Err(Error::Validation { code, message }) => {
            let key = match code {
                ValidationCode::BadCone => "\"cones\"",
                ValidationCode::RankDeficient => "\"A\"",
                ValidationCode::InfeasibleInit | ValidationCode::InitNotInterior => "\"x_init\"",
                ValidationCode::UnknownObjective | ValidationCode::BadParams => "\"objective\"",
                ValidationCode::DimensionMismatch => key_for_mismatch(&message),
            };
            let message = match line_of(text, key) {
                Some(line) => format!("line {line}: {message}"),
                None => message,
            };
            Err(Error::Validation { code, message })
        }
        Err(e) => Err(e),
    }
}

fn key_for_mismatch(message: &str) -> &'static str {
    if message.starts_with("point has") {
        "\"x_init\""
    } else if message.starts_with("A ") || message.starts_with("A:") {
        "\"A\""
    } else {
        "\"objective\""
    }
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| l.contains(key)).map(|i| i + 1)
}

pub fn load_problem_file(path: impl AsRef<Path>) -> Result<(ProblemFile, Problem)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_problem(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::Validation { code, message } => Error::Validation {
            code,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    load_problem_file(path).map(|(_, p)| p)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            r.phase.as_str().to_string(),
            fmt_f(r.f),
            fmt_f(r.f_mu),
            fmt_f(r.v_norm_x),
            fmt_f(r.alpha),
            fmt_f(r.zeta),
            fmt_f(r.l_estimate),
            r.inner_trial.to_string(),
            fmt_f(r.grad_residual),
            fmt_f(r.complementarity),
            r.wall_time_ns.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn report_verdict(report: &SolveReport, problem: &Problem, cert: &KktCertificate) -> KktVerdict {
    match (report.algorithm, report.eps2_effective) {
        (Algorithm::Sahba, Some(e2)) => check_2kkt(problem, cert, report.eps, e2)
            .unwrap_or_else(|_| check_eps_kkt(problem, cert, report.eps)),
        (Algorithm::Sahba, None) => check_eps_kkt(problem, cert, report.eps),
        (Algorithm::Ahba, _) => check_eps_kkt(problem, cert, 2.0 * report.eps),
    }
}

/// Machine-readable summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    pub eps: f64,
    pub iterations: usize,
    pub inner_trials: usize,
    pub m_hat: f64,
    pub f_initial: f64,
    pub f_final: f64,
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2_effective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<KktCertificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<KktVerdict>,
}

impl ReportFile {
    /// Summarizes `report`. The stored verdict is the guarantee the method
    /// claims: eps-KKT at `2 eps` for the first-order method, the 2KKT check at
    /// `(eps, eps2_effective)` for the second-order one.
    pub fn new(report: &SolveReport, problem: &Problem, name: Option<String>) -> Self {
        let error = match &report.status {
            crate::report::SolveStatus::Error(d) => Some(d.clone()),
            _ => None,
        };
        ReportFile {
            status: report.status.as_str().into(),
            error,
            algorithm: report.algorithm.as_str().into(),
            problem: name,
            eps: report.eps,
            iterations: report.iterations,
            inner_trials: report.inner_trials,
            m_hat: report.m_hat,
            f_initial: report.f_initial,
            f_final: report.f_final,
            restarts: report.restarts,
            eps2_effective: report.eps2_effective,
            certificate: report.certificate.clone(),
            verdict: report
                .certificate
                .as_ref()
                .map(|c| report_verdict(report, problem, c)),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}
