mod common;

use std::path::Path;
use std::sync::Arc;

use hessian_barrier::ahba::{ahba_restart_solve, ahba_solve, restart_count, AhbaConfig};
use hessian_barrier::cones::{Barrier, Block, ConeSpec};
use hessian_barrier::io::load_problem_file;
use hessian_barrier::kkt::{check_2kkt, check_eps_kkt};
use hessian_barrier::metric::FeasibleSet;
use hessian_barrier::problem::{
    DistanceToPoint, FnObjective, NegativeSqNorm, Objective, Problem, Quadratic,
};
use hessian_barrier::report::SolveStatus;
use hessian_barrier::sahba::{sahba_solve, so_linesearch_check, SahbaConfig};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn simplex(obj: impl Objective + 'static, n: usize) -> Problem {
    let feasible = FeasibleSet::new(
        DMatrix::from_element(1, n, 1.0),
        DVector::from_element(1, 1.0),
    )
    .unwrap();
    let barrier = Barrier::new(ConeSpec::new(vec![Block::Orthant(n)]).unwrap());
    Problem::new(
        Arc::new(obj),
        feasible,
        barrier,
        Some(DVector::from_element(n, 1.0 / n as f64)),
    )
    .unwrap()
}

#[test]
fn linesearch_constant_for_cubic_sum() {
    // f = sum x_i^3: the Taylor remainders are sum d_i^3 and 3 d∘d exactly
    let n = 3;
    let obj = FnObjective::new(
        |x: &DVector<f64>| x.iter().map(|v| v.powi(3)).sum(),
        |x: &DVector<f64>| x.map(|v| 3.0 * v * v),
    )
    .with_hessian(|x: &DVector<f64>, v: &DVector<f64>| x.component_mul(v) * 6.0);
    let barrier = Barrier::new(ConeSpec::new(vec![Block::Orthant(n)]).unwrap());
    let problem =
        Problem::new(Arc::new(obj), FeasibleSet::unconstrained(n), barrier, None).unwrap();
    let x = DVector::from_vec(vec![1.0, 0.5, 2.0]);
    for d in [
        DVector::from_vec(vec![0.3, 0.1, -0.5]),
        DVector::from_vec(vec![-0.2, 0.2, 0.4]),
    ] {
        let z = &x + &d;
        let r = d.component_div(&x).norm();
        let cubic_rem: f64 = d.iter().map(|v: &f64| v.powi(3)).sum();
        let grad_rem = (x.component_mul(&d.component_mul(&d)) * 3.0).norm();
        let l_star = (6.0 * cubic_rem / r.powi(3)).max(2.0 * grad_rem / (r * r));
        assert!(so_linesearch_check(&problem, &x, &z, l_star * (1.0 + 1e-6)).unwrap());
        assert!(!so_linesearch_check(&problem, &x, &z, l_star * (1.0 - 1e-6)).unwrap());
    }
}

#[test]
fn first_order_lp_reaches_the_best_vertex() {
    let c = DVector::from_vec(vec![0.4, 0.9, 0.2, 0.7, 0.5]);
    let problem = simplex(Quadratic::linear(c.clone()), 5);
    let (fmin, best) = common::simplex_vertex_min(|x| c.dot(x), 5);
    let report = ahba_solve(&problem, &AhbaConfig::new(1e-3)).unwrap();
    assert_eq!(report.status, SolveStatus::KktReached);
    let cert = report.certificate.unwrap();
    // complementarity bounds the mass off the best vertex by eps / gap
    assert!(cert.x[best] > 1.0 - 2e-3 / 0.2, "{}", cert.x);
    assert!(report.f_final - fmin < 2e-3);
}

#[test]
fn second_order_qp_matches_projection() {
    let point = DVector::from_vec(vec![0.5, 0.1, 0.3, 0.25]);
    let target = common::project_onto_sum_one(&point);
    assert!(target.min() > 0.0);
    let problem = simplex(DistanceToPoint { point, weight: 1.0 }, 4);
    let report = sahba_solve(&problem, &SahbaConfig::new(1e-4)).unwrap();
    assert_eq!(report.status, SolveStatus::KktReached);
    let x = &report.certificate.as_ref().unwrap().x;
    assert!((x - &target).norm() < 1e-3, "{x} vs {target}");
}

#[test]
fn second_order_escapes_the_concave_centroid() {
    let n = 4;
    let problem = simplex(NegativeSqNorm { scale: 1.0 }, n);
    let eps = 1e-3;
    let report = sahba_solve(&problem, &SahbaConfig::new(eps)).unwrap();
    assert_eq!(report.status, SolveStatus::KktReached);
    let cert = report.certificate.as_ref().unwrap();
    let eps2 = report.eps2_effective.unwrap();
    assert!(check_2kkt(&problem, cert, eps, eps2).unwrap().passed());

    // reduced curvature Z^T (-I + sqrt(eps2) X^{-2}) Z from an independent kernel basis
    let x = &cert.x;
    let z = common::kernel_basis(&DMatrix::from_element(1, n, 1.0));
    let m = -DMatrix::identity(n, n) + DMatrix::from_diagonal(&x.map(|v| eps2.sqrt() / (v * v)));
    let reduced = z.transpose() * m * &z;
    let eig = SymmetricEigen::new(reduced).eigenvalues;
    assert!(eig.min() >= -1e-8 * eig.amax(), "{eig}");
    // the centroid is first-order stationary but a saddle; the iterates leave it
    let (fmin, _) = common::simplex_vertex_min(|v| -0.5 * v.norm_squared(), n);
    assert!(report.f_final < -0.5 / n as f64 - 0.1, "{}", report.f_final);
    assert!(report.f_final >= fmin - 1e-12);
}

#[test]
fn first_order_stop_at_the_concave_centroid() {
    // the centroid has v = 0, so the first-order method stops at once
    let problem = simplex(NegativeSqNorm { scale: 1.0 }, 4);
    let report = ahba_solve(&problem, &AhbaConfig::new(1e-3)).unwrap();
    assert_eq!(report.iterations, 0);
    assert!(check_eps_kkt(&problem, report.certificate.as_ref().unwrap(), 2e-3).passed());
}

#[test]
fn restarts_reach_the_target_accuracy() {
    let point = DVector::from_vec(vec![0.8, 0.6, -0.2, 0.1]);
    let problem = simplex(DistanceToPoint { point, weight: 1.0 }, 4);
    let eps = 1e-3;
    let report = ahba_restart_solve(&problem, &AhbaConfig::new(eps), 1.0).unwrap();
    assert_eq!(report.status, SolveStatus::KktReached);
    assert_eq!(report.restarts, restart_count(1.0, eps));
    assert!(check_eps_kkt(&problem, report.certificate.as_ref().unwrap(), 2.0 * eps).passed());
}

#[test]
fn halving_eps_grows_iterations_moderately() {
    let point = DVector::from_vec(vec![0.8, 0.6, -0.2, 0.1]);
    let problem = simplex(DistanceToPoint { point, weight: 1.0 }, 4);
    let iters: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&e| {
            ahba_solve(&problem, &AhbaConfig::new(e))
                .unwrap()
                .iterations as f64
        })
        .collect();
    // the worst-case count scales as 1/eps^2, i.e. x4 per halving
    for w in iters.windows(2) {
        assert!(w[1] >= w[0] && w[1] <= 4.0 * w[0] + 4.0, "{iters:?}");
    }
}

#[test]
fn sample_problems_are_solved_by_both_methods() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems");
    let eps = 1e-3;
    for name in [
        "simplex_lp",
        "convex_qp",
        "negative_sqnorm",
        "soc_linear",
        "psd_trace",
    ] {
        let (file, problem) = load_problem_file(dir.join(format!("{name}.json"))).unwrap();
        let fmin = file.known_fmin.unwrap();
        let a = ahba_solve(&problem, &AhbaConfig::new(eps)).unwrap();
        assert!(a.certified(), "{name}");
        assert!(
            check_eps_kkt(&problem, a.certificate.as_ref().unwrap(), 2.0 * eps).passed(),
            "{name}"
        );
        let s = sahba_solve(&problem, &SahbaConfig::new(eps)).unwrap();
        assert!(s.certified(), "{name}");
        for f in [a.f_final, s.f_final] {
            assert!(f >= fmin - 1e-9, "{name}: {f} below {fmin}");
        }
        // a convex instance must also come close to the optimal value
        if name != "negative_sqnorm" {
            assert!(
                a.f_final - fmin < 10.0 * eps,
                "{name}: {} vs {fmin}",
                a.f_final
            );
            assert!(
                s.f_final - fmin < 10.0 * eps,
                "{name}: {} vs {fmin}",
                s.f_final
            );
        }
    }
}
