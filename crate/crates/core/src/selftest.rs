//! Randomized consistency suites for the barrier, the step bound `sigma` and
//! the cubic solver, checked against independent brute-force computations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cones::{Barrier, Block, ConeSpec};
use crate::cubic::{certify_global, solve_cubic, CubicModel, TOL_CUBIC};
use crate::packed::{smat, svec};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest error of the exact checks (identities, oracle agreement, value gap).
    pub max_error: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Random strictly interior point of the block.
pub fn random_interior(block: &Block, rng: &mut impl Rng) -> Vec<f64> {
    match *block {
        Block::Orthant(n) => (0..n)
            .map(|_| (rng.gen_range(-2.0..2.0f64)).exp())
            .collect(),
        Block::Lorentz(n) => {
            let tail: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = tail.iter().map(|t| t * t).sum::<f64>().sqrt();
            let mut x = vec![norm + rng.gen_range(0.05..1.0)];
            x.extend(tail);
            x
        }
        Block::Psd(k) => {
            let b = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
            svec(&(&b * b.transpose() + DMatrix::identity(k, k) * 0.1))
                .as_slice()
                .to_vec()
        }
    }
}

pub fn random_point(spec: &ConeSpec, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_vec(
        spec.blocks()
            .iter()
            .flat_map(|b| random_interior(b, rng))
            .collect(),
    )
}

/// Plain membership test, independent of the barrier code.
fn member(spec: &ConeSpec, z: &DVector<f64>) -> bool {
    let mut off = 0;
    spec.blocks().iter().all(|b| {
        let n = b.ambient_dim();
        let zb = &z.as_slice()[off..off + n];
        off += n;
        match *b {
            Block::Orthant(_) => zb.iter().all(|&v| v >= 0.0),
            Block::Lorentz(_) => zb[0] >= zb[1..].iter().map(|t| t * t).sum::<f64>().sqrt(),
            Block::Psd(k) => SymmetricEigen::new(smat(zb, k)).eigenvalues.min() >= 0.0,
        }
    })
}

/// `1 / sup{t : x - t d in K}` by bracketing and bisection.
pub fn sigma_by_bisection(spec: &ConeSpec, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let inside = |t: f64| member(spec, &(x - d * t));
    let mut hi = 1.0;
    while inside(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return 0.0;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    1.0 / (0.5 * (lo + hi))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn spec_pool() -> Vec<ConeSpec> {
    [
        vec![Block::Orthant(5)],
        vec![Block::Lorentz(4)],
        vec![Block::Psd(3)],
        vec![Block::Orthant(2), Block::Lorentz(3), Block::Psd(2)],
    ]
    .into_iter()
    .map(|b| ConeSpec::new(b).expect("valid cone"))
    .collect()
}

pub fn barrier_suite(seed: u64, per_cone: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = SuiteResult {
        name: "barrier",
        cases: 0,
        failures: 0,
        max_error: 0.0,
    };
    for spec in spec_pool() {
        let bar = Barrier::new(spec.clone());
        for _ in 0..per_cone {
            let x = random_point(&spec, &mut rng);
            let local = bar.at(&x).expect("interior");
            let g = local.grad();
            let hx = local.hess_apply(&x);
            let mut err: f64 = (&hx + &g).norm() / (1.0 + g.norm());
            err = err.max(rel(hx.dot(&x), bar.nu()));
            // central differences of h along a random direction, scaled to the point
            let d = DVector::from_fn(x.len(), |_, _| rng.gen_range(-1.0..1.0));
            let step = 1e-5 / (1.0 + local.local_norm(&d));
            let fp = bar.value(&(&x + &d * step)).expect("interior");
            let fm = bar.value(&(&x - &d * step)).expect("interior");
            let fd = (fp - fm) / (2.0 * step);
            let mut fd_err = (fd - g.dot(&d)).abs() / (1.0 + g.dot(&d).abs());
            let gp = bar.grad(&(&x + &d * step)).expect("interior");
            let gm = bar.grad(&(&x - &d * step)).expect("interior");
            let hd = local.hess_apply(&d);
            fd_err = fd_err.max((&(gp - gm) / (2.0 * step) - &hd).norm() / (1.0 + hd.norm()));
            res.cases += 1;
            res.max_error = res.max_error.max(err);
            if err > 1e-8 || fd_err > 1e-5 {
                res.failures += 1;
            }
        }
    }
    res
}

pub fn sigma_suite(seed: u64, per_cone: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = SuiteResult {
        name: "sigma",
        cases: 0,
        failures: 0,
        max_error: 0.0,
    };
    for spec in spec_pool() {
        let bar = Barrier::new(spec.clone());
        for _ in 0..per_cone {
            let x = random_point(&spec, &mut rng);
            let d = DVector::from_fn(x.len(), |_, _| rng.gen_range(-1.0..1.0));
            let local = bar.at(&x).expect("interior");
            let s = local.sigma(&d);
            let oracle = sigma_by_bisection(&spec, &x, &d);
            let err = rel(s, oracle);
            res.cases += 1;
            res.max_error = res.max_error.max(err);
            if err > 1e-8 || s > local.local_norm(&d) * (1.0 + 1e-12) {
                res.failures += 1;
            }
        }
    }
    res
}

pub fn cubic_suite(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = SuiteResult {
        name: "cubic",
        cases: 0,
        failures: 0,
        max_error: 0.0,
    };
    for _ in 0..cases {
        let p = rng.gen_range(1..=3);
        let b = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let h = &b * b.transpose() + DMatrix::identity(p, p) * 0.5;
        let c = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-2.0..2.0));
        let j = (&c + c.transpose()) * 0.5;
        let g = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let reg = rng.gen_range(0.1..5.0);
        let model = CubicModel::new(g, j, h, reg).expect("valid model");
        let sol = match solve_cubic(&model, TOL_CUBIC) {
            Ok(s) => s,
            Err(_) => {
                res.cases += 1;
                res.failures += 1;
                continue;
            }
        };
        let best = model.value(&sol.u);
        // random probes in a ball that contains every minimizer
        let radius = 4.0 * (sol.u.norm() + 1.0);
        let mut worst_gap: f64 = 0.0;
        for _ in 0..2000 {
            let u = DVector::from_fn(p, |_, _| rng.gen_range(-radius..radius));
            worst_gap = worst_gap.max(best - model.value(&u));
        }
        res.cases += 1;
        res.max_error = res.max_error.max(worst_gap);
        if worst_gap > 1e-9 || !certify_global(&model, &sol, 1e-8) {
            res.failures += 1;
        }
    }
    res
}

pub fn run_selftest(seed: u64) -> Vec<SuiteResult> {
    vec![
        barrier_suite(seed, 25),
        sigma_suite(seed.wrapping_add(1), 50),
        cubic_suite(seed.wrapping_add(2), 50),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_selftest(7) {
            assert!(r.passed(), "{r:?}");
        }
    }
}
