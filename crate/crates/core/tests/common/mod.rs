//! Reference computations written from the definitions, sharing no code with
//! the library beyond its public data types.
#![allow(dead_code)]

use hessian_barrier::cones::Block;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

/// Unpacks the scaled upper triangle (column-major, off-diagonals times sqrt 2).
pub fn unpack(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        for i in 0..=j {
            let val = if i == j { v[idx] } else { v[idx] / 2f64.sqrt() };
            m[(i, j)] = val;
            m[(j, i)] = val;
            idx += 1;
        }
    }
    m
}

pub fn pack(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for j in 0..k {
        for i in 0..=j {
            out.push(if i == j {
                m[(i, j)]
            } else {
                m[(i, j)] * 2f64.sqrt()
            });
        }
    }
    out
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn split<'a>(blocks: &[Block], z: &'a [f64]) -> Vec<(Block, &'a [f64])> {
    let mut off = 0;
    blocks
        .iter()
        .map(|b| {
            let n = b.ambient_dim();
            let s = &z[off..off + n];
            off += n;
            (*b, s)
        })
        .collect()
}

pub fn barrier_value(blocks: &[Block], x: &[f64]) -> f64 {
    split(blocks, x)
        .into_iter()
        .map(|(b, xb)| match b {
            Block::Orthant(_) => -xb.iter().map(|v| v.ln()).sum::<f64>(),
            Block::Lorentz(_) => -(xb[0] * xb[0] - xb[1..].iter().map(|t| t * t).sum::<f64>()).ln(),
            Block::Psd(k) => {
                let chol = unpack(xb, k).cholesky().expect("interior point");
                -2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
            }
        })
        .sum()
}

pub fn nu(blocks: &[Block]) -> f64 {
    blocks
        .iter()
        .map(|b| match *b {
            Block::Orthant(n) => n as f64,
            Block::Lorentz(_) => 2.0,
            Block::Psd(k) => k as f64,
        })
        .sum()
}

pub fn member(blocks: &[Block], z: &[f64]) -> bool {
    split(blocks, z).into_iter().all(|(b, zb)| match b {
        Block::Orthant(_) => zb.iter().all(|&v| v >= 0.0),
        Block::Lorentz(_) => zb[0] >= zb[1..].iter().map(|t| t * t).sum::<f64>().sqrt(),
        Block::Psd(k) => min_eig(&unpack(zb, k)) >= 0.0,
    })
}

/// `1 / sup{t >= 0 : x - t d in K}` by bracketing and bisection on membership.
pub fn sigma_bisection(blocks: &[Block], x: &[f64], d: &[f64]) -> f64 {
    let at = |t: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a - t * b).collect() };
    let mut hi = 1e-6;
    while member(blocks, &at(hi)) {
        hi *= 2.0;
        if hi > 1e15 {
            return 0.0;
        }
    }
    let mut lo = hi / 2.0;
    if !member(blocks, &at(lo)) {
        lo = 0.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if member(blocks, &at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    2.0 / (lo + hi)
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Central-difference Jacobian of `g` (columns are directional derivatives along `e_i`).
pub fn fd_jacobian(
    g: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        m.set_column(i, &((g(&xp) - g(&xm)) / (2.0 * h)));
    }
    m
}

pub fn random_interior(block: &Block, rng: &mut impl Rng) -> Vec<f64> {
    match *block {
        Block::Orthant(n) => (0..n).map(|_| rng.gen_range(-1.5..1.5f64).exp()).collect(),
        Block::Lorentz(n) => {
            let tail: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = tail.iter().map(|t| t * t).sum::<f64>().sqrt();
            let mut x = vec![norm + rng.gen_range(0.1..1.0)];
            x.extend(tail);
            x
        }
        Block::Psd(k) => {
            let b = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
            pack(&(&b * b.transpose() + DMatrix::identity(k, k) * 0.2))
        }
    }
}

pub fn random_point(blocks: &[Block], rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_vec(
        blocks
            .iter()
            .flat_map(|b| random_interior(b, rng))
            .collect(),
    )
}

/// `<g,u> + 1/2 <J u,u> + (L/6) |u|_H^3`.
pub fn cubic_value(
    g: &DVector<f64>,
    j: &DMatrix<f64>,
    h: &DMatrix<f64>,
    l: f64,
    u: &DVector<f64>,
) -> f64 {
    let r = (h * u).dot(u).max(0.0).sqrt();
    g.dot(u) + 0.5 * (j * u).dot(u) + l / 6.0 * r * r * r
}

/// Dense row-major copy of a small model, evaluated without allocation.
struct Flat {
    p: usize,
    g: Vec<f64>,
    j: Vec<f64>,
    h: Vec<f64>,
    l: f64,
}

impl Flat {
    fn eval(&self, u: &[f64]) -> f64 {
        let p = self.p;
        let (mut lin, mut quad, mut hq) = (0.0, 0.0, 0.0);
        for a in 0..p {
            lin += self.g[a] * u[a];
            for b in 0..p {
                quad += u[a] * self.j[a * p + b] * u[b];
                hq += u[a] * self.h[a * p + b] * u[b];
            }
        }
        let r = hq.max(0.0).sqrt();
        lin + 0.5 * quad + self.l / 6.0 * r * r * r
    }
}

/// Global minimum of the cubic model by a uniform grid over a box that holds
/// every minimizer, followed by a shrinking compass search from the best cells.
pub fn cubic_brute_force(
    g: &DVector<f64>,
    j: &DMatrix<f64>,
    h: &DMatrix<f64>,
    l: f64,
) -> (f64, DVector<f64>) {
    let p = g.len();
    let flat = Flat {
        p,
        g: g.iter().copied().collect(),
        j: j.transpose().iter().copied().collect(),
        h: h.transpose().iter().copied().collect(),
        l,
    };
    let h_min = SymmetricEigen::new(h.clone()).eigenvalues.min();
    // |g|_* and the most negative curvature of J relative to H
    let g_dual = (h.clone().cholesky().unwrap().solve(g)).dot(g).sqrt();
    let lam = (-generalized_min_eig(j, h)).max(0.0);
    // m(u) <= 0 at a minimizer forces (L/6) r^2 <= |g|_* + (lam/2) r
    let r_max = 3.0 * lam / l + (9.0 * lam * lam / (l * l) + 6.0 * g_dual / l).sqrt();
    let radius = r_max / h_min.sqrt() * 1.05 + 1e-12;
    let per_axis: usize = match p {
        1 => 4001,
        2 => 301,
        _ => 61,
    };
    let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64;
    let mut cells: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; p];
    let mut u = vec![0.0; p];
    loop {
        for a in 0..p {
            u[a] = coord(idx[a]);
        }
        let val = flat.eval(&u);
        // keep only a short list of the best cells
        if cells.len() < 8 || val < cells[cells.len() - 1].0 {
            cells.push((val, u.clone()));
            cells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            cells.truncate(8);
        }
        let mut k = 0;
        while k < p {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == p {
            break;
        }
    }
    let cell = 2.0 * radius / (per_axis - 1) as f64;
    let mut best = (f64::INFINITY, vec![0.0; p]);
    for (_, start) in cells {
        let polished = compass_search(&flat, start, cell);
        if polished.0 < best.0 {
            best = polished;
        }
    }
    (best.0, DVector::from_vec(best.1))
}

fn generalized_min_eig(j: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let l = h.clone().cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let w = &linv * j * linv.transpose();
    min_eig(&(0.5 * (&w + w.transpose())))
}

fn compass_search(flat: &Flat, mut u: Vec<f64>, mut step: f64) -> (f64, Vec<f64>) {
    let mut fu = flat.eval(&u);
    while step > 1e-13 * (1.0 + u.iter().map(|t| t.abs()).fold(0.0, f64::max)) {
        let mut improved = false;
        for i in 0..flat.p {
            for s in [1.0, -1.0] {
                let keep = u[i];
                u[i] += s * step;
                let ft = flat.eval(&u);
                if ft < fu {
                    fu = ft;
                    improved = true;
                } else {
                    u[i] = keep;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (fu, u)
}

/// Orthonormal basis of `ker A` from the SVD of `A`.
pub fn kernel_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // eigenvectors of A^T A with zero eigenvalue
    let eig = SymmetricEigen::new(a.transpose() * a);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<_> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Smallest objective value over the vertices of the standard simplex.
pub fn simplex_vertex_min(f: impl Fn(&DVector<f64>) -> f64, n: usize) -> (f64, usize) {
    (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            (f(&e), i)
        })
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
}

/// Euclidean projection onto `{x : sum x = 1}` (valid as the simplex
/// projection whenever the result is positive).
pub fn project_onto_sum_one(p: &DVector<f64>) -> DVector<f64> {
    let n = p.len() as f64;
    p.add_scalar((1.0 - p.sum()) / n)
}
