//! Logarithmically homogeneous self-scaled barriers for products of the
//! non-negative orthant, the Lorentz (second-order) cone and the cone of
//! positive semidefinite matrices.
//!
//! All vectors live in the ambient coordinate space of a [`ConeSpec`]: the
//! concatenation of the blocks, with PSD blocks in the scaled packed form of
//! [`crate::packed`]. Under this convention every block is self-dual with
//! respect to the Euclidean inner product.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationCode};
use crate::packed::{packed_len, smat, sorted_eigen, spectral_fn, svec_into};

/// Relative margin required for strict interiority.
pub const TOL_INT: f64 = 1e-12;
/// Relative slack allowed by non-strict membership tests.
pub const TOL_CONE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    /// `dim` non-negative coordinates.
    Orthant(usize),
    /// `{(x0, xbar) : x0 >= |xbar|}` with `dim` coordinates in total.
    Lorentz(usize),
    /// Symmetric PSD matrices of the given order.
    Psd(usize),
}

impl Block {
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Block::Orthant(n) | Block::Lorentz(n) => n,
            Block::Psd(n) => packed_len(n),
        }
    }

    /// Barrier parameter of the standard logarithmic barrier on this block.
    pub fn nu(&self) -> f64 {
        match *self {
            Block::Orthant(n) | Block::Psd(n) => n as f64,
            Block::Lorentz(_) => 2.0,
        }
    }
}

/// Ordered list of cone blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    dim: usize,
}

impl ConeSpec {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::validation(
                ValidationCode::BadCone,
                "at least one cone block is required",
            ));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for (i, b) in blocks.iter().enumerate() {
            let ok = match *b {
                Block::Orthant(n) | Block::Psd(n) => n >= 1,
                Block::Lorentz(n) => n >= 2,
            };
            if !ok {
                return Err(Error::validation(
                    ValidationCode::BadCone,
                    format!("cone block {i} ({b:?}) has an invalid size"),
                ));
            }
            offsets.push(dim);
            dim += b.ambient_dim();
        }
        Ok(ConeSpec {
            blocks,
            offsets,
            dim,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Total ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> f64 {
        self.blocks.iter().map(Block::nu).sum()
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.offsets[i];
        start..start + self.blocks[i].ambient_dim()
    }

    fn iter(&self) -> impl Iterator<Item = (usize, Block, std::ops::Range<usize>)> + '_ {
        (0..self.blocks.len()).map(move |i| (i, self.blocks[i], self.block_range(i)))
    }

    /// Per-block defining scalar: `min z_i` (orthant), `z0 - |zbar|`
    /// (Lorentz), smallest eigenvalue (PSD). Positive iff strictly interior.
    pub fn block_margins(&self, z: &DVector<f64>) -> Vec<f64> {
        self.iter()
            .map(|(_, b, r)| defining_scalar(b, &z.as_slice()[r]))
            .collect()
    }

    /// Smallest defining scalar over all blocks.
    pub fn interior_margin(&self, z: &DVector<f64>) -> f64 {
        self.block_margins(z)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Block-wise membership of `z` in the cone.
    ///
    /// Strict membership requires a margin of at least `TOL_INT (1 + |z_b|)`,
    /// non-strict membership tolerates `-TOL_CONE (1 + |z_b|)`.
    pub fn is_member(&self, z: &DVector<f64>, strict: bool) -> bool {
        if z.len() != self.dim {
            return false;
        }
        self.iter().all(|(_, b, r)| {
            let zb = &z.as_slice()[r];
            let scale = 1.0 + norm(zb);
            let m = defining_scalar(b, zb);
            if strict {
                m > TOL_INT * scale
            } else {
                m >= -TOL_CONE * scale
            }
        })
    }

    /// Dual-cone membership. All supported blocks are self-dual.
    pub fn is_dual_member(&self, s: &DVector<f64>) -> bool {
        self.is_member(s, false)
    }

    /// First block in which `x` fails strict interiority.
    pub fn first_non_interior(&self, x: &DVector<f64>) -> Option<usize> {
        self.iter().find_map(|(i, b, r)| {
            let xb = &x.as_slice()[r];
            let m = defining_scalar(b, xb);
            (!(m > TOL_INT * (1.0 + norm(xb)))).then_some(i)
        })
    }

    /// A canonical strictly interior point: ones, `(1, 0, ..)` and identity.
    pub fn unit_point(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim);
        for (_, b, r) in self.iter() {
            let eb = &mut e.as_mut_slice()[r];
            match b {
                Block::Orthant(_) => eb.fill(1.0),
                Block::Lorentz(_) => eb[0] = 1.0,
                Block::Psd(n) => svec_into(&DMatrix::identity(n, n), eb),
            }
        }
        e
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn defining_scalar(block: Block, z: &[f64]) -> f64 {
    match block {
        Block::Orthant(_) => z.iter().copied().fold(f64::INFINITY, f64::min),
        Block::Lorentz(_) => z[0] - norm(&z[1..]),
        Block::Psd(n) => {
            let m = smat(z, n);
            if m.iter().any(|v| !v.is_finite()) {
                return f64::NAN;
            }
            sorted_eigen(&m).0[0]
        }
    }
}

/// Which quantity controls the admissible step length along a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ZetaMode {
    /// Local norm `|d|_x`, valid for any self-concordant barrier.
    GeneralSc,
    /// `sigma_x(-d)`, valid for self-scaled barriers and never larger.
    #[default]
    SelfScaled,
}

/// The standard logarithmic barrier on a product cone.
#[derive(Debug, Clone)]
pub struct Barrier {
    spec: ConeSpec,
    nu: f64,
}

impl Barrier {
    pub fn new(spec: ConeSpec) -> Self {
        let nu = spec.nu();
        Barrier { spec, nu }
    }

    pub fn spec(&self) -> &ConeSpec {
        &self.spec
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Factor the barrier at `x`; fails unless `x` is strictly interior.
    pub fn at(&self, x: &DVector<f64>) -> Result<LocalBarrier<'_>> {
        LocalBarrier::new(self, x)
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.at(x)?.value())
    }

    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.at(x)?.grad())
    }

    pub fn hessian_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.at(x)?.hess_apply(v))
    }

    pub fn hessian_inv_apply(&self, x: &DVector<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.at(x)?.hess_inv_apply(s))
    }

    pub fn hessian_sqrt_apply(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
        inverse: bool,
    ) -> Result<DVector<f64>> {
        Ok(self.at(x)?.hess_sqrt_apply(v, inverse))
    }

    pub fn local_norm(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        Ok(self.at(x)?.local_norm(v))
    }

    pub fn dual_local_norm(&self, x: &DVector<f64>, s: &DVector<f64>) -> Result<f64> {
        Ok(self.at(x)?.dual_local_norm(s))
    }

    pub fn sigma(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<f64> {
        Ok(self.at(x)?.sigma(d))
    }

    pub fn zeta(&self, x: &DVector<f64>, d: &DVector<f64>, mode: ZetaMode) -> Result<f64> {
        Ok(self.at(x)?.zeta(d, mode))
    }
}

#[derive(Debug, Clone)]
enum BlockFactor {
    Orthant,
    Lorentz {
        /// x0^2 - |xbar|^2
        q: f64,
    },
    Psd {
        order: usize,
        values: DVector<f64>,
        vectors: DMatrix<f64>,
        inv: DMatrix<f64>,
        inv_sqrt: DMatrix<f64>,
    },
}

/// Barrier data factored at one strictly interior point.
#[derive(Debug, Clone)]
pub struct LocalBarrier<'a> {
    barrier: &'a Barrier,
    x: DVector<f64>,
    factors: Vec<BlockFactor>,
}

impl<'a> LocalBarrier<'a> {
    fn new(barrier: &'a Barrier, x: &DVector<f64>) -> Result<Self> {
        let spec = &barrier.spec;
        assert_eq!(x.len(), spec.dim, "point dimension does not match the cone");
        let mut factors = Vec::with_capacity(spec.blocks.len());
        for (i, b, r) in spec.iter() {
            let xb = &x.as_slice()[r];
            let scale = 1.0 + norm(xb);
            let f = match b {
                Block::Orthant(_) => {
                    if !xb.iter().all(|&v| v > TOL_INT * scale) {
                        return Err(Error::NotInterior { block: i });
                    }
                    BlockFactor::Orthant
                }
                Block::Lorentz(_) => {
                    let tail = norm(&xb[1..]);
                    if !(xb[0] - tail > TOL_INT * scale) {
                        return Err(Error::NotInterior { block: i });
                    }
                    BlockFactor::Lorentz {
                        q: (xb[0] - tail) * (xb[0] + tail),
                    }
                }
                Block::Psd(n) => {
                    let m = smat(xb, n);
                    if m.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NotInterior { block: i });
                    }
                    let (values, vectors) = sorted_eigen(&m);
                    let lmin = values[0];
                    let lmax = values[n - 1];
                    if !(lmin > TOL_INT * scale && lmin > TOL_INT * lmax) {
                        return Err(Error::NotInterior { block: i });
                    }
                    let inv = spectral_fn(&values, &vectors, |l| 1.0 / l);
                    let inv_sqrt = spectral_fn(&values, &vectors, |l| 1.0 / l.sqrt());
                    BlockFactor::Psd {
                        order: n,
                        values,
                        vectors,
                        inv,
                        inv_sqrt,
                    }
                }
            };
            factors.push(f);
        }
        Ok(LocalBarrier {
            barrier,
            x: x.clone(),
            factors,
        })
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn barrier(&self) -> &Barrier {
        self.barrier
    }

    pub fn nu(&self) -> f64 {
        self.barrier.nu
    }

    fn blocks(&self) -> impl Iterator<Item = (&BlockFactor, std::ops::Range<usize>)> + '_ {
        self.factors
            .iter()
            .enumerate()
            .map(move |(i, f)| (f, self.barrier.spec.block_range(i)))
    }

    /// Apply a block-wise map `(factor, x_b, in_b, out_b)`.
    fn map_blocks(
        &self,
        input: &DVector<f64>,
        f: impl Fn(&BlockFactor, &[f64], &[f64], &mut [f64]),
    ) -> DVector<f64> {
        assert_eq!(
            input.len(),
            self.x.len(),
            "vector dimension does not match the cone"
        );
        let mut out = DVector::zeros(input.len());
        for (fac, r) in self.blocks() {
            f(
                fac,
                &self.x.as_slice()[r.clone()],
                &input.as_slice()[r.clone()],
                &mut out.as_mut_slice()[r],
            );
        }
        out
    }

    /// `h(x)`: `-sum ln x_i`, `-ln(x0^2 - |xbar|^2)`, `-ln det X`.
    pub fn value(&self) -> f64 {
        self.blocks()
            .map(|(fac, r)| match fac {
                BlockFactor::Orthant => -self.x.as_slice()[r].iter().map(|v| v.ln()).sum::<f64>(),
                BlockFactor::Lorentz { q } => -q.ln(),
                BlockFactor::Psd { values, .. } => -values.iter().map(|l| l.ln()).sum::<f64>(),
            })
            .sum()
    }

    pub fn grad(&self) -> DVector<f64> {
        self.map_blocks(&self.x, |fac, xb, _, out| match fac {
            BlockFactor::Orthant => {
                for (o, &x) in out.iter_mut().zip(xb) {
                    *o = -1.0 / x;
                }
            }
            BlockFactor::Lorentz { q } => {
                out[0] = -2.0 * xb[0] / q;
                for k in 1..xb.len() {
                    out[k] = 2.0 * xb[k] / q;
                }
            }
            BlockFactor::Psd { inv, .. } => svec_into(&(-inv), out),
        })
    }

    /// `H(x) v`.
    pub fn hess_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(v, |fac, xb, vb, out| match fac {
            BlockFactor::Orthant => {
                for k in 0..xb.len() {
                    out[k] = vb[k] / (xb[k] * xb[k]);
                }
            }
            BlockFactor::Lorentz { q } => {
                // H = (2/q)(-J) + (4/q^2) (Jx)(Jx)^T with J = diag(1, -1, ..)
                let xjv = xb[0] * vb[0] - dot(&xb[1..], &vb[1..]);
                let c = 4.0 * xjv / (q * q);
                out[0] = -2.0 * vb[0] / q + c * xb[0];
                for k in 1..xb.len() {
                    out[k] = 2.0 * vb[k] / q - c * xb[k];
                }
            }
            BlockFactor::Psd { order, inv, .. } => {
                let m = smat(vb, *order);
                svec_into(&(inv * m * inv), out);
            }
        })
    }

    /// `H(x)^{-1} s`.
    pub fn hess_inv_apply(&self, s: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(s, |fac, xb, sb, out| match fac {
            BlockFactor::Orthant => {
                for k in 0..xb.len() {
                    out[k] = xb[k] * xb[k] * sb[k];
                }
            }
            BlockFactor::Lorentz { q } => {
                // H^{-1} = -(q/2) J + x x^T
                let xs = dot(xb, sb);
                out[0] = -0.5 * q * sb[0] + xs * xb[0];
                for k in 1..xb.len() {
                    out[k] = 0.5 * q * sb[k] + xs * xb[k];
                }
            }
            BlockFactor::Psd { order, .. } => {
                let x = smat(xb, *order);
                let m = smat(sb, *order);
                svec_into(&(&x * m * &x), out);
            }
        })
    }

    /// `H(x)^{1/2} v`, or `H(x)^{-1/2} v` when `inverse` is set (principal roots).
    pub fn hess_sqrt_apply(&self, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        self.map_blocks(v, |fac, xb, vb, out| match fac {
            BlockFactor::Orthant => {
                for k in 0..xb.len() {
                    out[k] = if inverse {
                        xb[k] * vb[k]
                    } else {
                        vb[k] / xb[k]
                    };
                }
            }
            BlockFactor::Lorentz { q } => {
                let h = lorentz_hessian(xb, *q);
                let (values, vectors) = sorted_eigen(&h);
                let root = if inverse {
                    spectral_fn(&values, &vectors, |l| 1.0 / l.sqrt())
                } else {
                    spectral_fn(&values, &vectors, f64::sqrt)
                };
                let r = root * DVector::from_column_slice(vb);
                out.copy_from_slice(r.as_slice());
            }
            BlockFactor::Psd {
                order,
                values,
                vectors,
                inv_sqrt,
                ..
            } => {
                let m = smat(vb, *order);
                if inverse {
                    let sq = spectral_fn(values, vectors, f64::sqrt);
                    svec_into(&(&sq * m * &sq), out);
                } else {
                    svec_into(&(inv_sqrt * m * inv_sqrt), out);
                }
            }
        })
    }

    /// Dense matrix of `H(x)`.
    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let n = self.x.len();
        let mut h = DMatrix::zeros(n, n);
        for (fac, r) in self.blocks() {
            let xb = &self.x.as_slice()[r.clone()];
            let block = match fac {
                BlockFactor::Orthant => DMatrix::from_diagonal(&DVector::from_iterator(
                    xb.len(),
                    xb.iter().map(|x| 1.0 / (x * x)),
                )),
                BlockFactor::Lorentz { q } => lorentz_hessian(xb, *q),
                BlockFactor::Psd { .. } => {
                    let len = r.len();
                    let mut m = DMatrix::zeros(len, len);
                    for c in 0..len {
                        let mut e = DVector::zeros(n);
                        e[r.start + c] = 1.0;
                        let col = self.hess_apply(&e);
                        m.set_column(c, &col.rows(r.start, len));
                    }
                    m
                }
            };
            h.view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&block);
        }
        h
    }

    /// `|v|_x = <H(x) v, v>^{1/2}`.
    pub fn local_norm(&self, v: &DVector<f64>) -> f64 {
        self.hess_apply(v).dot(v).max(0.0).sqrt()
    }

    /// `|s|*_x = <H(x)^{-1} s, s>^{1/2}`.
    pub fn dual_local_norm(&self, s: &DVector<f64>) -> f64 {
        self.hess_inv_apply(s).dot(s).max(0.0).sqrt()
    }

    /// `sigma_x(d) = (sup { t : x - t d in K })^{-1}`, zero when the ray never leaves the cone.
    pub fn sigma(&self, d: &DVector<f64>) -> f64 {
        assert_eq!(
            d.len(),
            self.x.len(),
            "direction dimension does not match the cone"
        );
        self.blocks()
            .map(|(fac, r)| {
                let xb = &self.x.as_slice()[r.clone()];
                let db = &d.as_slice()[r];
                match fac {
                    BlockFactor::Orthant => {
                        xb.iter().zip(db).map(|(x, d)| d / x).fold(0.0, f64::max)
                    }
                    BlockFactor::Lorentz { q } => lorentz_sigma(xb, db, *q),
                    BlockFactor::Psd {
                        order, inv_sqrt, ..
                    } => {
                        let scaled = inv_sqrt * smat(db, *order) * inv_sqrt;
                        let (values, _) = sorted_eigen(&scaled);
                        values[*order - 1].max(0.0)
                    }
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn zeta(&self, d: &DVector<f64>, mode: ZetaMode) -> f64 {
        match mode {
            ZetaMode::GeneralSc => self.local_norm(d),
            ZetaMode::SelfScaled => self.sigma(&(-d)),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lorentz_hessian(xb: &[f64], q: f64) -> DMatrix<f64> {
    let n = xb.len();
    let mut jx = DVector::from_column_slice(xb);
    for k in 1..n {
        jx[k] = -jx[k];
    }
    let mut h = &jx * jx.transpose() * (4.0 / (q * q));
    h[(0, 0)] -= 2.0 / q;
    for k in 1..n {
        h[(k, k)] += 2.0 / q;
    }
    h
}

/// `sigma` on one Lorentz block via the boost `B` that maps `u = x / sqrt(q)`
/// to `e = (1, 0)`: `x - t d in K` iff `sqrt(q) e - t B d in K`, so
/// `sigma = max(0, (w0 + |w_bar|) / sqrt(q))` with `w = B d`. Unlike the roots
/// of `q(x - t d) = 0`, this stays accurate at tangential (double) roots.
fn lorentz_sigma(xb: &[f64], db: &[f64], q: f64) -> f64 {
    let sq = q.sqrt();
    let u0 = xb[0] / sq;
    let ubar: Vec<f64> = xb[1..].iter().map(|v| v / sq).collect();
    let ud = dot(&ubar, &db[1..]);
    let w0 = u0 * db[0] - ud;
    let coef = ud / (1.0 + u0) - db[0];
    let wbar = norm(
        &db[1..]
            .iter()
            .zip(&ubar)
            .map(|(d, u)| d + coef * u)
            .collect::<Vec<_>>(),
    );
    ((w0 + wbar) / sq).max(0.0)
}

/// `omega(t) = (-t - ln(1 - t)) / t^2` on `[0, 1)`, with `omega(0) = 1/2`.
pub fn omega(t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain {
            function: "omega",
            value: t,
        });
    }
    if t.abs() < 1e-4 {
        return Ok(0.5 + t / 3.0 + t * t / 4.0 + t * t * t / 5.0);
    }
    Ok((-t - (-t).ln_1p()) / (t * t))
}

/// `omega_*(t) = -t - ln(1 - t)` on `[0, 1)`.
pub fn omega_star(t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain {
            function: "omega_star",
            value: t,
        });
    }
    Ok(-t - (-t).ln_1p())
}
