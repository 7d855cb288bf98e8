//! Packed storage for symmetric matrices.
//!
//! A symmetric `n x n` matrix is stored as its upper triangle, column by
//! column: entry `(i, j)` with `i <= j` lives at index `j (j + 1) / 2 + i`.
//! Off-diagonal entries are scaled by `sqrt(2)` so that the Euclidean inner
//! product of two packed vectors equals the trace inner product of the
//! matrices, and the Euclidean norm equals the Frobenius norm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Number of packed coordinates for a symmetric matrix of the given order.
pub fn packed_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Order `n` with `n (n + 1) / 2 == len`, if one exists.
pub fn order_from_len(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n..=n + 1).find(|&k| packed_len(k) == len)
}

#[inline]
fn index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Unpack `v` into a dense symmetric matrix.
pub fn smat(v: &[f64], order: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), packed_len(order));
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(order, order, |i, j| {
        let e = v[index(i, j)];
        if i == j {
            e
        } else {
            e * inv_sqrt2
        }
    })
}

/// Pack the symmetric part of `m` into `out`.
pub fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let order = m.nrows();
    debug_assert_eq!(out.len(), packed_len(order));
    let sqrt2 = std::f64::consts::SQRT_2;
    for j in 0..order {
        for i in 0..=j {
            out[index(i, j)] = if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)]) * sqrt2
            };
        }
    }
}

pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(packed_len(m.nrows()));
    svec_into(m, out.as_mut_slice());
    out
}

/// Packed identity matrix.
pub fn packed_identity(order: usize) -> DVector<f64> {
    svec(&DMatrix::identity(order, order))
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V diag(f(lambda)) V^T` for an eigendecomposition `(lambda, V)`.
pub(crate) fn spectral_fn(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f(values[k]);
    }
    &scaled * vectors.transpose()
}
