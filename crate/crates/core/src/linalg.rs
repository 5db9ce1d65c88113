//! Dense matrix kernels: truncated SVD, polar decomposition, nuclear norm.
//!
//! All routines are backed by faer's thin SVD, run sequentially so results
//! do not depend on the thread count. Singular triplets come out with values
//! nonincreasing; each left vector is sign-normalized (largest-magnitude
//! entry positive, first index on ties), which makes outputs reproducible
//! bit-for-bit.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{svd as faer_svd, svd_scratch, ComputeSvdVectors};
use faer::{Mat, MatRef, Par};

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, DenseVector};

#[derive(Debug, Clone)]
pub struct SvdTruncation {
    /// `rows x r`, orthonormal columns.
    pub left_vectors: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `cols x r`, orthonormal columns.
    pub right_vectors: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct PolarPair {
    /// `m x n` with orthonormal columns.
    pub orthonormal_factor: DenseMatrix,
    /// `n x n` symmetric positive semidefinite.
    pub psd_factor: DenseMatrix,
}

fn ensure_finite(m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

struct ThinSvd {
    u: DenseMatrix,
    values: Vec<f64>,
    v: DenseMatrix,
}

fn to_dense(m: MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn svd_impl(m: &DenseMatrix, vectors: bool) -> Result<ThinSvd> {
    ensure_finite(m)?;
    let (rows, cols) = m.shape();
    let size = rows.min(cols);
    let a = MatRef::from_column_major_slice(m.as_slice(), rows, cols);
    let mut s = Diag::<f64>::zeros(size);
    let (mut u, mut v) = if vectors {
        (Mat::<f64>::zeros(rows, size), Mat::<f64>::zeros(cols, size))
    } else {
        (Mat::<f64>::zeros(0, 0), Mat::<f64>::zeros(0, 0))
    };
    let compute = if vectors {
        ComputeSvdVectors::Thin
    } else {
        ComputeSvdVectors::No
    };
    let par = Par::Seq;
    let mut mem = MemBuffer::new(svd_scratch::<f64>(
        rows,
        cols,
        compute,
        compute,
        par,
        Default::default(),
    ));
    faer_svd(
        a,
        s.as_mut(),
        vectors.then(|| u.as_mut()),
        vectors.then(|| v.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::Diverged("singular value decomposition".into()))?;
    Ok(ThinSvd {
        u: to_dense(u.as_ref()),
        values: s.column_vector().iter().copied().collect(),
        v: to_dense(v.as_ref()),
    })
}

/// Index of the entry with the largest magnitude; first index on ties.
pub(crate) fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    best
}

/// Best rank-`r` factorization of `m` in the Frobenius norm.
pub fn truncated_svd(m: &DenseMatrix, r: usize) -> Result<SvdTruncation> {
    let max = m.nrows().min(m.ncols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    let svd = svd_impl(m, true)?;
    let u = &svd.u;
    let values = svd.values.as_slice();

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut left = DenseMatrix::zeros(m.nrows(), r);
    let mut right = DenseMatrix::zeros(m.ncols(), r);
    let mut singular_values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        let lcol = u.column(src);
        let sign = if lcol[argmax_abs(lcol.as_slice())] < 0.0 {
            -1.0
        } else {
            1.0
        };
        left.set_column(dst, &(lcol * sign));
        right.set_column(dst, &(svd.v.column(src) * sign));
        singular_values.push(values[src]);
    }
    Ok(SvdTruncation {
        left_vectors: left,
        singular_values,
        right_vectors: right,
    })
}

/// All singular values of `m`, nonincreasing.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    let mut s = svd_impl(m, false)?.values;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Polar decomposition `V = U H` built from the reduced SVD `V = P Λ Qᵀ` as
/// `U = P Qᵀ`, `H = Q Λ Qᵀ`. Requires `rows >= cols`.
pub fn polar_decompose(v: &DenseMatrix) -> Result<PolarPair> {
    if v.nrows() < v.ncols() {
        return Err(Error::WideMatrix {
            rows: v.nrows(),
            cols: v.ncols(),
        });
    }
    let svd = svd_impl(v, true)?;
    let q_t = svd.v.transpose();
    let lambda = DenseMatrix::from_diagonal(&DenseVector::from_vec(svd.values));
    let u = &svd.u * &q_t;
    let h = svd.v * lambda * q_t;
    let h = (&h + h.transpose()) * 0.5;
    Ok(PolarPair {
        orthonormal_factor: u,
        psd_factor: h,
    })
}

/// Sum of singular values.
pub fn nuclear_norm(v: &DenseMatrix) -> Result<f64> {
    Ok(svd_impl(v, false)?.values.iter().sum())
}

/// Extends the orthonormal columns of `u` to `cols` orthonormal columns by
/// Gram-Schmidt against the standard basis, in index order.
pub fn complete_orthonormal(u: &DenseMatrix, cols: usize) -> DenseMatrix {
    let n = u.nrows();
    assert!(cols <= n, "cannot fit {cols} orthonormal columns in R^{n}");
    let mut basis: Vec<DenseVector> = u.column_iter().map(|c| c.into_owned()).collect();
    let mut k = 0;
    while basis.len() < cols && k < n {
        let mut e = DenseVector::zeros(n);
        e[k] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&e);
                e.axpy(-c, b, 1.0);
            }
        }
        let norm = e.norm();
        if norm > 1e-8 {
            basis.push(e / norm);
        }
        k += 1;
    }
    DenseMatrix::from_columns(&basis)
}

/// `‖UᵀU − I‖_F`.
pub fn orthonormality_residual(u: &DenseMatrix) -> f64 {
    let g = u.transpose() * u;
    (g - DenseMatrix::identity(u.ncols(), u.ncols())).norm()
}
