//! Dense column-major tensors, mode unfoldings and mode contractions.
//!
//! Modes are indexed from zero. Storage is column-major: the index of mode 0
//! varies fastest. The mode-`j` unfolding places mode `j` on the rows and
//! enumerates the remaining modes on the columns in ascending mode order with
//! the lowest mode fastest, which makes unfolding and refolding a relabeling
//! of the same buffer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Maximum supported tensor order.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.len() > MAX_ORDER || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected = checked_len(&shape)?;
        if data.len() != expected {
            return Err(Error::DataLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = checked_len(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Order-0 tensor holding a single value.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn<F: FnMut(&[usize]) -> f64>(shape: &[usize], mut f: F) -> Result<Self> {
        let len = checked_len(shape)?;
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (k, n) in shape.iter().enumerate() {
                idx[k] += 1;
                if idx[k] < *n {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_vector(v: &DenseVector) -> Self {
        Self {
            shape: vec![v.len()],
            data: v.as_slice().to_vec(),
        }
    }

    pub fn from_matrix(m: &DenseMatrix) -> Self {
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The flattened data as a vector (vectorization in storage order).
    pub fn to_vector(&self) -> DenseVector {
        DenseVector::from_column_slice(&self.data)
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut stride = 1;
        let mut pos = 0;
        for (i, n) in idx.iter().zip(&self.shape) {
            debug_assert!(i < n);
            pos += i * stride;
            stride *= n;
        }
        pos
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Sizes of the blocks before, at, and after `mode`.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.shape[..mode].iter().product();
        let right = self.shape[mode + 1..].iter().product();
        (left, self.shape[mode], right)
    }

    /// Mode-`mode` unfolding: an `n_mode x prod(other sizes)` matrix.
    pub fn unfold(&self, mode: usize) -> Result<DenseMatrix> {
        self.check_mode(mode)?;
        let (left, n, right) = self.split(mode);
        let mut m = DenseMatrix::zeros(n, left * right);
        for ir in 0..right {
            for r in 0..n {
                let base = left * (r + n * ir);
                for il in 0..left {
                    m[(r, il + left * ir)] = self.data[base + il];
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn refold(m: &DenseMatrix, mode: usize, shape: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(shape)?;
        out.check_mode(mode)?;
        let (left, n, right) = out.split(mode);
        if m.nrows() != n || m.ncols() != left * right {
            return Err(Error::DimensionMismatch {
                expected: n * left * right,
                found: m.nrows() * m.ncols(),
            });
        }
        for ir in 0..right {
            for r in 0..n {
                let base = left * (r + n * ir);
                for il in 0..left {
                    out.data[base + il] = m[(r, il + left * ir)];
                }
            }
        }
        Ok(out)
    }

    /// Tensor-vector product along `mode`; the result has order one less.
    pub fn contract(&self, mode: usize, u: &[f64]) -> Result<Self> {
        self.check_mode(mode)?;
        let (left, n, right) = self.split(mode);
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.len(),
            });
        }
        let mut out = vec![0.0; left * right];
        for ir in 0..right {
            let dst = &mut out[left * ir..left * (ir + 1)];
            for (r, &c) in u.iter().enumerate() {
                let base = left * (r + n * ir);
                let src = &self.data[base..base + left];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += c * s;
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(mode);
        Ok(Self { shape, data: out })
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn fnorm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn fnorm(&self) -> f64 {
        self.fnorm_sq().sqrt()
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outer product `scale * v_0 ⊗ v_1 ⊗ ... ⊗ v_{m-1}`.
pub fn outer(scale: f64, vectors: &[&[f64]]) -> Result<DenseTensor> {
    let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    checked_len(&shape)?;
    let mut data = vec![scale];
    for v in vectors {
        let prev = std::mem::take(&mut data);
        data.reserve(prev.len() * v.len());
        for &x in v.iter() {
            data.extend(prev.iter().map(|p| p * x));
        }
    }
    DenseTensor::new(shape, data)
}

fn check_factor_columns(factors: &[DenseMatrix]) -> Result<usize> {
    let Some(first) = factors.first() else {
        return Err(Error::InvalidShape(Vec::new()));
    };
    let rank = first.ncols();
    for f in factors {
        if f.ncols() != rank {
            return Err(Error::DimensionMismatch {
                expected: rank,
                found: f.ncols(),
            });
        }
    }
    Ok(rank)
}

/// `sum_i sigmas[i] * u_{0,i} ⊗ ... ⊗ u_{d-1,i}` where `u_{j,i}` is column `i`
/// of `factors[j]`.
pub fn build_cp(sigmas: &[f64], factors: &[DenseMatrix]) -> Result<DenseTensor> {
    let rank = check_factor_columns(factors)?;
    if sigmas.len() != rank {
        return Err(Error::DimensionMismatch {
            expected: rank,
            found: sigmas.len(),
        });
    }
    let shape: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let mut out = DenseTensor::zeros(&shape)?;
    for (i, &s) in sigmas.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let cols: Vec<&[f64]> = factors.iter().map(|f| column_slice(f, i)).collect();
        out.axpy(1.0, &outer(s, &cols)?)?;
    }
    Ok(out)
}

/// Contracts every mode except `keep` against the given vectors and returns
/// the resulting vector of length `n_keep`. `vectors[keep]` is ignored.
pub fn contract_except(a: &DenseTensor, vectors: &[&[f64]], keep: usize) -> Result<DenseVector> {
    if vectors.len() != a.order() {
        return Err(Error::DimensionMismatch {
            expected: a.order(),
            found: vectors.len(),
        });
    }
    a.check_mode(keep)?;
    let mut t = a.clone();
    for mode in (keep + 1..a.order()).rev() {
        t = t.contract(mode, vectors[mode])?;
    }
    for mode in (0..keep).rev() {
        t = t.contract(mode, vectors[mode])?;
    }
    Ok(t.to_vector())
}

/// `<A, v_0 ⊗ ... ⊗ v_{d-1}>`.
pub fn contract_all(a: &DenseTensor, vectors: &[&[f64]]) -> Result<f64> {
    if vectors.len() != a.order() {
        return Err(Error::DimensionMismatch {
            expected: a.order(),
            found: vectors.len(),
        });
    }
    if a.order() == 0 {
        return Ok(a.data[0]);
    }
    let last = a.order() - 1;
    let w = contract_except(a, vectors, last)?;
    Ok(dot(w.as_slice(), vectors[last]))
}

/// Column `i` of a column-major matrix as a slice.
pub fn column_slice(m: &DenseMatrix, i: usize) -> &[f64] {
    let n = m.nrows();
    &m.as_slice()[i * n..(i + 1) * n]
}

/// Columns `i` of every factor, as slices.
pub fn factor_columns(factors: &[DenseMatrix], i: usize) -> Vec<&[f64]> {
    factors.iter().map(|f| column_slice(f, i)).collect()
}
