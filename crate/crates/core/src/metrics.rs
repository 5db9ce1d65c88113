//! Objective values, residuals, theoretical approximation ratios and
//! factor-recovery errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::linalg::singular_values;
use crate::tensor::{build_cp, contract_all, factor_columns, DenseMatrix, DenseTensor};

/// `G = Σ_i ⟨A, u_{0,i} ⊗ ... ⊗ u_{d-1,i}⟩²`.
pub fn objective_g(a: &DenseTensor, factors: &[DenseMatrix]) -> Result<f64> {
    check_shapes(a, factors)?;
    let rank = factors[0].ncols();
    let mut g = 0.0;
    for i in 0..rank {
        let s = contract_all(a, &factor_columns(factors, i))?;
        g += s * s;
    }
    Ok(g)
}

/// `‖A − Σ σ_i u_{0,i} ⊗ ... ⊗ u_{d-1,i}‖_F`.
pub fn residual_norm(a: &DenseTensor, factors: &[DenseMatrix], sigmas: &[f64]) -> Result<f64> {
    check_shapes(a, factors)?;
    Ok(a.sub(&build_cp(sigmas, factors)?)?.fnorm())
}

fn check_shapes(a: &DenseTensor, factors: &[DenseMatrix]) -> Result<()> {
    let shape: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    if shape != a.shape() || factors.is_empty() {
        return Err(Error::ShapeMismatch {
            left: a.shape().to_vec(),
            right: shape,
        });
    }
    Ok(())
}

/// `Σ_{i<r} λ_i(A_(d))²` for the last-mode unfolding `A_(d)`.
pub fn lambda_sq_sum(a: &DenseTensor, r: usize) -> Result<f64> {
    let unfolded = a.unfold(
        a.order()
            .checked_sub(1)
            .ok_or(Error::InvalidMode { mode: 0, order: 0 })?,
    )?;
    Ok(singular_values(&unfolded)?.iter().take(r).map(|s| s * s).sum())
}

/// Quality factor `ζ(m)` of the inner rank-1 routine for an `m`-th order
/// tensor with the given mode sizes (sorted ascending internally):
/// `ζ(0) = ζ(1) = 1`, `ζ(2) = √n_1`, `ζ(m) = √(n_1 ⋯ n_{m-2}) · √n_1`.
pub fn zeta(dims: &[usize]) -> f64 {
    let mut n: Vec<usize> = dims.to_vec();
    n.sort_unstable();
    match n.len() {
        0 | 1 => 1.0,
        2 => (n[0] as f64).sqrt(),
        m => {
            let prod: f64 = n[..m - 2].iter().map(|&x| x as f64).product();
            prod.sqrt() * (n[0] as f64).sqrt()
        }
    }
}

/// Shape-derived constants of the approximation bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub shape: Vec<usize>,
    pub rank: usize,
    pub num_orthonormal: usize,
    /// `β_j` for every mode (zero-based): `1` for mode 0, `1/n_j` otherwise.
    pub beta: Vec<f64>,
    /// `ζ(d − t)` for the leading `d − t` modes.
    pub zeta: f64,
    pub ratio: f64,
}

impl BoundSpec {
    pub fn new(shape: &[usize], rank: usize, num_orthonormal: usize) -> Result<Self> {
        let d = shape.len();
        if d == 0 || shape.contains(&0) {
            return Err(Error::InvalidShape(shape.to_vec()));
        }
        if num_orthonormal == 0 || num_orthonormal > d {
            return Err(Error::Infeasible(format!(
                "number of orthonormal factors {num_orthonormal} not in 1..={d}"
            )));
        }
        if rank == 0 {
            return Err(Error::RankOutOfRange { rank, max: usize::MAX });
        }
        let beta: Vec<f64> = shape
            .iter()
            .enumerate()
            .map(|(j, &n)| if j == 0 { 1.0 } else { 1.0 / n as f64 })
            .collect();
        let lead = d - num_orthonormal;
        let zeta = zeta(&shape[..lead]);
        // the chain runs over modes d-t .. d-2 (zero-based)
        let chain: f64 = (lead..d - 1).map(|j| beta[j] / rank as f64).product();
        let ratio = chain / (zeta * zeta);
        Ok(Self {
            shape: shape.to_vec(),
            rank,
            num_orthonormal,
            beta,
            zeta,
            ratio,
        })
    }
}

/// Guaranteed fraction of `Σ_{i≤R} λ_i(A_(d))²` reached by the approximation
/// algorithm with extractors A/B (in expectation for C).
pub fn theoretical_ratio(shape: &[usize], rank: usize, num_orthonormal: usize) -> Result<f64> {
    Ok(BoundSpec::new(shape, rank, num_orthonormal)?.ratio)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Row `a` is matched with column `permutation[a]`.
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials, O(n³)).
pub fn hungarian_assign(cost: &DenseMatrix) -> Result<Assignment> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cost.ncols(),
        });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    // 1-based potentials; index 0 is a virtual column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0; n];
    for j in 1..=n {
        permutation[matched[j] - 1] = j - 1;
    }
    let total = permutation.iter().enumerate().map(|(a, &b)| cost[(a, b)]).sum();
    Ok(Assignment {
        permutation,
        cost: total,
    })
}

/// How column permutations are chosen in [`relative_error`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matching {
    /// An independent permutation per mode.
    #[default]
    PerMode,
    /// One permutation shared by all modes, chosen on the summed cost.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryError {
    /// `‖U_j − Û_j Π_j S_j‖_F / ‖U_j‖_F` per mode.
    pub per_mode: Vec<f64>,
    pub permutations: Vec<Vec<usize>>,
    pub total: f64,
}

/// Sign-invariant squared distance between every pair of columns.
fn column_costs(truth: &DenseMatrix, est: &DenseMatrix) -> DenseMatrix {
    let r = truth.ncols();
    DenseMatrix::from_fn(r, r, |a, b| {
        let ta = truth.column(a);
        let eb = est.column(b);
        let minus = (ta - eb).norm_squared();
        let plus = (ta + eb).norm_squared();
        minus.min(plus)
    })
}

/// Sum over modes of the relative Frobenius error after column permutation
/// (Hungarian matching) and per-column sign alignment.
pub fn relative_error(truth: &FactorSet, est: &FactorSet, matching: Matching) -> Result<f64> {
    Ok(relative_error_detail(truth, est, matching)?.total)
}

pub fn relative_error_detail(truth: &FactorSet, est: &FactorSet, matching: Matching) -> Result<RecoveryError> {
    if truth.rank() != est.rank() {
        return Err(Error::DimensionMismatch {
            expected: truth.rank(),
            found: est.rank(),
        });
    }
    if truth.shape() != est.shape() {
        return Err(Error::ShapeMismatch {
            left: truth.shape(),
            right: est.shape(),
        });
    }
    let costs: Vec<DenseMatrix> = truth
        .factors()
        .iter()
        .zip(est.factors())
        .map(|(t, e)| column_costs(t, e))
        .collect();
    let scales: Vec<f64> = truth.factors().iter().map(|t| t.norm_squared()).collect();

    let permutations: Vec<Vec<usize>> = match matching {
        Matching::PerMode => costs
            .iter()
            .map(|c| hungarian_assign(c).map(|a| a.permutation))
            .collect::<Result<_>>()?,
        Matching::Global => {
            let r = truth.rank();
            let mut summed = DenseMatrix::zeros(r, r);
            for (c, s) in costs.iter().zip(&scales) {
                summed += c / s.max(f64::MIN_POSITIVE);
            }
            vec![hungarian_assign(&summed)?.permutation; truth.order()]
        }
    };

    let per_mode: Vec<f64> = costs
        .iter()
        .zip(&permutations)
        .zip(&scales)
        .map(|((c, p), s)| {
            let sq: f64 = p.iter().enumerate().map(|(a, &b)| c[(a, b)]).sum();
            (sq / s).sqrt()
        })
        .collect();
    let total = per_mode.iter().sum();
    Ok(RecoveryError {
        per_mode,
        permutations,
        total,
    })
}
