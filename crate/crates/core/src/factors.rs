use crate::error::{Error, Result};
use crate::linalg::orthonormality_residual;
use crate::tensor::{build_cp, column_slice, DenseMatrix, DenseTensor};

/// Tolerance on `‖UᵀU − I‖_F`, per column of `U`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Tolerance on `|‖u‖ − 1|` for unit columns.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Factor matrices `U_0..U_{d-1}` (each `n_j x R`) and weights `σ_0..σ_{R-1}`.
///
/// The last `num_orthonormal` factors have orthonormal columns; the leading
/// ones have unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    factors: Vec<DenseMatrix>,
    sigmas: Vec<f64>,
    num_orthonormal: usize,
}

impl FactorSet {
    pub fn new(factors: Vec<DenseMatrix>, sigmas: Vec<f64>, num_orthonormal: usize) -> Result<Self> {
        let set = Self {
            factors,
            sigmas,
            num_orthonormal,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.factors.len();
        if d == 0 {
            return Err(Error::InvalidFactors("no factor matrices".into()));
        }
        if self.num_orthonormal == 0 || self.num_orthonormal > d {
            return Err(Error::InvalidFactors(format!(
                "number of orthonormal factors {} not in 1..={d}",
                self.num_orthonormal
            )));
        }
        let rank = self.sigmas.len();
        for (j, f) in self.factors.iter().enumerate() {
            if f.ncols() != rank {
                return Err(Error::InvalidFactors(format!(
                    "factor {j} has {} columns, expected {rank}",
                    f.ncols()
                )));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            if self.is_orthonormal_mode(j) {
                let res = orthonormality_residual(f);
                if res > ORTHONORMAL_TOL * (rank.max(1) as f64) {
                    return Err(Error::InvalidFactors(format!(
                        "factor {j} is not orthonormal (residual {res:e})"
                    )));
                }
            } else {
                for (i, c) in f.column_iter().enumerate() {
                    let dev = (c.norm() - 1.0).abs();
                    if dev > UNIT_NORM_TOL {
                        return Err(Error::InvalidFactors(format!(
                            "column {i} of factor {j} is not unit norm (deviation {dev:e})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn num_orthonormal(&self) -> usize {
        self.num_orthonormal
    }

    /// Modes `j >= d - t` carry orthonormal factors.
    pub fn is_orthonormal_mode(&self, j: usize) -> bool {
        j + self.num_orthonormal >= self.factors.len()
    }

    pub fn factors(&self) -> &[DenseMatrix] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &DenseMatrix {
        &self.factors[j]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn column(&self, j: usize, i: usize) -> &[f64] {
        column_slice(&self.factors[j], i)
    }

    /// Replaces the weights; the factors are unchanged.
    pub fn with_sigmas(mut self, sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                found: sigmas.len(),
            });
        }
        self.sigmas = sigmas;
        Ok(self)
    }

    pub fn into_parts(self) -> (Vec<DenseMatrix>, Vec<f64>, usize) {
        (self.factors, self.sigmas, self.num_orthonormal)
    }

    pub fn to_tensor(&self) -> Result<DenseTensor> {
        build_cp(&self.sigmas, &self.factors)
    }

    /// Largest `‖UᵀU − I‖_F` over the orthonormal factors.
    pub fn orthonormality_residual(&self) -> f64 {
        (0..self.order())
            .filter(|&j| self.is_orthonormal_mode(j))
            .map(|j| orthonormality_residual(&self.factors[j]))
            .fold(0.0, f64::max)
    }

    /// Largest `|‖u‖ − 1|` over the columns of the leading factors.
    pub fn unit_norm_deviation(&self) -> f64 {
        (0..self.order())
            .filter(|&j| !self.is_orthonormal_mode(j))
            .flat_map(|j| self.factors[j].column_iter().map(|c| (c.norm() - 1.0).abs()))
            .fold(0.0, f64::max)
    }
}
