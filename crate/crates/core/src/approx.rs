//! Approximation algorithm for CP decompositions whose last `t` factors are
//! orthonormal: truncated SVD of the last-mode unfolding, then level-by-level
//! splitting (one extracted vector per component) and gathering (polar factor
//! of the collected vectors), and finally rank-1 approximations for the
//! leading `d − t` modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_range, Exec};
use crate::extract::{extract, Extractor};
use crate::factors::FactorSet;
use crate::linalg::{complete_orthonormal, polar_decompose, truncated_svd};
use crate::rng::{derive_key, SeededRng};
use crate::tensor::{column_slice, contract_all, contract_except, dot, DenseMatrix, DenseTensor, DenseVector};

const RANK1_SALT: u64 = 0x7261_6e6b_315f_7631;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub rank: usize,
    pub num_orthonormal: usize,
    pub extractor: Extractor,
    pub seed: u64,
    pub rank1_power_iters: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl ApproxConfig {
    pub fn new(rank: usize, num_orthonormal: usize) -> Self {
        Self {
            rank,
            num_orthonormal,
            extractor: Extractor::A,
            seed: 0,
            rank1_power_iters: 10,
            exec: Exec::default(),
        }
    }

    pub fn with_extractor(mut self, extractor: Extractor) -> Self {
        self.extractor = extractor;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_power_iters(mut self, iters: usize) -> Self {
        self.rank1_power_iters = iters;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Checks `1 ≤ t ≤ d` and `R ≤ n_j` for every orthonormal mode.
    pub fn check_feasible(&self, shape: &[usize]) -> Result<()> {
        let d = shape.len();
        if d < 2 {
            return Err(Error::Infeasible(format!("tensor order {d} < 2")));
        }
        if self.num_orthonormal == 0 || self.num_orthonormal > d {
            return Err(Error::Infeasible(format!(
                "number of orthonormal factors {} not in 1..={d}",
                self.num_orthonormal
            )));
        }
        let max = shape[d - self.num_orthonormal..].iter().copied().min().unwrap_or(0);
        if self.rank == 0 || self.rank > max {
            return Err(Error::RankOutOfRange { rank: self.rank, max });
        }
        Ok(())
    }
}

/// Per-level diagnostics. For the last mode the extracted vectors are
/// `λ_i u_i` with the right singular vectors as witnesses and the unfolding
/// itself as `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub mode: usize,
    /// `⟨u_i, v_i⟩`.
    pub products: Vec<f64>,
    /// `‖v_i‖²`.
    pub v_norms_sq: Vec<f64>,
    /// `‖M_i‖_F²`.
    pub m_norms_sq: Vec<f64>,
    /// Unit witnesses `y_i` with `v_i = M_i y_i`.
    pub witnesses: Vec<DenseVector>,
    /// The gathered matrix `[v_0, …, v_{R-1}]`.
    pub gathered: DenseMatrix,
}

impl LevelRecord {
    pub fn products_sq_sum(&self) -> f64 {
        self.products.iter().map(|p| p * p).sum()
    }

    pub fn gathered_norm_sq(&self) -> f64 {
        self.gathered.norm_squared()
    }
}

#[derive(Debug, Clone)]
pub struct ApproxResult {
    pub factors: FactorSet,
    pub objective: f64,
    /// Modes `d−1, d−2, …, d−t` in that order.
    pub levels: Vec<LevelRecord>,
    /// Leading `R` singular values of the last-mode unfolding (zero-padded).
    pub unfolding_singular_values: Vec<f64>,
    /// Set when the input, or some contracted sub-tensor, was zero.
    pub degenerate: bool,
}

impl ApproxResult {
    pub fn lambda_sq_sum(&self) -> f64 {
        self.unfolding_singular_values.iter().map(|l| l * l).sum()
    }

    /// `G / Σ λ_i²`, or 0 on a zero tensor.
    pub fn achieved_ratio(&self) -> f64 {
        let denom = self.lambda_sq_sum();
        if denom > 0.0 {
            self.objective / denom
        } else {
            0.0
        }
    }
}

struct Split {
    v: DenseVector,
    y: DenseVector,
    m_norm_sq: f64,
    zero: bool,
}

fn unit(n: usize) -> DenseVector {
    let mut e = DenseVector::zeros(n);
    if n > 0 {
        e[0] = 1.0;
    }
    e
}

fn split(b: &DenseTensor, mode: usize, cfg: &ApproxConfig, i: usize) -> Result<Split> {
    if mode == 0 {
        let v = b.to_vector();
        let m_norm_sq = v.norm_squared();
        return Ok(Split {
            v,
            y: unit(1),
            m_norm_sq,
            zero: m_norm_sq == 0.0,
        });
    }
    let m = b.unfold(mode)?;
    let m_norm_sq = m.norm_squared();
    let mut rng = SeededRng::for_key(cfg.seed, &[mode as u64, i as u64]);
    match extract(&m, cfg.extractor, &mut rng) {
        Ok(o) => Ok(Split {
            v: o.v,
            y: o.y,
            m_norm_sq,
            zero: m_norm_sq == 0.0,
        }),
        Err(Error::ZeroMatrix) => Ok(Split {
            v: DenseVector::zeros(m.nrows()),
            y: unit(m.ncols()),
            m_norm_sq,
            zero: true,
        }),
        Err(e) => Err(e),
    }
}

fn columns_to_matrix(rows: usize, cols: &[DenseVector]) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r])
}

pub fn approximate(a: &DenseTensor, cfg: &ApproxConfig) -> Result<ApproxResult> {
    let shape = a.shape().to_vec();
    cfg.check_feasible(&shape)?;
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let d = shape.len();
    let r = cfg.rank;
    let t = cfg.num_orthonormal;
    let mut degenerate = a.is_zero();

    let last = d - 1;
    let unfolded = a.unfold(last)?;
    let available = unfolded.nrows().min(unfolded.ncols());
    let svd = truncated_svd(&unfolded, r.min(available))?;
    let mut lambdas = svd.singular_values.clone();
    lambdas.resize(r, 0.0);
    let u_last = if svd.left_vectors.ncols() < r {
        complete_orthonormal(&svd.left_vectors, r)
    } else {
        svd.left_vectors.clone()
    };
    let mut witnesses: Vec<DenseVector> = (0..r)
        .map(|i| {
            if i < svd.right_vectors.ncols() {
                svd.right_vectors.column(i).into_owned()
            } else {
                unit(unfolded.ncols())
            }
        })
        .collect();
    if degenerate {
        witnesses.iter_mut().for_each(|w| *w = unit(unfolded.ncols()));
    }
    let top_v: Vec<DenseVector> = (0..r).map(|i| u_last.column(i) * lambdas[i]).collect();
    let a_norm_sq = a.fnorm_sq();
    let mut levels = vec![LevelRecord {
        mode: last,
        products: lambdas.clone(),
        v_norms_sq: lambdas.iter().map(|l| l * l).collect(),
        m_norms_sq: vec![a_norm_sq; r],
        witnesses,
        gathered: columns_to_matrix(shape[last], &top_v),
    }];

    let mut factors: Vec<DenseMatrix> = shape.iter().map(|&n| DenseMatrix::zeros(n, r)).collect();
    factors[last] = u_last;

    let mut partial: Vec<DenseTensor> =
        try_map_range(cfg.exec, r, |i| a.contract(last, column_slice(&factors[last], i)))?;

    for mode in (d - t..last).rev() {
        let splits = try_map_range(cfg.exec, r, |i| split(&partial[i], mode, cfg, i))?;
        degenerate |= splits.iter().any(|s| s.zero);
        let vs: Vec<DenseVector> = splits.iter().map(|s| s.v.clone()).collect();
        let gathered = columns_to_matrix(shape[mode], &vs);
        let u = polar_decompose(&gathered)?.orthonormal_factor;
        let products = (0..r).map(|i| dot(column_slice(&u, i), vs[i].as_slice())).collect();
        levels.push(LevelRecord {
            mode,
            products,
            v_norms_sq: vs.iter().map(|v| v.norm_squared()).collect(),
            m_norms_sq: splits.iter().map(|s| s.m_norm_sq).collect(),
            witnesses: splits.into_iter().map(|s| s.y).collect(),
            gathered,
        });
        partial = try_map_range(cfg.exec, r, |i| partial[i].contract(mode, column_slice(&u, i)))?;
        factors[mode] = u;
    }

    if t < d {
        let lead = d - t;
        let solved = try_map_range(cfg.exec, r, |i| {
            let sub = ApproxConfig {
                seed: derive_key(&[cfg.seed, RANK1_SALT, i as u64]),
                exec: Exec::Sequential,
                ..cfg.clone()
            };
            match rank1approx(&partial[i], &sub) {
                Ok(res) => Ok((res.vectors, false)),
                Err(Error::ZeroTensor) => Ok((shape[..lead].iter().map(|&n| unit(n)).collect(), true)),
                Err(e) => Err(e),
            }
        })?;
        for (i, (vectors, zero)) in solved.into_iter().enumerate() {
            degenerate |= zero;
            for (j, v) in vectors.into_iter().enumerate() {
                factors[j].set_column(i, &v);
            }
        }
    }

    let sigmas: Vec<f64> = try_map_range(cfg.exec, r, |i| {
        let cols: Vec<&[f64]> = factors.iter().map(|f| column_slice(f, i)).collect();
        contract_all(a, &cols)
    })?;
    let objective = sigmas.iter().map(|s| s * s).sum();
    let factors = FactorSet::new(factors, sigmas, t)?;
    Ok(ApproxResult {
        factors,
        objective,
        levels,
        unfolding_singular_values: lambdas,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Result {
    /// One unit vector per mode.
    pub vectors: Vec<DenseVector>,
    /// `⟨C, u_0 ⊗ … ⊗ u_{m-1}⟩ ≥ 0`.
    pub value: f64,
    /// Value before the power sweeps.
    pub initial_value: f64,
    /// Value after each power sweep.
    pub sweep_values: Vec<f64>,
}

/// Rank-1 approximation: normalization for vectors, the leading singular
/// pair for matrices, and for higher orders the approximation algorithm with
/// `R = 1, t = m` followed by alternating power sweeps.
pub fn rank1approx(c: &DenseTensor, cfg: &ApproxConfig) -> Result<Rank1Result> {
    let m = c.order();
    if m == 0 {
        return Err(Error::Infeasible("rank-1 approximation needs order ≥ 1".into()));
    }
    if !c.is_finite() {
        return Err(Error::NonFinite);
    }
    if c.is_zero() {
        return Err(Error::ZeroTensor);
    }
    let mut vectors: Vec<DenseVector> = match m {
        1 => vec![c.to_vector() / c.fnorm()],
        2 => {
            let svd = truncated_svd(&c.unfold(0)?, 1)?;
            vec![
                svd.left_vectors.column(0).into_owned(),
                svd.right_vectors.column(0).into_owned(),
            ]
        }
        _ => {
            let sub = ApproxConfig {
                rank: 1,
                num_orthonormal: m,
                exec: Exec::Sequential,
                ..cfg.clone()
            };
            let res = approximate(c, &sub)?;
            res.factors.factors().iter().map(|f| f.column(0).into_owned()).collect()
        }
    };
    let mut value = value_of(c, &vectors)?;
    if value < 0.0 {
        vectors[0].neg_mut();
        value = -value;
    }
    let initial_value = value;
    let mut sweep_values = Vec::new();
    if m >= 3 {
        for _ in 0..cfg.rank1_power_iters {
            for j in 0..m {
                let cols: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
                let w = contract_except(c, &cols, j)?;
                let norm = w.norm();
                if norm > 0.0 {
                    vectors[j] = w / norm;
                }
            }
            value = value_of(c, &vectors)?;
            sweep_values.push(value);
        }
    }
    Ok(Rank1Result {
        vectors,
        value,
        initial_value,
        sweep_values,
    })
}

fn value_of(c: &DenseTensor, vectors: &[DenseVector]) -> Result<f64> {
    let cols: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
    contract_all(c, &cols)
}
