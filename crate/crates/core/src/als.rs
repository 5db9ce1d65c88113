//! Block-coordinate refinement of a [`FactorSet`].
//!
//! Each sweep visits the modes in ascending order. With `W_j` the matrix whose
//! column `i` is `A` contracted with every other mode's column `i`:
//!
//! * orthonormal modes take the polar factor of `W_j diag(σ)`, which solves
//!   the orthogonal Procrustes subproblem exactly;
//! * unit-column modes take `w_i / ‖w_i‖`, keeping the previous column when
//!   `‖w_i‖ ≤ ε`;
//!
//! after which `σ_i = ⟨u_i, w_i⟩`. Since at least one mode is orthonormal the
//! cross terms of the residual vanish, so every block step is an exact
//! minimizer and the residual never increases.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::linalg::polar_decompose;
use crate::tensor::{column_slice, contract_all, contract_except, dot, DenseMatrix, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlsConfig {
    pub max_iters: usize,
    /// Stop once `Σ_j ‖U_j⁺ − U_j‖_F / ‖U_j‖_F` falls to this value.
    pub rel_change_tol: f64,
    /// Columns whose contraction has norm at most this are left unchanged.
    pub regularizer_eps: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            rel_change_tol: 1e-5,
            regularizer_eps: 1e-8,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Infeasible("max_iters must be at least 1".into()));
        }
        if !self.rel_change_tol.is_finite() || self.rel_change_tol <= 0.0 {
            return Err(Error::Infeasible("rel_change_tol must be positive".into()));
        }
        if !self.regularizer_eps.is_finite() || self.regularizer_eps < 0.0 {
            return Err(Error::Infeasible("regularizer_eps must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineTrace {
    /// `‖A − build_cp‖_F` for the initial factors (with optimal σ) and after
    /// every sweep.
    pub residuals: Vec<f64>,
    /// `Σ σ_i²` alongside `residuals`.
    pub objectives: Vec<f64>,
    /// Factor-change metric per sweep.
    pub changes: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub elapsed_ms: f64,
}

fn sigmas_of(a: &DenseTensor, factors: &[DenseMatrix]) -> Result<Vec<f64>> {
    let r = factors[0].ncols();
    (0..r)
        .map(|i| {
            let cols: Vec<&[f64]> = factors.iter().map(|f| column_slice(f, i)).collect();
            contract_all(a, &cols)
        })
        .collect()
}

fn residual(a: &DenseTensor, factors: &[DenseMatrix], sigmas: &[f64]) -> Result<f64> {
    Ok(a.sub(&crate::tensor::build_cp(sigmas, factors)?)?.fnorm())
}

fn ensure_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged(what.into()))
    }
}

/// Refines `init` until the factor change drops below the tolerance or
/// `max_iters` sweeps have run.
pub fn refine(a: &DenseTensor, init: &FactorSet, cfg: &AlsConfig) -> Result<(FactorSet, RefineTrace)> {
    cfg.validate()?;
    init.validate()?;
    if init.shape() != a.shape() {
        return Err(Error::ShapeMismatch {
            left: a.shape().to_vec(),
            right: init.shape(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let start = Instant::now();
    let t = init.num_orthonormal();
    let (mut factors, _, _) = init.clone().into_parts();
    let d = factors.len();
    let r = factors[0].ncols();
    let mut sigmas = sigmas_of(a, &factors)?;
    normalize_signs(&mut sigmas, &mut factors[0]);

    let mut residuals = vec![residual(a, &factors, &sigmas)?];
    let mut objectives = vec![sigmas.iter().map(|s| s * s).sum()];
    let mut changes = Vec::new();
    let mut stop = StopReason::MaxIters;

    for _ in 0..cfg.max_iters {
        let mut change = 0.0;
        for j in 0..d {
            let mut w = DenseMatrix::zeros(factors[j].nrows(), r);
            for i in 0..r {
                let cols: Vec<&[f64]> = factors.iter().map(|f| column_slice(f, i)).collect();
                w.set_column(i, &contract_except(a, &cols, j)?);
            }
            ensure_finite(&w, "contracted block")?;
            let old = factors[j].clone();
            if j + t >= d {
                let scaled = DenseMatrix::from_fn(w.nrows(), r, |row, i| w[(row, i)] * sigmas[i]);
                factors[j] = polar_decompose(&scaled)?.orthonormal_factor;
            } else {
                for i in 0..r {
                    let norm = w.column(i).norm();
                    if norm > cfg.regularizer_eps {
                        factors[j].set_column(i, &(w.column(i) / norm));
                    }
                }
            }
            ensure_finite(&factors[j], "factor update")?;
            for (i, s) in sigmas.iter_mut().enumerate() {
                *s = dot(column_slice(&factors[j], i), column_slice(&w, i));
            }
            normalize_signs(&mut sigmas, &mut factors[j]);
            let scale = old.norm();
            if scale > 0.0 {
                change += (&factors[j] - &old).norm() / scale;
            }
        }
        residuals.push(residual(a, &factors, &sigmas)?);
        objectives.push(sigmas.iter().map(|s| s * s).sum());
        changes.push(change);
        if change <= cfg.rel_change_tol {
            stop = StopReason::Converged;
            break;
        }
    }

    let iterations = changes.len();
    let out = FactorSet::new(factors, sigmas, t)?;
    Ok((
        out,
        RefineTrace {
            residuals,
            objectives,
            changes,
            iterations,
            stop,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    ))
}

/// Makes every weight nonnegative by flipping the matching column.
fn normalize_signs(sigmas: &mut [f64], factor: &mut DenseMatrix) {
    for (i, s) in sigmas.iter_mut().enumerate() {
        if *s < 0.0 {
            *s = -*s;
            factor.column_mut(i).neg_mut();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::tensor::build_cp;
    use rand::Rng;

    fn orthonormal(n: usize, r: usize, rng: &mut SeededRng) -> DenseMatrix {
        DenseMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0)).qr().q()
    }

    fn unit_columns(n: usize, r: usize, rng: &mut SeededRng) -> DenseMatrix {
        let mut m = DenseMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        for mut c in m.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        m
    }

    #[test]
    fn exact_factors_are_a_fixed_point() {
        let mut rng = SeededRng::new(4);
        let factors = vec![
            unit_columns(4, 2, &mut rng),
            orthonormal(5, 2, &mut rng),
            orthonormal(3, 2, &mut rng),
        ];
        let a = build_cp(&[2.0, 1.0], &factors).unwrap();
        let init = FactorSet::new(factors, vec![2.0, 1.0], 2).unwrap();
        let (_, trace) = refine(&a, &init, &AlsConfig::default()).unwrap();
        assert_eq!(trace.iterations, 1);
        assert_eq!(trace.stop, StopReason::Converged);
        assert!(*trace.residuals.last().unwrap() <= 1e-10);
    }

    #[test]
    fn residual_is_monotone() {
        let mut rng = SeededRng::new(8);
        let a = DenseTensor::from_fn(&[4, 5, 3], |_| rng.random_range(-1.0..1.0)).unwrap();
        let init = FactorSet::new(
            vec![
                unit_columns(4, 3, &mut rng),
                unit_columns(5, 3, &mut rng),
                orthonormal(3, 3, &mut rng),
            ],
            vec![1.0; 3],
            1,
        )
        .unwrap();
        let (_, trace) = refine(
            &a,
            &init,
            &AlsConfig {
                max_iters: 200,
                ..Default::default()
            },
        )
        .unwrap();
        for w in trace.residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(AlsConfig {
            max_iters: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AlsConfig {
            rel_change_tol: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
