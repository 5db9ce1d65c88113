//! Synthetic test instances: Gaussian tensors and noisy CP tensors with
//! planted orthonormal trailing factors.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::linalg::polar_decompose;
use crate::rng::SeededRng;
use crate::tensor::{build_cp, DenseMatrix, DenseTensor};

const FACTOR_STREAM: u64 = 1;
const SIGMA_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

/// Entries i.i.d. standard normal.
pub fn gaussian_tensor(shape: &[usize], seed: u64) -> Result<DenseTensor> {
    let mut rng = SeededRng::new(seed);
    DenseTensor::from_fn(shape, |_| rng.sample(StandardNormal))
}

/// Entries i.i.d. uniform on `[-1, 1]`.
pub fn uniform_tensor(shape: &[usize], rng: &mut SeededRng) -> Result<DenseTensor> {
    DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..=1.0))
}

fn uniform_matrix(n: usize, r: usize, rng: &mut SeededRng) -> DenseMatrix {
    DenseMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..=1.0))
}

fn gaussian_matrix(n: usize, r: usize, rng: &mut SeededRng) -> DenseMatrix {
    DenseMatrix::from_fn(n, r, |_, _| rng.sample(StandardNormal))
}

/// Thin QR factor with the signs fixed so that `R` has a positive diagonal.
pub fn orthonormalize(raw: &DenseMatrix) -> Result<DenseMatrix> {
    if raw.nrows() < raw.ncols() {
        return Err(Error::WideMatrix {
            rows: raw.nrows(),
            cols: raw.ncols(),
        });
    }
    let qr = raw.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for i in 0..q.ncols() {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    Ok(q)
}

fn normalize_columns(m: &mut DenseMatrix) -> Result<()> {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        if n == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        c /= n;
    }
    Ok(())
}

fn max_coherence(m: &DenseMatrix) -> f64 {
    let gram = m.transpose() * m;
    let mut worst: f64 = 0.0;
    for a in 0..gram.nrows() {
        for b in 0..a {
            worst = worst.max(gram[(a, b)].abs());
        }
    }
    worst
}

/// Unit columns whose pairwise absolute inner products are at most `delta`.
///
/// Starts from normalized Gaussian columns and repeatedly moves them a tenth
/// of the way toward their polar factor, renormalizing, until the bound holds
/// (at most 1000 steps).
pub fn incoherent_factor(n: usize, r: usize, delta: f64, seed: u64) -> Result<DenseMatrix> {
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { rank: r, max: n });
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Infeasible(format!("incoherence {delta} not in [0, 1)")));
    }
    let mut rng = SeededRng::new(seed);
    let mut u = gaussian_matrix(n, r, &mut rng);
    if delta == 0.0 {
        return orthonormalize(&u);
    }
    normalize_columns(&mut u)?;
    const STEP: f64 = 0.1;
    for _ in 0..1000 {
        if max_coherence(&u) <= delta {
            return Ok(u);
        }
        let p = polar_decompose(&u)?.orthonormal_factor;
        u = &u * (1.0 - STEP) + p * STEP;
        normalize_columns(&mut u)?;
    }
    if max_coherence(&u) <= delta {
        return Ok(u);
    }
    Err(Error::IncoherenceNotReached {
        delta,
        rows: n,
        cols: r,
    })
}

/// Random feasible factors: QR of uniform matrices for the trailing modes,
/// normalized uniform columns for the leading ones, unit weights.
pub fn random_factor_set(shape: &[usize], rank: usize, num_orthonormal: usize, seed: u64) -> Result<FactorSet> {
    let d = shape.len();
    let mut factors = Vec::with_capacity(d);
    for (j, &n) in shape.iter().enumerate() {
        let mut rng = SeededRng::for_key(seed, &[FACTOR_STREAM, j as u64]);
        let raw = uniform_matrix(n, rank, &mut rng);
        if j + num_orthonormal >= d {
            factors.push(orthonormalize(&raw)?);
        } else {
            let mut m = raw;
            normalize_columns(&mut m)?;
            factors.push(m);
        }
    }
    FactorSet::new(factors, vec![1.0; rank], num_orthonormal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSpec {
    pub shape: Vec<usize>,
    pub rank: usize,
    pub num_orthonormal: usize,
    pub beta: f64,
    pub seed: u64,
    /// Noise-free instance with strictly decreasing positive weights.
    pub exact_mode: bool,
    /// Draw the leading factors with this incoherence bound.
    pub incoherence: Option<f64>,
}

impl StructuredSpec {
    pub fn new(shape: &[usize], rank: usize, num_orthonormal: usize, beta: f64, seed: u64) -> Self {
        Self {
            shape: shape.to_vec(),
            rank,
            num_orthonormal,
            beta,
            seed,
            exact_mode: false,
            incoherence: None,
        }
    }

    pub fn exact(mut self) -> Self {
        self.exact_mode = true;
        self.beta = 0.0;
        self
    }

    pub fn with_incoherence(mut self, delta: f64) -> Self {
        self.incoherence = Some(delta);
        self
    }
}

/// Planted decomposition. `factors.sigmas()` are scaled so that
/// `build_cp(factors)` is the noise-free part of the generated tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub factors: FactorSet,
    pub noise_level: f64,
    pub incoherence: Option<f64>,
    pub exact_mode: bool,
}

impl GroundTruth {
    pub fn sigmas(&self) -> &[f64] {
        self.factors.sigmas()
    }
}

/// `A = B/‖B‖ + β N/‖N‖` with `B` a CP tensor whose last `t` factors are
/// orthonormal and `N` uniform noise. In exact mode `A = B`.
pub fn structured_tensor(spec: &StructuredSpec) -> Result<(DenseTensor, GroundTruth)> {
    let d = spec.shape.len();
    let r = spec.rank;
    let t = spec.num_orthonormal;
    if d == 0 || spec.shape.contains(&0) {
        return Err(Error::InvalidShape(spec.shape.clone()));
    }
    if t == 0 || t > d {
        return Err(Error::Infeasible(format!(
            "number of orthonormal factors {t} not in 1..={d}"
        )));
    }
    let max = spec.shape[d - t..].iter().copied().min().unwrap_or(0);
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    if !spec.beta.is_finite() || spec.beta < 0.0 {
        return Err(Error::Infeasible(format!(
            "noise level {} must be nonnegative",
            spec.beta
        )));
    }

    let mut factors = Vec::with_capacity(d);
    for (j, &n) in spec.shape.iter().enumerate() {
        let mut rng = SeededRng::for_key(spec.seed, &[FACTOR_STREAM, j as u64]);
        if j + t >= d {
            factors.push(orthonormalize(&uniform_matrix(n, r, &mut rng))?);
        } else if let Some(delta) = spec.incoherence {
            factors.push(incoherent_factor(n, r, delta, rng.random())?);
        } else {
            let mut m = uniform_matrix(n, r, &mut rng);
            normalize_columns(&mut m)?;
            factors.push(m);
        }
    }

    let mut rng = SeededRng::for_key(spec.seed, &[SIGMA_STREAM]);
    let sigmas: Vec<f64> = if spec.exact_mode {
        loop {
            let mut s: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..1.5)).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            if s.windows(2).all(|w| w[0] > w[1]) {
                break s;
            }
        }
    } else {
        (0..r).map(|_| rng.random_range(-1.0..=1.0)).collect()
    };

    let b = build_cp(&sigmas, &factors)?;
    if spec.exact_mode {
        let truth = GroundTruth {
            factors: FactorSet::new(factors, sigmas, t)?,
            noise_level: 0.0,
            incoherence: spec.incoherence,
            exact_mode: true,
        };
        return Ok((b, truth));
    }

    let b_norm = b.fnorm();
    if b_norm == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let mut a = b;
    a.scale_mut(1.0 / b_norm);
    if spec.beta > 0.0 {
        let mut rng = SeededRng::for_key(spec.seed, &[NOISE_STREAM]);
        let noise = uniform_tensor(&spec.shape, &mut rng)?;
        a.axpy(spec.beta / noise.fnorm(), &noise)?;
    }
    let scaled: Vec<f64> = sigmas.iter().map(|s| s / b_norm).collect();
    let truth = GroundTruth {
        factors: FactorSet::new(factors, scaled, t)?,
        noise_level: spec.beta,
        incoherence: spec.incoherence,
        exact_mode: false,
    };
    Ok((a, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_is_reproducible() {
        let a = gaussian_tensor(&[3, 4, 5], 17).unwrap();
        assert_eq!(a, gaussian_tensor(&[3, 4, 5], 17).unwrap());
        assert_ne!(a, gaussian_tensor(&[3, 4, 5], 18).unwrap());
        assert_eq!(gaussian_tensor(&[1], 3).unwrap().len(), 1);
    }

    #[test]
    fn gaussian_moments() {
        let a = gaussian_tensor(&[100, 1000], 5).unwrap();
        let n = a.len() as f64;
        let mean = a.data().iter().sum::<f64>() / n;
        let var = a.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 3.0 / n.sqrt(), "mean {mean}");
        // standard error of the sample variance is about √(2/n)
        assert!((var - 1.0).abs() <= 3.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn exact_mode_is_bit_exact() {
        for seed in 0..5 {
            let spec = StructuredSpec::new(&[4, 5, 6], 3, 2, 0.3, seed).exact();
            let (a, truth) = structured_tensor(&spec).unwrap();
            assert_eq!(a, truth.factors.to_tensor().unwrap());
            assert!(truth.sigmas().windows(2).all(|w| w[0] > w[1]));
            assert!(truth.sigmas().iter().all(|&s| (0.5..1.5).contains(&s)));
        }
    }

    #[test]
    fn normalized_and_noisy() {
        let (a, truth) = structured_tensor(&StructuredSpec::new(&[4, 4, 4], 2, 3, 0.0, 1)).unwrap();
        assert_abs_diff_eq!(a.fnorm(), 1.0, epsilon = 1e-14);
        let clean = truth.factors.to_tensor().unwrap();
        assert!(a.sub(&clean).unwrap().fnorm() < 1e-14);

        let (noisy, truth) = structured_tensor(&StructuredSpec::new(&[4, 4, 4], 2, 3, 0.1, 1)).unwrap();
        let clean = truth.factors.to_tensor().unwrap();
        assert_abs_diff_eq!(noisy.sub(&clean).unwrap().fnorm(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rejects_infeasible_rank() {
        assert!(structured_tensor(&StructuredSpec::new(&[6, 3, 6], 4, 2, 0.0, 0)).is_err());
        assert!(structured_tensor(&StructuredSpec::new(&[3, 6, 6], 4, 2, 0.0, 0)).is_ok());
    }

    #[test]
    fn incoherent_examples() {
        let q = incoherent_factor(6, 3, 0.0, 1).unwrap();
        assert!((q.transpose() * &q - DenseMatrix::identity(3, 3)).norm() < 1e-12);
        let single = incoherent_factor(5, 1, 0.3, 2).unwrap();
        assert_abs_diff_eq!(single.norm(), 1.0, epsilon = 1e-14);
        for seed in 0..50 {
            let u = incoherent_factor(20, 5, 0.2, seed).unwrap();
            let gram = u.transpose() * &u;
            for a in 0..5 {
                assert_abs_diff_eq!(gram[(a, a)], 1.0, epsilon = 1e-12);
                for b in 0..a {
                    assert!(gram[(a, b)].abs() <= 0.2);
                }
            }
        }
        assert!(incoherent_factor(3, 4, 0.1, 0).is_err());
        assert!(incoherent_factor(3, 2, 1.0, 0).is_err());
    }
}
