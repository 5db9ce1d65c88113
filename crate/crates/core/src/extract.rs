//! Procedures that extract a representative column-space vector `v = M y`
//! from a matrix `M`, keeping the unit witness `y`.
//!
//! * [`Extractor::A`]: `y` is the leading right singular vector.
//! * [`Extractor::B`]: `y` is the normalized row of largest norm.
//! * [`Extractor::C`]: `y` is a normalized row drawn uniformly at random.
//! * [`Extractor::D`]: `y` is drawn uniformly from the unit sphere.
//!
//! A and B satisfy `‖v‖² ≥ ‖M‖_F² / rows` on every input; C satisfies it in
//! expectation; D has `E‖v‖² = ‖M‖_F² / cols`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::truncated_svd;
use crate::rng::SeededRng;
use crate::tensor::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Extractor {
    A,
    B,
    C,
    D,
}

impl Extractor {
    pub const ALL: [Extractor; 4] = [Extractor::A, Extractor::B, Extractor::C, Extractor::D];

    pub fn is_deterministic(self) -> bool {
        matches!(self, Extractor::A | Extractor::B)
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Extractor::A => "A",
            Extractor::B => "B",
            Extractor::C => "C",
            Extractor::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Extractor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Extractor::A),
            "B" => Ok(Extractor::B),
            "C" => Ok(Extractor::C),
            "D" => Ok(Extractor::D),
            other => Err(format!("unknown extraction variant `{other}` (expected A, B, C or D)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractionOutcome {
    /// `M y`, length `rows(M)`.
    pub v: DenseVector,
    /// Unit vector of length `cols(M)`.
    pub y: DenseVector,
    pub variant: Extractor,
}

fn outcome(m: &DenseMatrix, y: DenseVector, variant: Extractor) -> ExtractionOutcome {
    let v = m * &y;
    ExtractionOutcome { v, y, variant }
}

fn ensure_finite(m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn row_norms_sq(m: &DenseMatrix) -> Vec<f64> {
    let mut norms = vec![0.0; m.nrows()];
    for col in m.column_iter() {
        for (n, x) in norms.iter_mut().zip(col.iter()) {
            *n += x * x;
        }
    }
    norms
}

/// Builds the outcome for the normalized row `k`. Fails on a zero row.
pub fn extract_row(m: &DenseMatrix, k: usize, variant: Extractor) -> Result<ExtractionOutcome> {
    let row = m.row(k).transpose();
    let norm = row.norm();
    if norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(outcome(m, row / norm, variant))
}

pub fn extract_a(m: &DenseMatrix) -> Result<ExtractionOutcome> {
    ensure_finite(m)?;
    if m.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let svd = truncated_svd(m, 1)?;
    let y = svd.right_vectors.column(0).into_owned();
    Ok(outcome(m, y, Extractor::A))
}

pub fn extract_b(m: &DenseMatrix) -> Result<ExtractionOutcome> {
    ensure_finite(m)?;
    let norms = row_norms_sq(m);
    let mut best = 0;
    for (k, &n) in norms.iter().enumerate() {
        if n > norms[best] {
            best = k;
        }
    }
    if norms[best] == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    extract_row(m, best, Extractor::B)
}

/// Uniformly random row. A zero row is replaced by a second uniform draw
/// among the nonzero rows.
pub fn extract_c(m: &DenseMatrix, rng: &mut SeededRng) -> Result<ExtractionOutcome> {
    ensure_finite(m)?;
    let norms = row_norms_sq(m);
    let mut k = rng.random_range(0..m.nrows());
    if norms[k] == 0.0 {
        let nonzero: Vec<usize> = (0..m.nrows()).filter(|&r| norms[r] > 0.0).collect();
        if nonzero.is_empty() {
            return Err(Error::ZeroMatrix);
        }
        k = nonzero[rng.random_range(0..nonzero.len())];
    }
    extract_row(m, k, Extractor::C)
}

/// Draws a point uniformly on the unit sphere of dimension `m` (normalized
/// standard Gaussian).
pub fn sample_unit_sphere(m: usize, rng: &mut SeededRng) -> DenseVector {
    loop {
        let g = DenseVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 0.0 {
            return g / n;
        }
    }
}

pub fn extract_d(m: &DenseMatrix, rng: &mut SeededRng) -> Result<ExtractionOutcome> {
    ensure_finite(m)?;
    let y = sample_unit_sphere(m.ncols(), rng);
    Ok(outcome(m, y, Extractor::D))
}

/// Dispatches on `variant`; the generator is only consumed by C and D.
pub fn extract(m: &DenseMatrix, variant: Extractor, rng: &mut SeededRng) -> Result<ExtractionOutcome> {
    match variant {
        Extractor::A => extract_a(m),
        Extractor::B => extract_b(m),
        Extractor::C => extract_c(m, rng),
        Extractor::D => extract_d(m, rng),
    }
}
