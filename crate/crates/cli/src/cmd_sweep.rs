use anyhow::{bail, Result};
use orthocp::approx::approximate;
use orthocp::exec::try_map_range;
use orthocp::extract::extract;
use orthocp::linalg::polar_decompose;
use orthocp::metrics::theoretical_ratio;
use orthocp::rng::{derive_key, SeededRng};
use orthocp::synth::gaussian_tensor;
use orthocp::{DenseMatrix, Extractor};

use crate::args::{Family, SweepArgs, SweepParam};
use crate::checks::at_least;
use crate::output::{csv_text, emit_text, fmt};

pub const HEADER_TAIL: [&str; 5] = [
    "mean_real_ratio",
    "theoretical_ratio",
    "inverse_n_sq",
    "min_real_ratio",
    "instances",
];

struct Point {
    n: usize,
    rank: usize,
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<DenseMatrix> {
    let t = gaussian_tensor(&[rows, cols], seed)?;
    Ok(DenseMatrix::from_column_slice(rows, cols, t.data()))
}

/// Real ratios of every instance at one sweep point, and the guarantee.
fn evaluate(args: &SweepArgs, p: &Point, point_seed: u64) -> Result<(Vec<f64>, f64)> {
    let exec = args.algo.exec();
    let seed_of = |k: usize| derive_key(&[point_seed, k as u64]);
    match args.family {
        Family::Objective => {
            let shape = vec![p.n; args.d];
            let t = args.algo.t.unwrap_or(args.d);
            let theory = theoretical_ratio(&shape, p.rank, t)?;
            let reals = try_map_range(exec, args.reps, |k| -> Result<f64> {
                let a = gaussian_tensor(&shape, seed_of(k))?;
                let mut cfg = args.algo.config(args.d, seed_of(k));
                cfg.rank = p.rank;
                Ok(approximate(&a, &cfg)?.achieved_ratio())
            })?;
            Ok((reals, theory))
        }
        Family::Extraction => {
            let cols = p.n.pow(args.d.saturating_sub(2) as u32).max(1);
            let theory = if args.algo.variant == Extractor::D {
                1.0 / cols as f64
            } else {
                1.0 / p.n as f64
            };
            let reals = try_map_range(exec, args.reps, |k| -> Result<f64> {
                let m = gaussian_matrix(p.n, cols, seed_of(k))?;
                let mut rng = SeededRng::for_key(seed_of(k), &[1]);
                let o = extract(&m, args.algo.variant, &mut rng)?;
                Ok(o.v.norm_squared() / m.norm_squared())
            })?;
            Ok((reals, theory))
        }
        Family::Gathering => {
            if p.rank > p.n {
                bail!("gathering needs R <= n (got R = {}, n = {})", p.rank, p.n);
            }
            let reals = try_map_range(exec, args.reps, |k| -> Result<f64> {
                let v = gaussian_matrix(p.n, p.rank, seed_of(k))?;
                let u = polar_decompose(&v)?.orthonormal_factor;
                let num: f64 = (0..p.rank).map(|i| u.column(i).dot(&v.column(i)).powi(2)).sum();
                Ok(num / v.norm_squared())
            })?;
            Ok((reals, 1.0 / p.rank as f64))
        }
    }
}

pub fn run(args: &SweepArgs) -> Result<bool> {
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    if args.from > args.to {
        bail!("empty sweep range {}..={}", args.from, args.to);
    }
    if args.family == Family::Extraction && args.sweep == SweepParam::R {
        bail!("the extraction family sweeps n only");
    }
    let mut rows = Vec::new();
    let mut passed = true;
    for value in args.from..=args.to {
        let p = match args.sweep {
            SweepParam::N => Point {
                n: value,
                rank: args.algo.rank,
            },
            SweepParam::R => Point { n: args.n, rank: value },
        };
        let (reals, theory) = evaluate(args, &p, derive_key(&[args.algo.seed, value as u64]))?;
        let mean = reals.iter().sum::<f64>() / reals.len() as f64;
        let min = reals.iter().copied().fold(f64::INFINITY, f64::min);
        if args.check {
            let guaranteed = match args.family {
                Family::Gathering => true,
                _ => args.algo.variant.is_deterministic(),
            };
            if guaranteed && !at_least(min, theory) {
                eprintln!("check failed at {value}: min real ratio {min} < {theory}");
                passed = false;
            }
            if reals.iter().any(|&r| r > 1.0 + 1e-12) {
                eprintln!("check failed at {value}: real ratio above 1");
                passed = false;
            }
        }
        rows.push(vec![
            value.to_string(),
            fmt(mean),
            fmt(theory),
            fmt(1.0 / (p.n * p.n) as f64),
            fmt(min),
            reals.len().to_string(),
        ]);
    }
    let first = match args.sweep {
        SweepParam::N => "n",
        SweepParam::R => "R",
    };
    let mut header = vec![first];
    header.extend(HEADER_TAIL);
    emit_text(args.out.as_deref(), &csv_text(&header, &rows)?)?;
    Ok(passed)
}
