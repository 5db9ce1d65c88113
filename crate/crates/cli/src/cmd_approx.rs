use std::fs;
use std::time::Instant;

use anyhow::{Context, Result};
use orthocp::approx::approximate;
use orthocp::io::{save_ground_truth, save_otns, FactorRecord};
use orthocp::metrics::{relative_error, theoretical_ratio, Matching};
use orthocp::DenseTensor;
use serde::Serialize;

use crate::args::ApproxArgs;
use crate::checks::{all_passed, approx_checks, Check};
use crate::output::emit_text;
use crate::source::{load, SourceRecord};

#[derive(Debug, Serialize)]
pub struct LevelSummary {
    pub mode: usize,
    pub products: Vec<f64>,
    pub v_norms_sq: Vec<f64>,
    pub m_norms_sq: Vec<f64>,
    pub products_sq_sum: f64,
    pub gathered_norm_sq: f64,
}

#[derive(Debug, Serialize)]
pub struct ApproxRecord {
    pub command: &'static str,
    pub source: SourceRecord,
    pub rank: usize,
    pub num_orthonormal: usize,
    pub variant: String,
    pub seed: u64,
    pub objective: f64,
    pub sigmas: Vec<f64>,
    pub lambda_sq_sum: f64,
    pub achieved_ratio: f64,
    pub theoretical_ratio: f64,
    pub orthonormality_residual: f64,
    pub unit_norm_deviation: f64,
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    pub levels: Vec<LevelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<Check>>,
    pub elapsed_ms: f64,
}

/// Returns whether every requested check passed.
pub fn run(args: &ApproxArgs) -> Result<bool> {
    let loaded = load(&args.source, args.algo.rank, args.algo.t, args.algo.seed)?;
    let a: &DenseTensor = &loaded.tensor;
    let cfg = args.algo.config(a.order(), args.algo.seed);

    let start = Instant::now();
    let res = approximate(a, &cfg)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let checks = if args.check {
        Some(approx_checks(a, &cfg, &res)?)
    } else {
        None
    };
    let passed = checks.as_deref().is_none_or(all_passed);
    let relative_error = match &loaded.truth {
        Some(truth) => Some(relative_error(&truth.factors, &res.factors, Matching::PerMode)?),
        None => None,
    };

    let record = ApproxRecord {
        command: "approx",
        source: loaded.record,
        rank: cfg.rank,
        num_orthonormal: cfg.num_orthonormal,
        variant: cfg.extractor.to_string(),
        seed: cfg.seed,
        objective: res.objective,
        sigmas: res.factors.sigmas().to_vec(),
        lambda_sq_sum: res.lambda_sq_sum(),
        achieved_ratio: res.achieved_ratio(),
        theoretical_ratio: theoretical_ratio(a.shape(), cfg.rank, cfg.num_orthonormal)?,
        orthonormality_residual: res.factors.orthonormality_residual(),
        unit_norm_deviation: res.factors.unit_norm_deviation(),
        degenerate: res.degenerate,
        relative_error,
        levels: res
            .levels
            .iter()
            .map(|l| LevelSummary {
                mode: l.mode,
                products: l.products.clone(),
                v_norms_sq: l.v_norms_sq.clone(),
                m_norms_sq: l.m_norms_sq.clone(),
                products_sq_sum: l.products_sq_sum(),
                gathered_norm_sq: l.gathered_norm_sq(),
            })
            .collect(),
        checks,
        elapsed_ms,
    };
    let json = serde_json::to_string_pretty(&record)? + "\n";

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (j, f) in res.factors.factors().iter().enumerate() {
            save_otns(&dir.join(format!("factor_{j}.otns")), &DenseTensor::from_matrix(f))?;
        }
        let factors = serde_json::to_string_pretty(&FactorRecord::from(&res.factors))? + "\n";
        fs::write(dir.join("factors.json"), factors)?;
        if let Some(truth) = &loaded.truth {
            save_ground_truth(&dir.join("ground_truth.json"), truth)?;
        }
        emit_text(Some(&dir.join("record.json")), &json)?;
    }
    emit_text(None, &json)?;
    Ok(passed)
}
