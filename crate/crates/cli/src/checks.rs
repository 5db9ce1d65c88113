//! Invariant battery run by `--check`.

use orthocp::approx::ApproxResult;
use orthocp::factors::{ORTHONORMAL_TOL, UNIT_NORM_TOL};
use orthocp::metrics::theoretical_ratio;
use orthocp::{ApproxConfig, DenseTensor, Result};
use serde::Serialize;

const REL_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// `lhs ≥ rhs` up to relative rounding.
pub fn at_least(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - REL_SLACK * rhs.abs().max(f64::MIN_POSITIVE)
}

/// Factor constraints, objective bookkeeping and, for the deterministic
/// extractors, the level-by-level and global guarantees.
pub fn approx_checks(a: &DenseTensor, cfg: &ApproxConfig, res: &ApproxResult) -> Result<Vec<Check>> {
    let fs = &res.factors;
    let r = cfg.rank;
    let mut out = Vec::new();

    let orth = fs.orthonormality_residual();
    out.push(Check::new(
        "orthonormality",
        orth <= ORTHONORMAL_TOL * r as f64,
        format!("max residual {orth:e}"),
    ));
    let unit = fs.unit_norm_deviation();
    out.push(Check::new(
        "unit-columns",
        unit <= UNIT_NORM_TOL,
        format!("max deviation {unit:e}"),
    ));

    let g: f64 = fs.sigmas().iter().map(|s| s * s).sum();
    let rel = (g - res.objective).abs() / res.objective.abs().max(f64::MIN_POSITIVE);
    out.push(Check::new(
        "objective",
        rel <= REL_SLACK,
        format!("relative gap {rel:e}"),
    ));

    let lam = res.lambda_sq_sum();
    out.push(Check::new(
        "upper-bound",
        at_least(lam, res.objective),
        format!("G = {}, sum lambda^2 = {lam}", res.objective),
    ));

    if cfg.extractor.is_deterministic() {
        let shape = a.shape();
        for pair in res.levels.windows(2) {
            let (upper, lower) = (&pair[0], &pair[1]);
            let mode = lower.mode;
            let beta = if mode == 0 { 1.0 } else { 1.0 / shape[mode] as f64 };
            let lhs = lower.products_sq_sum();
            let rhs = beta / r as f64 * upper.products_sq_sum();
            out.push(Check::new(
                format!("chain-mode-{mode}"),
                at_least(lhs, rhs),
                format!("{lhs} >= {rhs}"),
            ));
        }
        let ratio = theoretical_ratio(shape, r, cfg.num_orthonormal)?;
        out.push(Check::new(
            "global-bound",
            at_least(res.objective, ratio * lam),
            format!("G = {} >= {ratio} * {lam}", res.objective),
        ));
    }
    Ok(out)
}
