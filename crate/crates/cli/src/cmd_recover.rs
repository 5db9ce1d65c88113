use std::time::Instant;

use anyhow::{bail, Result};
use orthocp::approx::approximate;
use orthocp::exec::try_map_range;
use orthocp::metrics::{relative_error, residual_norm};
use orthocp::rng::derive_key;
use orthocp::synth::{random_factor_set, structured_tensor};
use orthocp::{refine, DenseTensor, FactorSet, RefineTrace};

use crate::args::RecoverArgs;
use crate::output::{csv_text, emit_text, fmt};
use crate::source::structured_spec;

const RANDOM_INIT_SALT: u64 = 0x7261_6e64;

struct Refined {
    rel_err: f64,
    residual: f64,
    sweeps: usize,
    refine_ms: f64,
    monotone: bool,
}

struct Row {
    rel_err_init: f64,
    residual_init: f64,
    init_ms: f64,
    refined: Refined,
    random: Option<(f64, Refined)>,
}

fn monotone(trace: &RefineTrace) -> bool {
    trace.residuals.windows(2).all(|w| w[1] <= w[0] + 1e-10)
}

fn run_refine(args: &RecoverArgs, a: &DenseTensor, truth: &FactorSet, init: &FactorSet) -> Result<Refined> {
    if args.no_refine {
        return Ok(Refined {
            rel_err: relative_error(truth, init, args.matching())?,
            residual: residual_norm(a, init.factors(), init.sigmas())?,
            sweeps: 0,
            refine_ms: 0.0,
            monotone: true,
        });
    }
    let (out, trace) = refine(a, init, &args.als.config())?;
    Ok(Refined {
        rel_err: relative_error(truth, &out, args.matching())?,
        residual: *trace.residuals.last().expect("initial residual"),
        sweeps: trace.iterations,
        refine_ms: trace.elapsed_ms,
        monotone: monotone(&trace),
    })
}

fn instance(args: &RecoverArgs, k: usize) -> Result<Row> {
    let seed = derive_key(&[args.algo.seed, k as u64]);
    let d = args.shape.len();
    let t = args.algo.t.unwrap_or(d);
    let spec = structured_spec(
        &args.shape,
        args.algo.rank,
        t,
        args.beta,
        seed,
        args.exact,
        args.incoherence,
    );
    let (a, truth) = structured_tensor(&spec)?;

    let start = Instant::now();
    let res = approximate(&a, &args.algo.config(d, seed))?;
    let init_ms = start.elapsed().as_secs_f64() * 1e3;
    let init = res.factors;
    let rel_err_init = relative_error(&truth.factors, &init, args.matching())?;
    let residual_init = residual_norm(&a, init.factors(), init.sigmas())?;
    let refined = run_refine(args, &a, &truth.factors, &init)?;

    let random = if args.random_init {
        let start = random_factor_set(&args.shape, args.algo.rank, t, derive_key(&[seed, RANDOM_INIT_SALT]))?;
        let err0 = relative_error(&truth.factors, &start, args.matching())?;
        Some((err0, run_refine(args, &a, &truth.factors, &start)?))
    } else {
        None
    };
    Ok(Row {
        rel_err_init,
        residual_init,
        init_ms,
        refined,
        random,
    })
}

pub fn run(args: &RecoverArgs) -> Result<bool> {
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let rows = try_map_range(args.algo.exec(), args.reps, |k| instance(args, k))?;

    let mut header = vec![
        "instance",
        "rel_err_init",
        "rel_err_refined",
        "sweeps",
        "residual_init",
        "residual_refined",
        "init_ms",
        "refine_ms",
    ];
    if args.random_init {
        header.extend([
            "random_rel_err_init",
            "random_rel_err_refined",
            "random_sweeps",
            "random_refine_ms",
        ]);
    }

    let numeric: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.rel_err_init,
                r.refined.rel_err,
                r.refined.sweeps as f64,
                r.residual_init,
                r.refined.residual,
                r.init_ms,
                r.refined.refine_ms,
            ];
            if let Some((err0, rnd)) = &r.random {
                v.extend([*err0, rnd.rel_err, rnd.sweeps as f64, rnd.refine_ms]);
            }
            v
        })
        .collect();

    let mut table: Vec<Vec<String>> = numeric
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut row = vec![k.to_string()];
            for (c, x) in v.iter().enumerate() {
                // sweep counts are integers
                if header[c + 1].ends_with("sweeps") {
                    row.push((*x as usize).to_string());
                } else {
                    row.push(fmt(*x));
                }
            }
            row
        })
        .collect();
    let width = header.len() - 1;
    let mut mean_row = vec!["mean".to_string()];
    for c in 0..width {
        let total: f64 = numeric.iter().map(|v| v[c]).sum();
        mean_row.push(fmt(total / numeric.len() as f64));
    }
    table.push(mean_row);

    let mut passed = true;
    if args.check {
        for (k, r) in rows.iter().enumerate() {
            let random_ok = r.random.as_ref().is_none_or(|(_, rnd)| rnd.monotone);
            if !r.refined.monotone || !random_ok {
                eprintln!("check failed: residual increased during refinement of instance {k}");
                passed = false;
            }
            if !r.rel_err_init.is_finite() || !r.refined.rel_err.is_finite() {
                eprintln!("check failed: non-finite error in instance {k}");
                passed = false;
            }
        }
    }
    emit_text(args.out.as_deref(), &csv_text(&header, &table)?)?;
    Ok(passed)
}
