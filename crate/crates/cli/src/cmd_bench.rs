use std::time::Instant;

use anyhow::{bail, Result};
use orthocp::approx::approximate;
use orthocp::synth::gaussian_tensor;
use orthocp::Exec;
use serde::Serialize;

use crate::args::BenchArgs;
use crate::output::emit_text;

#[derive(Debug, Serialize)]
struct Timing {
    exec: Exec,
    objective: f64,
    min_ms: f64,
    median_ms: f64,
}

#[derive(Debug, Serialize)]
struct BenchRecord {
    command: &'static str,
    shape: Vec<usize>,
    rank: usize,
    num_orthonormal: usize,
    variant: String,
    seed: u64,
    identical: bool,
    runs: Vec<Timing>,
}

pub fn run(args: &BenchArgs) -> Result<bool> {
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let a = gaussian_tensor(&args.shape, args.algo.seed)?;
    let base = args.algo.config(a.order(), args.algo.seed);

    let mut runs = Vec::new();
    let mut outputs = Vec::new();
    for exec in [Exec::Sequential, Exec::Parallel] {
        let cfg = base.clone().with_exec(exec);
        let mut times = Vec::with_capacity(args.reps);
        let mut last = None;
        for _ in 0..args.reps {
            let start = Instant::now();
            let res = approximate(&a, &cfg)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            last = Some(res);
        }
        let res = last.expect("at least one repetition");
        times.sort_by(f64::total_cmp);
        runs.push(Timing {
            exec,
            objective: res.objective,
            min_ms: times[0],
            median_ms: times[times.len() / 2],
        });
        outputs.push(res.factors);
    }
    let identical = outputs[0] == outputs[1];
    let record = BenchRecord {
        command: "bench",
        shape: args.shape.clone(),
        rank: base.rank,
        num_orthonormal: base.num_orthonormal,
        variant: base.extractor.to_string(),
        seed: base.seed,
        identical,
        runs,
    };
    emit_text(args.out.as_deref(), &(serde_json::to_string_pretty(&record)? + "\n"))?;
    Ok(!args.check || identical)
}
