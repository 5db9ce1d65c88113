use std::path::Path;
use std::process::{Command, Output};

use orthocp::io::save_otns;
use orthocp::rng::derive_key;
use orthocp::synth::gaussian_tensor;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthocp"))
        .args(args)
        .env("OTNS_THREADS", "2")
        .output()
        .expect("spawn orthocp")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_ms"));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn rows(csv_text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let mut out = vec![r.headers().unwrap().iter().map(String::from).collect()];
    out.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    out
}

fn column(table: &[Vec<String>], name: &str) -> Vec<String> {
    let c = table[0]
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    table[1..].iter().map(|r| r[c].clone()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

const GAUSSIAN_A: [&str; 14] = [
    "approx",
    "--gen",
    "gaussian",
    "--shape",
    "8,8,8",
    "--R",
    "2",
    "--t",
    "3",
    "--variant",
    "A",
    "--seed",
    "7",
    "--check",
];

#[test]
fn approx_reports_orthonormal_factors() {
    let v = json(&GAUSSIAN_A);
    assert!(v["orthonormality_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["sigmas"].as_array().unwrap().len(), 2);
    assert!(v["achieved_ratio"].as_f64().unwrap() >= v["theoretical_ratio"].as_f64().unwrap());
    assert_eq!(v["levels"].as_array().unwrap().len(), 3);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn approx_is_reproducible() {
    let mut first = json(&GAUSSIAN_A);
    let mut second = json(&GAUSSIAN_A);
    strip_timing(&mut first);
    strip_timing(&mut second);
    assert_eq!(first, second);
}

#[test]
fn variant_c_depends_on_seed() {
    let objective = |seed: &str| {
        json(&[
            "approx",
            "--gen",
            "gaussian",
            "--shape",
            "8,8,8",
            "--R",
            "2",
            "--t",
            "3",
            "--variant",
            "C",
            "--seed",
            seed,
        ])["objective"]
            .as_f64()
            .unwrap()
    };
    let a = objective("1");
    let b = objective("2");
    assert!(a >= 0.0 && b >= 0.0);
    assert_ne!(a, b);
}

#[test]
fn approx_writes_factor_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "approx",
        "--gen",
        "structured",
        "--shape",
        "6,6,6",
        "--beta",
        "0.05",
        "--R",
        "2",
        "--t",
        "2",
        "--out",
        out,
    ]);
    for name in [
        "factor_0.otns",
        "factor_1.otns",
        "factor_2.otns",
        "factors.json",
        "ground_truth.json",
        "record.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("record.json")).unwrap()).unwrap();
    assert!(rec["relative_error"].as_f64().unwrap().is_finite());
    let f1 = orthocp::io::load_otns(&dir.path().join("factor_1.otns")).unwrap();
    assert_eq!(f1.shape(), &[6, 2]);
}

#[test]
fn approx_reads_tensor_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = gaussian_tensor(&[5, 4, 6], 3).unwrap();
    let bin = dir.path().join("a.otns");
    save_otns(&bin, &a).unwrap();
    let json_path = dir.path().join("a.json");
    std::fs::write(&json_path, orthocp::io::tensor_to_json(&a).to_string()).unwrap();
    let from_bin = json(&["approx", "--input", bin.to_str().unwrap(), "--R", "2", "--t", "2"]);
    let from_json = json(&["approx", "--input", json_path.to_str().unwrap(), "--R", "2", "--t", "2"]);
    assert_eq!(from_bin["objective"], from_json["objective"]);
    assert_eq!(from_bin["source"]["shape"], serde_json::json!([5, 4, 6]));
}

#[test]
fn sweep_stays_above_guarantee() {
    let table = rows(&ok(&[
        "ratio-sweep",
        "--family",
        "objective",
        "--sweep",
        "n",
        "--from",
        "4",
        "--to",
        "10",
        "--d",
        "4",
        "--R",
        "2",
        "--variant",
        "A",
        "--reps",
        "10",
        "--check",
    ]));
    assert_eq!(table[0][0], "n");
    assert_eq!(table.len(), 8);
    let real = column(&table, "min_real_ratio");
    let theory = column(&table, "theoretical_ratio");
    for (r, t) in real.iter().zip(&theory) {
        assert!(num(r) >= num(t));
    }
}

#[test]
fn single_sweep_point_matches_approx() {
    let seed = 5u64;
    let n = 6u64;
    let table = rows(&ok(&[
        "ratio-sweep",
        "--from",
        "6",
        "--to",
        "6",
        "--d",
        "3",
        "--R",
        "2",
        "--reps",
        "1",
        "--seed",
        "5",
    ]));
    let instance_seed = derive_key(&[derive_key(&[seed, n]), 0]).to_string();
    let v = json(&[
        "approx",
        "--gen",
        "gaussian",
        "--shape",
        "6,6,6",
        "--R",
        "2",
        "--seed",
        &instance_seed,
    ]);
    assert_eq!(
        num(&column(&table, "mean_real_ratio")[0]),
        v["achieved_ratio"].as_f64().unwrap()
    );
    assert_eq!(
        num(&column(&table, "theoretical_ratio")[0]),
        v["theoretical_ratio"].as_f64().unwrap()
    );
}

#[test]
fn rank_sweep_theory_column_matches_closed_form() {
    let n = 10.0f64;
    for t in [2usize, 3, 4] {
        let t_arg = t.to_string();
        let table = rows(&ok(&[
            "ratio-sweep",
            "--sweep",
            "R",
            "--from",
            "1",
            "--to",
            "5",
            "--n",
            "10",
            "--d",
            "4",
            "--t",
            &t_arg,
            "--reps",
            "2",
        ]));
        let ranks = column(&table, "R");
        let theory = column(&table, "theoretical_ratio");
        for (r, th) in ranks.iter().zip(&theory) {
            let r = num(r);
            // leading d - t modes enter through zeta^2, which is n for two modes and 1 otherwise
            let expected = match t {
                4 => 1.0 / (r.powi(3) * n * n),
                3 => 1.0 / (r.powi(2) * n * n),
                _ => 1.0 / (r * n * n),
            };
            assert!((num(th) - expected).abs() <= 1e-15 * expected, "t={t} R={r}");
        }
    }
}

#[test]
fn gathering_and_extraction_families_emit_curves() {
    for family in ["extraction", "gathering"] {
        let table = rows(&ok(&[
            "ratio-sweep",
            "--family",
            family,
            "--from",
            "4",
            "--to",
            "6",
            "--R",
            "3",
            "--reps",
            "5",
            "--check",
        ]));
        assert_eq!(table.len(), 4);
        for cell in column(&table, "mean_real_ratio") {
            assert!(num(&cell) > 0.0 && num(&cell) <= 1.0);
        }
    }
}

#[test]
fn exact_instances_are_recovered() {
    let table = rows(&ok(&[
        "recover",
        "--shape",
        "10,10,10",
        "--R",
        "3",
        "--exact",
        "--variant",
        "A",
        "--reps",
        "3",
        "--no-refine",
        "--check",
    ]));
    for cell in column(&table, "rel_err_init") {
        assert!(num(&cell) <= 1e-6);
    }
}

#[test]
fn refinement_rarely_hurts() {
    let table = rows(&ok(&[
        "recover",
        "--shape",
        "12,12,12,12",
        "--beta",
        "0.1",
        "--t",
        "4",
        "--R",
        "3",
        "--reps",
        "20",
        "--check",
    ]));
    assert_eq!(column(&table, "instance").last().unwrap(), "mean");
    let before = column(&table, "rel_err_init");
    let after = column(&table, "rel_err_refined");
    let improved = before[..20]
        .iter()
        .zip(&after[..20])
        .filter(|(b, a)| num(a) <= num(b))
        .count();
    assert!(improved >= 18, "{improved}/20");
}

#[test]
fn random_init_adds_baseline_columns() {
    let table = rows(&ok(&[
        "recover",
        "--shape",
        "6,6,6",
        "--R",
        "2",
        "--reps",
        "2",
        "--random-init",
    ]));
    for name in [
        "random_rel_err_init",
        "random_rel_err_refined",
        "random_sweeps",
        "random_refine_ms",
    ] {
        assert_eq!(column(&table, name).len(), 3);
    }
}

#[test]
fn recover_and_sweep_are_reproducible() {
    let strip = |text: String| {
        let table = rows(&text);
        let keep: Vec<usize> = (0..table[0].len()).filter(|&c| !table[0][c].ends_with("_ms")).collect();
        table
            .iter()
            .map(|r| keep.iter().map(|&c| r[c].clone()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    let recover = [
        "recover",
        "--shape",
        "6,6,6",
        "--R",
        "2",
        "--reps",
        "4",
        "--variant",
        "C",
        "--seed",
        "3",
    ];
    assert_eq!(strip(ok(&recover)), strip(ok(&recover)));
    let sweep = [
        "ratio-sweep",
        "--from",
        "4",
        "--to",
        "5",
        "--d",
        "3",
        "--reps",
        "4",
        "--variant",
        "D",
    ];
    assert_eq!(ok(&sweep), ok(&sweep));
}

#[test]
fn bench_compares_schedules() {
    let mut v = json(&["bench", "--shape", "6,6,6", "--R", "2", "--reps", "2", "--check"]);
    assert_eq!(v["identical"], true);
    strip_timing(&mut v);
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["objective"], runs[1]["objective"]);
}

fn assert_fails(args: &[&str], code: i32) {
    let out = run(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    assert!(!out.stderr.is_empty());
}

#[test]
fn errors_exit_nonzero_with_message() {
    assert_fails(
        &[
            "approx", "--gen", "gaussian", "--shape", "4,4,4", "--R", "5", "--t", "3",
        ],
        1,
    );
    assert_fails(&["approx", "--gen", "gaussian", "--R", "1"], 1);
    assert_fails(&["approx", "--input", "/nonexistent/a.otns"], 1);
    assert_fails(&["ratio-sweep", "--from", "5", "--to", "4"], 1);
    assert_fails(&["recover", "--shape", "4,4,4", "--reps", "0"], 1);
    assert_fails(&["approx", "--gen", "gaussian", "--shape", "4,4", "--variant", "E"], 2);
}

#[test]
fn bad_input_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "[[1, 2], [3]]").unwrap();
    assert_fails(&["approx", "--input", path.to_str().unwrap()], 1);
    assert!(!Path::new(&dir.path().join("record.json")).exists());
}
