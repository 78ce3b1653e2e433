use std::path::PathBuf;
use std::process::{Command, Output};

use ldl_core::generator::GKSLGenerator;
use ldl_core::io::{matrix_from_rows, matrix_to_rows, MatrixRows};
use proptest::prelude::*;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ldl"))
}

fn model(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    root.to_str().unwrap().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ldl-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_model(name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(model("tm_nr.json")).unwrap()).unwrap();
    edit(&mut v);
    let path = scratch(name);
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn validate_good_model() {
    let out = run(&["validate", &model("tm_rwa.json")]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], true);
    assert_eq!(v["rotating_wave"], true);
}

#[test]
fn unknown_command_is_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn invalid_models_exit_one() {
    let non_hermitian = write_model("nonherm.json", |v| {
        v["system"]["hamiltonian"][0][1] = serde_json::json!([0.5, 0.0]);
    });
    let out = run(&["validate", &non_hermitian]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Hermitian"));

    let typo = write_model("typo.json", |v| {
        v["bath"]["betta"] = serde_json::json!(1.0);
    });
    assert_eq!(code(&run(&["validate", &typo])), 1);

    let overlap = write_model("overlap.json", |v| {
        v["bath"]["rho1"] = v["bath"]["rho0"].clone();
    });
    let out = run(&["check", &overlap, "--suite", "identities"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));

    assert_eq!(code(&run(&["validate", "/nonexistent/model.json"])), 1);
}

#[test]
fn failing_identity_exits_three() {
    let strong = write_model("strong.json", |v| {
        v["system"]["coupling"] = serde_json::json!([[[0.0, 0.0], [10.0, 0.0]], [[10.0, 0.0], [0.0, 0.0]]]);
    });
    let report = scratch("strong-report.json");
    let out = run(&["check", &strong, "--suite", "all", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["pass"], false);
    let failing: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["check"].as_str().unwrap())
        .collect();
    assert!(failing.contains(&"neumann_vs_direct"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("neumann_vs_direct"));
}

#[test]
fn reference_models_pass_all_checks() {
    for name in ["tm_rwa.json", "tm_nr.json"] {
        let out = run(&["check", &model(name), "--suite", "all"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["pass"], true);
    }
}

#[test]
fn drift_reports_both_paths() {
    let path = scratch("drift.json");
    let out = run(&["drift", &model("tm_nr.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let a: MatrixRows = serde_json::from_value(v["drift_direct"].clone()).unwrap();
    let b: MatrixRows = serde_json::from_value(v["drift_via_t"].clone()).unwrap();
    let diff = &matrix_from_rows(&a, "a").unwrap() - &matrix_from_rows(&b, "b").unwrap();
    assert!(v["frobenius_discrepancy"].as_f64().unwrap() <= 1e-10);
    assert_eq!(diff.norm(), v["frobenius_discrepancy"].as_f64().unwrap());
}

#[test]
fn gamma_table() {
    let out = run(&["gamma", &model("tm_nr.json"), "--epsilon", "1", "--emin", "-1", "--emax", "4", "--points", "11"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "E,re_gamma,im_gamma");
    assert_eq!(lines.len(), 12);
    assert!(lines[1].starts_with("-1,"));
    assert!(lines[11].starts_with("4,"));
    assert_eq!(code(&run(&["gamma", &model("tm_nr.json"), "--epsilon", "2", "--emin", "0", "--emax", "1", "--points", "3"])), 64);
}

#[test]
fn tmatrix_lists_blocks_and_partial_sums() {
    let out = run(&["tmatrix", &model("tm_nr.json"), "--energy", "0.5"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let blocks = v["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 4);
    let orders: Vec<u64> = blocks[0]["series"].as_array().unwrap().iter().map(|p| p["order"].as_u64().unwrap()).collect();
    assert_eq!(orders, vec![2, 4, 6]);
    let orders: Vec<u64> = blocks[1]["series"].as_array().unwrap().iter().map(|p| p["order"].as_u64().unwrap()).collect();
    assert_eq!(orders, vec![1, 3, 5]);
}

#[test]
fn generator_json_round_trips_bit_exactly() {
    let out = run(&["generator", &model("tm_nr.json")]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let gen: GKSLGenerator = serde_json::from_str(&text).unwrap();
    assert_eq!(gen.to_json() + "\n", text);
}

#[test]
fn evolve_and_unravel_write_csv() {
    let rho0 = scratch("rho0.json");
    std::fs::write(&rho0, "[[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]]").unwrap();
    let out = run(&["evolve", &model("tm_nr.json"), "--rho0", rho0.to_str().unwrap(), "--tmax", "1000", "--dt", "100"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with("t,re_00,re_01,re_10,re_11,im_00,im_01,im_10,im_11\n"));

    let bad = run(&["evolve", &model("tm_nr.json"), "--rho0", rho0.to_str().unwrap(), "--tmax", "1", "--dt", "0"]);
    assert_eq!(code(&bad), 64);

    std::fs::write(&rho0, "[[[0.5,0],[0.9,0]],[[0.9,0],[0.5,0]]]").unwrap();
    let not_psd = run(&["evolve", &model("tm_nr.json"), "--rho0", rho0.to_str().unwrap(), "--tmax", "1", "--dt", "0.1"]);
    assert_eq!(code(&not_psd), 1);
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let psi0 = scratch("psi0.json");
    std::fs::write(&psi0, "[[0.6,0],[0,0.8]]").unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let path = scratch(&format!("unravel-{threads}.csv"));
        let out = run(&[
            "unravel",
            &model("tm_nr.json"),
            "--psi0",
            psi0.to_str().unwrap(),
            "--tmax",
            "20000",
            "--dt",
            "200",
            "--trajectories",
            "500",
            "--seed",
            "11",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let a = run(&["generator", &model("tm_rwa.json")]).stdout;
    let b = run(&["generator", &model("tm_rwa.json")]).stdout;
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_json_round_trip(entries in proptest::collection::vec((any::<f64>(), any::<f64>()), 9)) {
        prop_assume!(entries.iter().all(|(a, b)| a.is_finite() && b.is_finite()));
        let m = ldl_core::linalg::CMat::from_iterator(3, 3, entries.iter().map(|&(a, b)| num_complex::Complex64::new(a, b)));
        let text = serde_json::to_string(&matrix_to_rows(&m)).unwrap();
        let rows: MatrixRows = serde_json::from_str(&text).unwrap();
        let back = matrix_from_rows(&rows, "m").unwrap();
        for (x, y) in m.iter().zip(back.iter()) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }
}
