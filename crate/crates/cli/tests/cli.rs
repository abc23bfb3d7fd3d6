use std::process::{Command, Output};

use serde_json::Value;

fn ddr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddr")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn cartier_line_mod_two() {
    let out = ddr(&["cartier-check", "--p", "2", "--vars", "y", "--degcap", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["results"]["h_dims"], serde_json::json!([5, 4]));
    assert_eq!(v["schema"], "padic-ddr-report/v1");
}

#[test]
fn derived_dr_generator_mod_two() {
    let v = json(&ddr(&["derived-dr", "--p", "2", "--f", "x", "--smax", "3", "--degcap", "6"]));
    // -gamma_2(x) = gamma_2(x) mod 2
    assert_eq!(v["results"]["comp_generator"], "1*g2(x)");
    assert_eq!(v["flags"]["certified"], true);
}

#[test]
fn fontaine_valuation_is_a_fraction() {
    let v = json(&ddr(&["period", "--p", "3", "--n", "2", "--k", "1", "--op", "fontaine-val"]));
    assert_eq!(v["results"]["derivative_valuation"], "1/2");
    assert_eq!(v["results"]["kernel_bound"], "-1/2");
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(ddr(&["cartier-check", "--p", "4"]).status.code(), Some(2));
    assert_eq!(ddr(&["period", "--p", "3", "--n", "4", "--k", "1", "--op", "theta"]).status.code(), Some(2));
    assert_eq!(ddr(&["derived-dr", "--p", "2", "--f", "x+x^2"]).status.code(), Some(2));
    assert_eq!(ddr(&["period", "--p", "3", "--chi", "3", "--op", "beta"]).status.code(), Some(2));
}

#[test]
fn memory_guard_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_ddr"))
        .args(["derived-dr", "--p", "2", "--smax", "6", "--degcap", "10"])
        .env("DDR_MEMORY_GUARD", "50")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("memory guard"));
}

#[test]
fn csv_tables() {
    let out = ddr(&["pd-envelope", "--p", "3", "--r", "2", "--cap", "4", "--format", "csv"]);
    let s = String::from_utf8(out.stdout).unwrap();
    assert_eq!(s.lines().take(4).collect::<Vec<_>>(), ["weight,dim", "0,1", "1,2", "2,3"]);
}

#[test]
fn help_documents_truncation() {
    for cmd in ["cartier-check", "pd-envelope", "derived-dr", "conjugate-ss", "comp-map", "witt-test", "period", "fontaine-val", "ast-check", "selftest"] {
        let out = ddr(&[cmd, "--help"]);
        let s = String::from_utf8(out.stdout).unwrap();
        assert!(s.contains("Truncation") || s.contains("seed"), "{cmd}");
    }
}

#[test]
fn every_period_op_passes() {
    for op in ["theta", "beta", "st-cocycle", "ast-check"] {
        let out = ddr(&["period", "--p", "3", "--op", op, "--samples", "5"]);
        assert_eq!(out.status.code(), Some(0), "{op}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn comp_map_and_conjugate_ss() {
    let v = json(&ddr(&["comp-map", "--p", "3", "--smax", "3", "--degcap", "9", "--kmax", "3"]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["results"]["images"][0]["image"], "-1*g3(x)");
    let v = json(&ddr(&["conjugate-ss", "--p", "2", "--smax", "4", "--degcap", "3"]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["results"]["entries"][1]["e1"], 2);
}

#[test]
fn selftest_is_deterministic() {
    let a = ddr(&["selftest"]);
    let b = ddr(&["selftest"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
