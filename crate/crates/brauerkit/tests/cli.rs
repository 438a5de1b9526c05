use std::process::Command;

use brauerkit::cli::validate_report;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_brauerkit"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn pages() -> String {
    format!("{}/data/tmf_pages.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn every_report_matches_the_schema() {
    let page = pages();
    let cases: Vec<Vec<&str>> = vec![
        vec!["snf", "--matrix", "[[2,4,4],[-6,6,12],[10,-4,-16]]"],
        vec!["cohomology", "--module", "sign", "--group", "Z/4", "--degree", "3"],
        vec!["cohomology", "--sheaf", "gm", "--site", "Gm", "--degree", "2"],
        vec!["artin-schreier", "--p", "2", "--op", "x + j*x^2", "--window", "16"],
        vec!["cech", "--vars", "3", "--window", "3"],
        vec!["br-number-ring", "--places", r#"[{"kind":"real"}]"#],
        vec!["h1-qz", "--primes", "2,3"],
        vec!["br-laurent"],
        vec!["pic-ko", "--ring", "Z_omega_17"],
        vec!["lbr-ko"],
        vec!["pic-tmf", "--prime", "2"],
        vec!["pic-tmf-c4inv"],
        vec!["lbr-tmf", "--window", "24"],
        vec!["lbr-mo", "--window", "24"],
        vec!["ss-run", "--page", &page, "--column", "0"],
    ];
    for args in cases {
        let (code, out) = run(&args);
        assert_eq!(code, 0, "{args:?}: {out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        validate_report(&v).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        assert_eq!(v["status"], 0);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        &["pic-tmf"][..],
        &["lbr-tmf", "--window", "20"],
        &["pic-ko", "--ring", "Z"],
    ] {
        assert_eq!(run(args), run(args));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["snf", "--matrix", "[[1,2],[3]]"]).0, 2);
    assert_eq!(run(&["snf", "--matrix", "not json"]).0, 2);
    assert_eq!(run(&["pic-ko", "--ring", "no_such_ring"]).0, 3);
    assert_eq!(
        run(&["cohomology", "--sheaf", "gm", "--site", "Spec Z", "--degree", "3"]).0,
        3
    );
    assert_eq!(run(&["frobnicate"]).0, 2);
}

#[test]
fn chart_and_output_file() {
    let (code, svg) = run(&["ss-chart", "--page", &pages(), "--format", "svg"]);
    assert_eq!(code, 0);
    assert!(
        svg.starts_with("<svg") || svg.starts_with("<?xml"),
        "{}",
        &svg[..svg.len().min(80)]
    );
    let dir = std::env::temp_dir().join(format!("brauerkit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let (code, stdout) = run(&["lbr-ko", "--output", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["group"], "Z/2");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn text_format_lists_fields() {
    let (code, out) = run(&["br-laurent", "--format", "text"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "group: 0"), "{out}");
}
