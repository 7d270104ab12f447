use std::path::Path;
use std::process::{Command, Output};

use ebmt::analysis::fmt_sig;
use serde_json::Value;

const COVARIATES: &str = "x1,x2,x3,x4,x5";

fn ebmt(args: &[&str]) -> Output {
    ebmt_with_workers(args, "2")
}

fn ebmt_with_workers(args: &[&str], workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebmt"))
        .args(args)
        .env("EBMT_WORKERS", workers)
        .output()
        .unwrap()
}

fn fixtures(dir: &Path) {
    let out = ebmt(&["fixtures", "--output", dir.to_str().unwrap(), "--seed", "0"]);
    assert!(out.status.success());
    for name in ["nmes_like.csv", "y1_t2dl.csv", "y1_t2dl_truth.json"] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
}

fn lines(out: &Output) -> Vec<Value> {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn section<'a>(records: &'a [Value], name: &str) -> Vec<&'a Value> {
    records.iter().filter(|r| r["section"] == name).collect()
}

#[test]
fn balance_reports_weighting_effect() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let input = dir.path().join("nmes_like.csv");
    let out = ebmt(&[
        "balance",
        "--input",
        input.to_str().unwrap(),
        "--outcome",
        "log_expenditure",
        "--treatments",
        "duration,frequency",
        "--covariates",
        "age,male,white,married,education,income,region,seatbelt,lastage",
        "--format",
        "json-lines",
    ]);
    let records = lines(&out);
    let balance = section(&records, "balance")[0];
    assert!(balance["unweighted"].as_f64().unwrap() > 10.0);
    assert!(balance["weighted"].as_f64().unwrap() < 1e-4);
    assert_eq!(balance["degrees_of_freedom"], 18);
    assert!(section(&records, "coefficient").is_empty());
    let data = section(&records, "data")[0];
    assert!(data["dropped_rows"].as_u64().unwrap() > 0);
}

#[test]
fn estimate_covers_known_truth() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let input = dir.path().join("y1_t2dl.csv");
    let truth: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("y1_t2dl_truth.json")).unwrap(),
    )
    .unwrap();
    let out = ebmt(&[
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--outcome",
        "y",
        "--treatments",
        "t1,t2",
        "--covariates",
        COVARIATES,
        "--model",
        "1 + t1 + t2",
        "--bootstrap",
        "B=200",
        "--seed",
        "5",
        "--original-units",
        "--format",
        "json-lines",
    ]);
    let records = lines(&out);
    let coefs = section(&records, "coefficient");
    assert_eq!(coefs.len(), 3);
    for c in coefs {
        let term = c["term"].as_str().unwrap();
        let t = truth[term].as_f64().unwrap();
        assert!(
            c["wald_lower"].as_f64().unwrap() <= t && t <= c["wald_upper"].as_f64().unwrap(),
            "{term}"
        );
        assert!(
            c["bootstrap_lower"].as_f64().unwrap() <= t
                && t <= c["bootstrap_upper"].as_f64().unwrap(),
            "{term}"
        );
    }
}

#[test]
fn table_and_json_lines_agree() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let input = dir.path().join("y1_t2dl.csv");
    let base = [
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--outcome",
        "y",
        "--treatments",
        "t1,t2",
        "--covariates",
        COVARIATES,
        "--model",
        "1 + t1 + t2 + t1:t2",
        "--bootstrap",
        "B=40",
        "--level",
        "0.9",
    ];
    let json = lines(&ebmt(&[&base[..], &["--format", "json-lines"]].concat()));
    let table_out = ebmt(&base);
    assert!(table_out.status.success());
    let table = String::from_utf8(table_out.stdout).unwrap();
    assert!(table.contains("90% CI (Wald)") && table.contains("90% CI (bootstrap)"));
    for c in section(&json, "coefficient") {
        let term = c["term"].as_str().unwrap();
        let row = table
            .lines()
            .find(|l| l.split_whitespace().next() == Some(term))
            .unwrap_or_else(|| panic!("no table row for {term}"));
        for key in [
            "estimate",
            "se",
            "wald_lower",
            "wald_upper",
            "bootstrap_lower",
            "bootstrap_upper",
        ] {
            let cell = fmt_sig(c[key].as_f64().unwrap());
            assert!(row.contains(&cell), "{term} {key}: `{cell}` not in `{row}`");
        }
    }
    let balance = section(&json, "balance")[0];
    let weighted = fmt_sig(balance["weighted"].as_f64().unwrap());
    assert!(table
        .lines()
        .any(|l| l.trim_start().starts_with("EBMT") && l.contains(&weighted)));
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let input = dir.path().join("y1_t2dl.csv");
    let written = dir.path().join("report.txt");
    let args = [
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--outcome",
        "y",
        "--treatments",
        "t1,t2",
        "--covariates",
        COVARIATES,
        "--spline",
        "m=1,r=3",
        "--model",
        "1 + t1 + t2",
    ];
    let a = ebmt(&args);
    let b = ebmt(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = ebmt(&[&args[..], &["--output", written.to_str().unwrap()]].concat());
    assert!(c.status.success() && c.stdout.is_empty());
    assert_eq!(std::fs::read(&written).unwrap(), a.stdout);
    assert!(String::from_utf8(a.stdout)
        .unwrap()
        .contains("Spline surface"));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let input = dir.path().join("y1_t2dl.csv");
    let input = input.to_str().unwrap();
    let run = |extra: &[&str], covariates: &str| {
        let mut args = vec![
            "estimate",
            "--input",
            input,
            "--outcome",
            "y",
            "--treatments",
            "t1,t2",
        ];
        args.extend(["--covariates", covariates]);
        args.extend(extra);
        ebmt(&args)
    };

    let missing = run(&["--model", "1 + t1"], "x1,nope");
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));

    assert_eq!(
        run(&["--model", "1 + t1 + t9"], COVARIATES).status.code(),
        Some(2)
    );
    assert_eq!(run(&["--spline", "m=2"], COVARIATES).status.code(), Some(2));
    assert_eq!(run(&[], COVARIATES).status.code(), Some(2));
    assert_eq!(
        run(&["--model", "1 + t1", "--bootstrap", "B=10"], COVARIATES)
            .status
            .code(),
        Some(2)
    );

    let absent = ebmt(&[
        "balance",
        "--input",
        "/nonexistent.csv",
        "--outcome",
        "y",
        "--treatments",
        "t",
        "--covariates",
        "x",
    ]);
    assert_eq!(absent.status.code(), Some(2));

    // x carries the treatment itself, so T * X cannot be balanced to zero
    let infeasible = dir.path().join("infeasible.csv");
    let mut text = String::from("y,t,x\n");
    for i in 0..40 {
        let v = i as f64 / 10.0 - 2.0;
        text.push_str(&format!("{},{v},{v}\n", i % 3));
    }
    std::fs::write(&infeasible, text).unwrap();
    let out = ebmt(&[
        "balance",
        "--input",
        infeasible.to_str().unwrap(),
        "--outcome",
        "y",
        "--treatments",
        "t",
        "--covariates",
        "x",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_writes_table_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(
        &config,
        "name = \"tiny\"\ntreatment_model = \"T2dL\"\noutcome_spec = \"Y1\"\nsample_sizes = [200]\nreplications = 4\nseed = 1\n",
    )
    .unwrap();
    let log = dir.path().join("log.jsonl");
    let out = ebmt(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("EBMT") && table.contains("RCAM") && table.contains("EBUT"));
    let records = std::fs::read_to_string(&log).unwrap();
    assert_eq!(records.lines().count(), 4);
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let input = dir.path().join("y1_t2dl.csv");
    let config = dir.path().join("det.toml");
    std::fs::write(
        &config,
        "name = \"det\"\ntreatment_model = \"T2dL\"\noutcome_spec = \"Y1\"\nsample_sizes = [200]\n\
         replications = 8\nbootstrap_b = 40\nseed = 3\n",
    )
    .unwrap();
    let simulate = [
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "json-lines",
    ];
    let estimate = [
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--outcome",
        "y",
        "--treatments",
        "t1,t2",
        "--covariates",
        COVARIATES,
        "--model",
        "1 + t1 + t2",
        "--bootstrap",
        "B=100",
        "--seed",
        "11",
        "--format",
        "json-lines",
    ];
    for args in [&simulate[..], &estimate[..]] {
        let one = ebmt_with_workers(args, "1");
        let many = ebmt_with_workers(args, "8");
        assert!(
            one.status.success(),
            "{}",
            String::from_utf8_lossy(&one.stderr)
        );
        assert!(!one.stdout.is_empty());
        assert_eq!(one.stdout, many.stdout);
    }
    assert_eq!(ebmt_with_workers(&simulate, "0").status.code(), Some(2));
}
