use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn ppga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppga"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = ppga(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("report is JSON")
}

fn schema() -> jsonschema::Validator {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).expect("schema compiles")
}

fn assert_valid(report: &Value) {
    let errors: Vec<String> = schema()
        .iter_errors(report)
        .map(|e| format!("{e} at {}", e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

/// 1000 voters split evenly between projects a and b, each costing the whole budget.
fn two_bloc_file(dir: &Path) -> PathBuf {
    let mut text = String::from(
        "META\nkey;value\nnum_projects;3\nnum_votes;1000\nbudget;300\nvote_type;approval\n\
         PROJECTS\nproject_id;cost\na;300\nb;300\nc;300\nVOTES\nvoter_id;vote\n",
    );
    for i in 0..1000 {
        text.push_str(&format!("{i};{}\n", if i < 500 { "a" } else { "b" }));
    }
    let path = dir.join("bloc.pb");
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn repeat_runs_are_byte_identical() {
    let input = fixture("miniature.pb");
    let args = ["solve", "--input", s(&input), "--seed", "5", "--iterations", "4"];
    let first = ok(&args);
    let second = ok(&args);
    assert_eq!(first, second);
    let report = json(&first);
    assert_eq!(report["command"], "solve");
    assert_eq!(report["iterations"], 4);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let input = fixture("synthetic_city.pb");
    let base = [
        "solve",
        "--input",
        s(&input),
        "--sample",
        "1500",
        "--seed",
        "3",
        "--iterations",
        "3",
    ];
    let one = ok(&[&base[..], &["--threads", "1"]].concat());
    let two = ok(&[&base[..], &["--threads", "2"]].concat());
    let four = ok(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one, two);
    assert_eq!(one, four);
}

#[test]
fn different_seeds_give_different_noise() {
    let input = fixture("miniature.pb");
    let a = json(&ok(&["solve", "--input", s(&input), "--seed", "1"]));
    let b = json(&ok(&["solve", "--input", s(&input), "--seed", "2"]));
    assert_ne!(a["allocation"], b["allocation"]);
}

#[test]
fn exhausted_budget_exits_3() {
    let input = fixture("miniature.pb");
    // ln(1/δ)/(α-1) = ln 10 exceeds ε, nothing is left per iteration.
    let out = ppga(&[
        "solve",
        "--input",
        s(&input),
        "--epsilon",
        "0.01",
        "--delta",
        "0.1",
        "--alpha",
        "2",
        "--iterations",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn input_and_flag_errors_exit_2() {
    let missing = ppga(&["solve", "--input", "/definitely/not/here.pb"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("not/here.pb"));

    let malformed = fixture("malformed/bad_cost.pb");
    let bad = ppga(&["solve", "--input", s(&malformed)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&bad.stderr).contains("line 7"),
        "{}",
        String::from_utf8_lossy(&bad.stderr)
    );

    let input = fixture("miniature.pb");
    let rho = ppga(&["solve", "--input", s(&input), "--rho=0"]);
    assert_eq!(rho.status.code(), Some(2));
    let delta = ppga(&["solve", "--input", s(&input), "--delta", "1.5"]);
    assert_eq!(delta.status.code(), Some(2));
    let runs = ppga(&["compare", "--input", s(&input), "--runs", "0"]);
    assert_eq!(runs.status.code(), Some(2));
}

#[test]
fn reports_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("miniature.pb");
    let solve_path = dir.path().join("solve.json");
    ok(&["solve", "--input", s(&input), "--out", s(&solve_path)]);
    let solve = json(&fs::read(&solve_path).unwrap());
    assert_valid(&solve);

    let baseline = json(&ok(&["baseline", "--input", s(&input)]));
    assert_valid(&baseline);
    assert!(baseline["ledger"].is_null());
    assert_eq!(baseline["converged"], true);

    let compare = json(&ok(&["compare", "--input", s(&input), "--runs", "2"]));
    assert_valid(&compare);

    let metrics = json(&ok(&[
        "metrics",
        "--input",
        s(&input),
        "--allocation",
        s(&solve_path),
        "--reference",
        s(&solve_path),
    ]));
    assert_valid(&metrics);
    assert_eq!(metrics["metrics"]["sd_per_m"], 0.0);
    assert_eq!(metrics["metrics"]["sw"], solve["metrics"]["sw"]);

    // The schema does reject a broken report.
    let mut broken = solve.clone();
    broken["allocation"] = Value::String("none".into());
    assert!(!schema().is_valid(&broken));
}

#[test]
fn compare_fifty_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("miniature.pb");
    let csv = dir.path().join("ratios.csv");
    let report = json(&ok(&[
        "compare",
        "--input",
        s(&input),
        "--runs",
        "50",
        "--seed",
        "100",
        "--csv",
        s(&csv),
    ]));
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 50);
    assert_eq!(runs[0]["seed"], 100);
    assert_eq!(runs[49]["seed"], 149);
    let agg = &report["aggregate"];
    assert_eq!(agg["runs"], 50);
    for stat in ["mean", "min", "median"] {
        assert!(agg[stat]["sw_ratio"].is_number(), "{stat}");
        assert!(agg[stat]["ps_min_times_n"].is_number(), "{stat}");
    }
    let ratios: Vec<f64> = runs.iter().map(|r| r["sw_ratio"].as_f64().unwrap()).collect();
    let mean = ratios.iter().sum::<f64>() / 50.0;
    assert!((agg["mean"]["sw_ratio"].as_f64().unwrap() - mean).abs() < 1e-12);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(agg["min"]["sw_ratio"].as_f64().unwrap(), min);

    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 51);
    assert_eq!(lines[0], "seed,sw_ppga,sw_core,sw_ratio");
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 100.0);
    assert_eq!(first[3], ratios[0]);
    assert!((first[1] / first[2] - first[3]).abs() < 1e-15);
}

#[test]
fn baseline_only_skips_private_runs() {
    let input = fixture("miniature.pb");
    let report = json(&ok(&["compare", "--input", s(&input), "--baseline-only"]));
    assert_valid(&report);
    assert_eq!(report["runs"].as_array().unwrap().len(), 0);
    assert!(report["aggregate"].is_null());
    assert!(report["ledger"].is_null());
    assert!(report["config_echo"]["dp"].is_null());
    assert_eq!(report["core"]["converged"], true);
}

#[test]
fn tiny_noise_tracks_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let input = two_bloc_file(dir.path());
    let report = json(&ok(&[
        "compare",
        "--input",
        s(&input),
        "--epsilon",
        "1e6",
        "--iterations",
        "200",
    ]));
    assert!(report["ledger"]["sigma2"].as_f64().unwrap() < 1e-8);
    let core: Vec<f64> = serde_json::from_value(report["core"]["allocation"].clone()).unwrap();
    assert!(
        (core[0] - 0.5).abs() < 1e-6 && (core[1] - 0.5).abs() < 1e-6 && core[2] < 1e-6,
        "{core:?}"
    );
    let sd = report["runs"][0]["sd_per_m"].as_f64().unwrap();
    assert!(sd <= 1e-4, "sd/m = {sd}");
}

#[test]
fn auto_budget_resolves_on_the_sampled_size() {
    let input = fixture("synthetic_city.pb");
    let report = json(&ok(&[
        "solve",
        "--input",
        s(&input),
        "--sample",
        "10000",
        "--seed",
        "0",
        "--threads",
        "1",
    ]));
    let ledger = &report["ledger"];
    let eps = ledger["epsilon"].as_f64().unwrap();
    assert!((eps - 1.5 / 10000f64.ln()).abs() < 1e-12, "{eps}");
    assert!((eps - 0.1629).abs() < 1e-4);
    assert!((ledger["delta"].as_f64().unwrap() - 0.003).abs() < 1e-15);
    assert_eq!(ledger["iterations"], 10);
    assert_eq!(report["config_echo"]["instance"]["voters"], 10000);
    assert_eq!(report["config_echo"]["sample"], 10000);
    assert!(report["config_echo"]["dp"]["epsilon"].is_null());
}

#[test]
fn metrics_reads_a_bare_array() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("miniature.pb");
    let alloc = dir.path().join("z.json");
    fs::write(&alloc, "[0.1, 0.1, 0.1, 0.1, 0.1, 0.05]").unwrap();
    let report = json(&ok(&["metrics", "--input", s(&input), "--allocation", s(&alloc)]));
    assert!(report["metrics"]["sd_per_m"].is_null());
    assert!(report["metrics"]["sw"].as_f64().unwrap() > 0.0);

    fs::write(&alloc, "[0.1, 0.1]").unwrap();
    let short = ppga(&["metrics", "--input", s(&input), "--allocation", s(&alloc)]);
    assert_eq!(short.status.code(), Some(2));
}
