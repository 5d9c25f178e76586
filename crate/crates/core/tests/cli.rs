use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lo_bound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lo-bound"))
        .args(args)
        .env_remove("LO_BOUND_THREADS")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eval_writes_report_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let run = lo_bound(&[
        "--threads", "1", "eval", "--mu", "ball", "--nu", "ball", "--exact-kernel", "-M", "100", "-R", "10", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("1.604360"), "{stdout}");
    let doc = read_json(&out);
    assert_eq!(doc["manifest"]["subcommand"], "eval");
    assert_eq!(doc["manifest"]["parameters"]["M"], 100);
    assert_eq!(doc["result"]["report"]["feasible"], true);
    let constant = doc["result"]["report"]["constant"].as_f64().unwrap();
    assert!((constant - 1.604358).abs() < 5e-5);
}

#[test]
fn eval_rejects_bad_arguments() {
    let run = lo_bound(&["eval", "--mu", "delta", "--nu", "ball", "--exact-kernel", "-M", "10", "-R", "3"]);
    assert_eq!(run.status.code(), Some(1));
    let run = lo_bound(&["eval", "--mu", "ball", "--nu", "/nonexistent/measure.json"]);
    assert_eq!(run.status.code(), Some(1));
    let run = lo_bound(&["eval", "--mu", "ball", "--nu", "ball", "-M", "3", "-R", "2.5"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn psi_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("psi.bin");
    let args = |out: &str| {
        vec![
            "eval".to_string(),
            "--mu".into(),
            "sphere".into(),
            "--nu".into(),
            "delta".into(),
            "-K".into(),
            "3".into(),
            "-M".into(),
            "20".into(),
            "-R".into(),
            "5".into(),
            "--psi-cache".into(),
            cache.to_str().unwrap().into(),
            "--out".into(),
            dir.path().join(out).to_str().unwrap().into(),
        ]
    };
    let first: Vec<String> = args("a.json");
    assert!(lo_bound(&first.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    assert!(cache.exists());
    let second: Vec<String> = args("b.json");
    assert!(lo_bound(&second.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    let a = read_json(&dir.path().join("a.json"));
    let b = read_json(&dir.path().join("b.json"));
    assert_eq!(a["result"]["report"]["constant"], b["result"]["report"]["constant"]);
    assert_eq!(b["manifest"]["inputs"][0], cache.to_str().unwrap());

    let wrong = lo_bound(&[
        "eval", "--mu", "sphere", "--nu", "delta", "-K", "3", "-M", "10", "-R", "5", "--psi-cache",
        cache.to_str().unwrap(),
    ]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn optimized_measures_recertify() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let run = lo_bound(&[
        "optimize", "-K", "4", "-M", "20", "-R", "5", "--restarts", "2", "--max-evals", "120", "--seed", "3", "--out",
        &path("opt.json"), "--trajectory", &path("traj.csv"), "--mu-out", &path("mu.json"), "--nu-out", &path("nu.json"),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let optimized = read_json(Path::new(&path("opt.json")))["result"]["report"]["constant"].as_f64().unwrap();

    let trajectory = std::fs::read_to_string(path("traj.csv")).unwrap();
    assert!(trajectory.starts_with("# "));
    assert!(trajectory.contains("evaluation_index,restart,constant"));

    let run = lo_bound(&[
        "eval", "--mu", &path("mu.json"), "--nu", &path("nu.json"), "-K", "4", "-M", "20", "-R", "5", "--out",
        &path("eval.json"),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let evaluated = read_json(Path::new(&path("eval.json")))["result"]["report"]["constant"].as_f64().unwrap();
    assert!((optimized - evaluated).abs() < 1e-10, "{optimized} vs {evaluated}");
}

#[test]
fn reproduce_table_one() {
    let run = lo_bound(&["reproduce", "--table", "1", "--budget", "small"]);
    assert!(run.status.success());
    let csv = String::from_utf8_lossy(&run.stdout);
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("table,row,column,computed,reference,deviation"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let deviation: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(deviation < 5e-4, "{row}");
    }
    assert_eq!(lo_bound(&["reproduce", "--table", "5"]).status.code(), Some(2));
}

#[test]
fn exchange_and_classic() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("g.csv");
    let run = lo_bound(&["exchange", "--curves", curves.to_str().unwrap()]);
    assert!(run.status.success());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("1.248993") && stdout.contains("1.208994"), "{stdout}");
    let text = std::fs::read_to_string(&curves).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1002);

    let out = dir.path().join("classic.json");
    let run = lo_bound(&["classic", "--mu", "ball", "--variant", "zeta", "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    let doc = read_json(&out);
    assert_eq!(doc["result"]["variant"], "zeta");
    assert!((doc["result"]["constant"].as_f64().unwrap() - 1.68).abs() < 1e-2);
}
