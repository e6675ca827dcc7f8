use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn seqstop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqstop")).current_dir(dir).args(args).arg("--quiet").output().expect("binary runs")
}

fn json_without_run_info(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("run_info");
    v
}

const QD1: &str = "[problem]\nkind = \"QD1\"\nmu = 1.0\nc = 1.0\n[grid]\nnodes = 41\n[sim]\nseed = 11\nn_paths = 400\nhorizon = 5.0\n";

#[test]
fn solve_writes_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), QD1).unwrap();
    let out = seqstop(dir.path(), &["solve", "--config", "run.toml", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/value.csv")).unwrap();
    assert!(csv.starts_with("# {"));
    assert!(csv.lines().any(|l| l == "pi_1,pi_2,V,g,h,stopping_flag"));
    assert!(fs::read_to_string(dir.path().join("o/boundary.csv")).unwrap().lines().any(|l| l == "abscissa,ordinate,flag"));
    let report = json_without_run_info(&dir.path().join("o/solve_report.json"));
    assert_eq!(report["lambda_defaulted"], true);
    assert_eq!(report["report"]["converged"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("st3.toml"), "[problem]\nkind = \"ST3\"\nmu = 1.0\nc = 0.2\n[sim]\nseed = 1\n").unwrap();
    assert_eq!(seqstop(d, &["verify", "--config", "st3.toml"]).status.code(), Some(1));

    fs::write(d.join("stall.toml"), format!("{QD1}[solver]\nmax_sweeps = 3\n")).unwrap();
    assert_eq!(seqstop(d, &["solve", "--config", "stall.toml", "--out", "s"]).status.code(), Some(2));

    let mut table = String::from("pi_1,pi_2,g,h\n");
    for i in 0..11 {
        for j in 0..11 {
            let (x, y) = (i as f64 / 10.0, j as f64 / 10.0);
            table += &format!("{x},{y},{},0.2\n", x * x + y * y);
        }
    }
    fs::write(d.join("convex.csv"), table).unwrap();
    fs::write(d.join("convex.toml"), "[problem]\nkind = \"custom\"\nmu = [1.0, 1.0]\nc = 0.2\npenalty_table = \"convex.csv\"\n[grid]\nnodes = 21\n[sim]\nseed = 1\n").unwrap();
    let code = seqstop(d, &["verify", "--config", "convex.toml", "--out", "c"]).status.code().unwrap();
    assert!(code >= 3, "exit {code}");
    let manifest = json_without_run_info(&d.join("c/manifest.json"));
    assert_eq!(code as u64, 2 + manifest["failed"].as_u64().unwrap());

    assert_eq!(seqstop(d, &["solve"]).status.code(), Some(1));
}

#[test]
fn immediate_rule_returns_the_penalty() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), format!("{QD1}[simulate]\nrule = \"immediate\"\npriors = [[0.2, 0.7]]\n")).unwrap();
    let out = seqstop(dir.path(), &["simulate", "--config", "run.toml", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_without_run_info(&dir.path().join("o/estimate.json"));
    let e = &v["estimates"][0]["physical"];
    assert!((e["mean"].as_f64().unwrap() - 0.8 * 0.3).abs() < 1e-15);
    assert_eq!(e["std_error"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulate_rejects_a_mask_from_another_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), format!("{QD1}[simulate]\nmask = \"o/value.csv\"\n")).unwrap();
    assert!(seqstop(d, &["solve", "--config", "run.toml", "--out", "o"]).status.success());
    let out = seqstop(d, &["simulate", "--config", "run.toml", "--out", "o", "--grid", "21"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mismatch"));
    let out = seqstop(d, &["simulate", "--config", "run.toml", "--out", "o"]);
    assert!(out.status.success());
    let v = json_without_run_info(&d.join("o/estimate.json"));
    assert!(v["estimates"][0]["solver_value"].as_f64().is_some());
}

#[test]
fn report_merges_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), "[problem]\nkind = \"ST_1D\"\nmu = 1.0\nc = 0.2\n[sim]\nseed = 1\n").unwrap();
    assert!(seqstop(d, &["verify", "--config", "run.toml", "--out", "a"]).status.success());
    assert!(seqstop(d, &["verify", "--config", "run.toml", "--out", "b/c"]).status.success());
    assert!(seqstop(d, &["report", "a", "b", "--out", "r"]).status.success());
    let r = json_without_run_info(&d.join("r/report.json"));
    assert_eq!(r["manifests"].as_array().unwrap().len(), 2);
    assert_eq!(r["total_failed"], 0);
}
