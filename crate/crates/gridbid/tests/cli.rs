use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn gridbid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridbid")).args(args).env_remove("GRIDBID_BACKEND").output().unwrap()
}

fn run_one_bus(out: &Path) -> Output {
    gridbid(&[
        "run",
        "--case",
        data("one_bus.json").to_str().unwrap(),
        "--scenarios",
        data("one_bus_scenarios.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

/// Summary CSV with the timing columns removed.
fn costs_only(path: &Path) -> String {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    let keep: Vec<usize> = headers.iter().enumerate().filter(|(_, h)| !h.ends_with("_seconds")).map(|(i, _)| i).collect();
    r.records().map(|rec| keep.iter().map(|&i| rec.as_ref().unwrap()[i].to_string()).collect::<Vec<_>>().join(",") + "\n").collect()
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_one_bus(dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("MyD") && stdout.contains("BiD-KKT"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for f in ["myd_settlement.json", "myd_settlement.csv", "bidkkt_result.json", "summary.csv"] {
        assert!(files.contains(&f), "{f} missing from {files:?}");
        assert!(dir.path().join(f).exists());
    }
    assert_eq!(manifest["spec"]["methods"][0], "myd");
    let summary = costs_only(&dir.path().join("summary.csv"));
    assert!(summary.starts_with("MyD,550"), "{summary}");
}

#[test]
fn repeated_runs_are_identical_apart_from_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_one_bus(a.path()).status.success());
    assert!(run_one_bus(b.path()).status.success());
    assert_eq!(costs_only(&a.path().join("summary.csv")), costs_only(&b.path().join("summary.csv")));
    for f in ["myd_settlement.json", "myd_settlement.csv", "bidmccormick_settlement.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn generated_scenarios_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridbid(&[
        "sweep",
        "gamma",
        "--case",
        data("three_bus.json").to_str().unwrap(),
        "--gen",
        "seed=4,count=6,mean=0.5,std=0.2",
        "--from",
        "0.4",
        "--to",
        "1.2",
        "--step",
        "0.4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(dir.path().join("gamma_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);
    let plot = fs::read_to_string(dir.path().join("plot_cost.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 3 * 4);
    assert!(plot.lines().nth(1).unwrap().starts_with("0.4,StD,"));
}

#[test]
fn bad_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"schema_version\": 1}").unwrap();
    let out = gridbid(&["run", "--case", bad.to_str().unwrap(), "--gen", "seed=1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = gridbid(&["run", "--case", data("one_bus.json").to_str().unwrap(), "--gen", "colour=red", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = gridbid(&["run", "--case", data("one_bus.json").to_str().unwrap(), "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_market_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridbid(&[
        "run",
        "--case",
        data("infeasible.json").to_str().unwrap(),
        "--gen",
        "seed=1,count=3",
        "--method",
        "myd",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("infeasible"));
}

#[test]
fn oracle_command_reports_the_best_offer() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridbid(&[
        "oracle",
        "--case",
        data("one_bus.json").to_str().unwrap(),
        "--scenarios",
        data("one_bus_scenarios.json").to_str().unwrap(),
        "--grid-step",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let res: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert!((res["cost"].as_f64().unwrap() - 500.0).abs() < 1e-6);
}

#[test]
fn generate_scenarios_writes_a_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sc.json");
    let out = gridbid(&["generate", "scenarios", "--case", data("three_bus.json").to_str().unwrap(), "--gen", "seed=9,count=5", "--out", p.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(gridbid::io::load_scenarios(&p).unwrap().len(), 5);
}
