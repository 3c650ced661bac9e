//! End-to-end checks of the `corrbench` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use corrbench::cli::RunManifest;
use corrbench::BooleanFunction;
use serde_json::Value;

fn corrbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrbench")).args(args).env_remove("CORRBENCH_SEED").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn store(dir: &Path, name: &str, f: &BooleanFunction) -> String {
    let p = dir.join(name);
    f.store(&p).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn sibling(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.to_path_buf().into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

#[test]
fn analyze_and2_against_dictator() {
    let dir = tempfile::tempdir().unwrap();
    let f = store(dir.path(), "and2.json", &BooleanFunction::and(2).unwrap());
    let g = store(dir.path(), "d1.json", &BooleanFunction::dictator(2, 0).unwrap());
    let o = corrbench(&["analyze", "--f", &f, "--g", &g, "--normalization", "std"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["cor"], "1/8");
    assert_eq!(v["chvatal"]["ratio"], 1.0);
    assert_eq!(v["chvatal"]["holds"], true);
}

#[test]
fn enumerate_counts() {
    let o = corrbench(&["enumerate", "--n", "4", "--count-only"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "168\n");
    let o = corrbench(&["enumerate", "--n", "3", "--antipodal"]);
    assert_eq!(code(&o), 0);
    let lines: Vec<BooleanFunction> =
        String::from_utf8_lossy(&o.stdout).lines().map(|l| BooleanFunction::from_json(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|f| f.is_monotone() && f.is_antipodal()));
}

#[test]
fn usage_errors_exit_3() {
    let o = corrbench(&["scan", "--n", "9"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("limit"));
    assert_eq!(code(&corrbench(&["frobnicate"])), 3);
    assert_eq!(code(&corrbench(&["scan"])), 3);
    assert_eq!(code(&corrbench(&["levelcheck", "--suite", "lvl99"])), 3);
    assert_eq!(code(&corrbench(&["--help"])), 0);
    assert_eq!(code(&corrbench(&["--version"])), 0);
}

#[test]
fn malformed_inputs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"variant":"halfspace","theta":[1,"x"],"a":0}"#, "theta[1]"),
        (r#"{"variant":"halfspace","theta":[1]}"#, "`a`"),
        (r#"{"variant":"sign","boolean":{"n":2,"table_hex":"zz"}}"#, "table_hex"),
        (r#"{"variant":"ou","t":1,"base":{"variant":"halfspace","theta":[1],"a":"q"}}"#, "base.a"),
        (r#"{"variant":"cone"}"#, "variant"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let p = path(dir.path(), &format!("bad{i}.json"));
        std::fs::write(&p, text).unwrap();
        let o = corrbench(&["gaussian", "--f", p.to_str().unwrap()]);
        assert_eq!(code(&o), 3, "{text}");
        assert!(stderr(&o).contains(field), "{text}: {}", stderr(&o));
    }
    let p = path(dir.path(), "badfn.json");
    std::fs::write(&p, r#"{"n":2,"table_hex":5}"#).unwrap();
    let o = corrbench(&["analyze", "--f", p.to_str().unwrap(), "--g", p.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("table_hex"));
    let o = Command::new(env!("CARGO_BIN_EXE_corrbench"))
        .args(["enumerate", "--n", "2", "--count-only"])
        .env("CORRBENCH_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("CORRBENCH_SEED"));
}

#[test]
fn simulate_writes_curves_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let maj = store(dir.path(), "maj3.json", &BooleanFunction::majority(3).unwrap());
    let spec = format!("sign:{maj}");
    let out = path(dir.path(), "curves.csv");
    let o = corrbench(&[
        "simulate", "--f", &spec, "--g", &spec, "--grid", "0:1:0.25", "--paths", "4000", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(code(&o) == 0 || code(&o) == 2, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,k,estimate,se"));
    assert_eq!(lines.count(), 5 * 5);
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(sibling(&out, ".manifest.json")).unwrap()).unwrap();
    assert_eq!(m.subcommand, "simulate");
    assert_eq!(m.seed, 7);
    assert_eq!(m.params["paths"], 4000);
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].sha256, corrbench::cli::manifest::sha256_hex(text.as_bytes()));
    assert!(m.finished_at >= m.started_at);

    let o = corrbench(&["simulate", "--f", &spec, "--g", &spec, "--grid", "0:1:0.5", "--paths", "500", "--format", "plotdata"]);
    let plot = String::from_utf8_lossy(&o.stdout);
    assert!(plot.starts_with("# p0 x y yerr"));
    assert!(plot.lines().filter(|l| !l.is_empty() && !l.starts_with('#')).all(|l| l.split(' ').count() == 3));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "g.json");
    let o = Command::new(env!("CARGO_BIN_EXE_corrbench"))
        .args(["gronwall", "--sweep", "corners", "--dt", "1e-3", "--perturbations", "10", "--out", out.to_str().unwrap()])
        .env("CORRBENCH_SEED", "41")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["seed"], 41);
}

#[test]
fn underpowered_simulation_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let d = store(dir.path(), "d1.json", &BooleanFunction::dictator(1, 0).unwrap());
    let spec = format!("sign:{d}");
    let o = corrbench(&["simulate", "--f", &spec, "--g", &spec, "--paths", "20", "--format", "json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "inconclusive");
}

#[test]
fn reports_round_trip_and_failures_leave_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let scan = path(dir.path(), "scan.json");
    assert_eq!(code(&corrbench(&["scan", "--n", "3", "--out", scan.to_str().unwrap()])), 0);
    let level = path(dir.path(), "level.json");
    let o = corrbench(&["levelcheck", "--suite", "geom", "--cases", "50", "--seed", "3", "--out", level.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = path(dir.path(), "summary.json");
    let scan_manifest = sibling(&scan, ".manifest.json");
    let o = corrbench(&[
        "report",
        scan.to_str().unwrap(),
        level.to_str().unwrap(),
        scan_manifest.to_str().unwrap(),
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["counts"]["pass"], 3);
    assert!(v["entries"].as_array().unwrap().iter().all(|e| e["round_trip"] == true));

    // a manifest recording a failed run makes the summary fail
    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(&scan_manifest).unwrap()).unwrap();
    m["exit_code"] = 1.into();
    let failed = path(dir.path(), "failed.manifest.json");
    std::fs::write(&failed, serde_json::to_vec(&m).unwrap()).unwrap();
    let out = path(dir.path(), "summary2.json");
    let o = corrbench(&["report", failed.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let bundle: Value = serde_json::from_str(&std::fs::read_to_string(sibling(&out, ".repro.json")).unwrap()).unwrap();
    assert_eq!(bundle["manifest"]["subcommand"], "report");
    assert_eq!(bundle["failures"][0]["verdict"], "fail");

    // tampered reports are rejected as malformed
    let mut s: Value = serde_json::from_str(&std::fs::read_to_string(&scan).unwrap()).unwrap();
    s["counts"]["pairs_examined"] = "many".into();
    std::fs::write(&scan, serde_json::to_vec(&s).unwrap()).unwrap();
    assert_eq!(code(&corrbench(&["report", scan.to_str().unwrap()])), 3);
}

#[test]
fn scan_dump_pairs_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let dump = path(dir.path(), "pairs.csv");
    let out = path(dir.path(), "minima.csv");
    let o = corrbench(&["scan", "--n", "2", "--dump-pairs", dump.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&dump).unwrap().lines().count(), 1 + 36);
    let minima = std::fs::read_to_string(&out).unwrap();
    assert!(minima.starts_with("inequality,ratio,f_hex,g_hex\n"));
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(sibling(&out, ".manifest.json")).unwrap()).unwrap();
    assert_eq!(m.outputs.len(), 2);
    assert_eq!(code(&corrbench(&["scan", "--n", "4", "--dump-pairs", dump.to_str().unwrap()])), 3);
}

#[test]
fn gaussian_and_bridge() {
    let dir = tempfile::tempdir().unwrap();
    let h = path(dir.path(), "h.json");
    std::fs::write(&h, r#"{"variant":"halfspace","theta":[0.6,0.8],"a":0.3}"#).unwrap();
    let o = corrbench(&["gaussian", "--f", h.to_str().unwrap(), "--t", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["quadrature_max_diff"].as_f64().unwrap() < 1e-8);
    let o = corrbench(&["gaussian", "--bridge", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["functions"], 20);
    assert_eq!(v["uniform"]["m2"], true);
}

#[test]
fn search_and_gronwall_csv() {
    let o = corrbench(&["search", "--n", "3", "--objective", "kms", "--iterations", "500", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["minima"]["kms"]["ratio"].as_f64().unwrap() > 0.0);
    let o = corrbench(&["gronwall", "--sweep", "corners", "--dt", "1e-3", "--perturbations", "20", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("k,p0,dp0,provenance,omega,status,"));
}
