use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jumpdensity"));
    c.env_remove("JUMPDENSITY_SEED");
    c
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

const TWO: &str = r#"{"vertices":["a","b"],"edges":[{"u":"a","v":"b","w":1.0}]}"#;
const TRIANGLE: &str =
    r#"{"vertices":["a","b","c"],"edges":[{"u":"a","v":"b","w":1.0},{"u":"b","v":"c","w":2.0},{"u":"a","v":"c","w":0.5}]}"#;

struct Prop1Case {
    dir: TempDir,
    graph: PathBuf,
    target: PathBuf,
    cell: PathBuf,
}

fn prop1_case() -> Prop1Case {
    let dir = TempDir::new().unwrap();
    let graph = write(dir.path(), "g.json", TWO);
    let target = write(
        dir.path(),
        "t.json",
        r#"{"start":"a","end":"b","sigma":2.0,"counts":{"a->b":1},"tree":{"root":"b","edges":[["a","b"]]}}"#,
    );
    let cell = write(dir.path(), "c.json", r#"{"dependent":"b","bounds":{"a":[0.5,1.2]}}"#);
    Prop1Case { dir, graph, target, cell }
}

fn verify_prop1(case: &Prop1Case, extra: &[&str]) -> Command {
    let mut c = bin();
    c.arg("verify-prop1")
        .arg("--graph")
        .arg(&case.graph)
        .arg("--target")
        .arg(&case.target)
        .arg("--cell")
        .arg(&case.cell)
        .args(["-n", "100000", "--seed", "11"])
        .args(extra);
    c
}

#[test]
fn prop1_two_vertex_passes() {
    let case = prop1_case();
    let out = run(&mut verify_prop1(&case, &[]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["check"], "verify-prop1");
    assert_eq!(v["pass"], true);
    // W e^{-W sigma} over a cell of width 0.7
    let theory = v["reports"][0]["theory_prob"].as_f64().unwrap();
    assert!((theory - 0.7 * (-2.0f64).exp()).abs() < 1e-12);
}

#[test]
fn scaled_density_fails_with_exit_one() {
    let case = prop1_case();
    let csv = case.dir.path().join("rows.csv");
    let out = run(verify_prop1(&case, &["--density-scale", "1.1", "--csv"]).arg(&csv));
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], false);
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(rows.starts_with("check,seed,cell,n_paths"));
    assert!(rows.lines().nth(1).unwrap().ends_with(",false"));
}

#[test]
fn report_is_reproducible_across_thread_counts() {
    let case = prop1_case();
    let a = run(&mut verify_prop1(&case, &[]));
    let b = run(verify_prop1(&case, &[]).args(["--threads", "2"]));
    assert_eq!(a.stdout, b.stdout);
    let report = case.dir.path().join("r.json");
    run(verify_prop1(&case, &["--report"]).arg(&report));
    assert_eq!(fs::read(&report).unwrap(), a.stdout);
}

#[test]
fn seed_from_environment() {
    let case = prop1_case();
    let mut c = bin();
    c.arg("verify-prop1")
        .arg("--graph")
        .arg(&case.graph)
        .arg("--target")
        .arg(&case.target)
        .arg("--cell")
        .arg(&case.cell)
        .args(["-n", "100000"]);
    let missing = run(&mut c);
    assert_eq!(missing.status.code(), Some(2));
    let from_env = run(c.env("JUMPDENSITY_SEED", "11"));
    assert_eq!(from_env.stdout, run(&mut verify_prop1(&case, &[])).stdout);
}

#[test]
fn malformed_graph_exits_two() {
    let dir = TempDir::new().unwrap();
    let g = write(
        dir.path(),
        "g.json",
        r#"{"vertices":["a","b"],"edges":[{"u":"a","v":"b","w":1.0},{"u":"b","v":"a","w":2.0}]}"#,
    );
    let out = run(bin().args(["trees", "--root", "a", "--graph"]).arg(&g));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DuplicateEdge"));

    let g = write(dir.path(), "h.json", r#"{"vertices":["a","b"],"edges":[{"u":"a","v":"b","w":-1.0}]}"#);
    let out = run(bin().args(["trees", "--root", "a", "--graph"]).arg(&g));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NonPositiveWeight"));

    let g = write(dir.path(), "i.json", "{\"vertices\": [\"a\"");
    assert_eq!(run(bin().args(["trees", "--root", "a", "--graph"]).arg(&g)).status.code(), Some(2));
}

#[test]
fn invalid_target_exits_two() {
    let case = prop1_case();
    // counts with divergence zero cannot end away from the start
    write(
        case.dir.path(),
        "t.json",
        r#"{"start":"a","end":"b","sigma":2.0,"counts":{"a->b":1,"b->a":1},"tree":{"root":"b","edges":[["a","b"]]}}"#,
    );
    let out = run(&mut verify_prop1(&case, &[]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InvalidTarget"));

    write(case.dir.path(), "t.json", r#"{"start":"a","sigma":2.0}"#);
    let out = run(&mut verify_prop1(&case, &[]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MissingField"));
}

#[test]
fn simulate_then_stats() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "g.json", TRIANGLE);
    let paths = dir.path().join("paths.jsonl");
    let stats = dir.path().join("stats.jsonl");
    let out = run(bin()
        .args(["simulate", "--start", "a", "--sigma", "3", "--seed", "5", "-n", "50", "--graph"])
        .arg(&g)
        .arg("--out")
        .arg(&paths));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(bin().arg("stats").arg("--graph").arg(&g).arg("--in").arg(&paths).arg("--out").arg(&stats));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<Value> =
        fs::read_to_string(&stats).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 50);
    for rec in &lines {
        let total: f64 = rec["ell"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((total - 3.0).abs() < 1e-12);
        assert_eq!(rec["tree"]["root"], rec["end"]);
    }

    let ilt = run(bin()
        .args(["simulate", "--start", "a", "--inverse-local-time", "b:1.5", "--seed", "5", "-n", "20", "--graph"])
        .arg(&g)
        .arg("--out")
        .arg(&paths));
    assert!(ilt.status.success());
    let both = run(bin()
        .args(["simulate", "--start", "a", "--sigma", "1", "--inverse-local-time", "b:1.5", "--seed", "5", "-n", "2"])
        .arg("--graph")
        .arg(&g)
        .arg("--out")
        .arg(&paths));
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn density_modes_agree() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "g.json", TWO);
    let o = write(
        dir.path(),
        "o.json",
        r#"{"start":"a","end":"a","ell":{"a":0.7,"b":1.3},"tree":{"root":"a","edges":[["b","a"]]},"current":{}}"#,
    );
    let eval = |mode: &str| -> f64 {
        let out = run(bin().args(["density", "--mode", mode, "--graph"]).arg(&g).arg("--outcome").arg(&o));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["density"].as_f64().unwrap()
    };
    let (thm1, sum) = (eval("thm1"), eval("sum"));
    assert!(thm1 > 0.0);
    assert!((thm1 - sum).abs() < 1e-12 * thm1);
}

#[test]
fn bessel_and_trees() {
    let out = run(bin().args(["bessel", "--nu", "-1", "--z", "1"]));
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((v - 0.5651591039924851).abs() < 1e-15);
    assert_eq!(run(bin().args(["bessel", "--nu", "1", "--z", "-1"])).status.code(), Some(2));

    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "g.json", TRIANGLE);
    let out = run(bin().args(["trees", "--root", "c", "--enumerate", "--graph"]).arg(&g));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // 1*2 + 2*0.5 + 1*0.5
    assert!((v["weighted_sum"].as_f64().unwrap() - 3.5).abs() < 1e-12);
    assert_eq!(v["trees"].as_array().unwrap().len(), 3);
}

#[test]
fn wilson_two_vertex() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "g.json", TWO);
    let k = write(dir.path(), "k.json", r#"{"a":0.5,"b":1.5}"#);
    let samples = dir.path().join("w.jsonl");
    let out = run(bin()
        .args(["wilson", "--order", "a,b", "--compare-order", "b,a", "--seed", "3", "-n", "20000", "--graph"])
        .arg(&g)
        .arg("--kappa")
        .arg(&k)
        .arg("--out")
        .arg(&samples));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["zero_divergence"], true);
    assert_eq!(v["tree_law"]["pass"], true);
    assert_eq!(v["order_independence"]["pass"], true);
    assert_eq!(fs::read_to_string(&samples).unwrap().lines().count(), 20000);
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "simulate",
        "stats",
        "density",
        "bessel",
        "trees",
        "verify-thm1",
        "verify-prop1",
        "verify-ray-knight",
        "verify-total-mass",
        "marginal",
        "wilson",
    ] {
        let out = run(bin().args([sub, "--help"]));
        assert!(out.status.success(), "{sub}");
        assert!(!out.stdout.is_empty());
    }
}
