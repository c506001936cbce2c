use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn vset(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vset"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = vset(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(dir: &Path, args: &[&str]) -> Value {
    serde_json::from_str(&ok(dir, args)).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["dict", "gen", "--dim", "120", "--size", "3000", "--seed", "4", "-o", "d.bin"]);
    dir
}

#[test]
fn dictionary_commands() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["dict", "gen", "--dim", "8", "--size", "30", "--format", "text", "-o", "small.txt"]);
    let info = json(d, &["dict", "info", "small.txt"]);
    assert_eq!((info["dim"].as_u64(), info["size"].as_u64()), (Some(8), Some(30)));
    ok(d, &["dict", "cache", "small.txt", "small.bin"]);
    let loaded = json(d, &["dict", "load", "small.bin"]);
    assert_eq!(loaded["size"], 30);
    assert_eq!(loaded["first_tokens"][0], "w000000");
    assert_eq!(vset(d, &["dict", "info", "missing.bin"]).status.code(), Some(1));
    write(d, "bad.txt", "2 3\na 1 2\n");
    assert_eq!(vset(d, &["dict", "info", "bad.txt"]).status.code(), Some(2));
}

#[test]
fn encode_decode_round_trip() {
    let dir = setup();
    let d = dir.path();
    write(
        d,
        "m.json",
        r#"{"interpretation": "multiset", "entries": {"w000004": 2, "w000100": 1, "w002000": 3}}"#,
    );
    ok(d, &["encode", "--dict", "d.bin", "m.json", "--normalize", "-o", "y.json"]);
    let y: Value = serde_json::from_str(&fs::read_to_string(d.join("y.json")).unwrap()).unwrap();
    assert!(y["scale"].as_f64().unwrap() > 1.0);
    let dec = json(d, &["decode", "--dict", "d.bin", "y.json", "-i", "multiset"]);
    assert_eq!(dec["exact"], true);
    assert_eq!(dec["map"]["entries"]["w002000"], 3.0);
    assert_eq!(dec["map"]["entries"].as_object().unwrap().len(), 3);
    let raw = json(d, &["decode", "--dict", "d.bin", "y.json"]);
    assert_eq!(raw["support"].as_array().unwrap().len(), 3);
    assert!(raw["residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(vset(d, &["encode", "--dict", "d.bin", "m.json", "--limit", "2"]).status.code(), Some(2));
}

#[test]
fn validation_and_numerical_exit_codes() {
    let dir = setup();
    let d = dir.path();
    write(d, "u.json", r#"{"interpretation": "set", "entries": {"nope": 1}}"#);
    assert_eq!(vset(d, &["encode", "--dict", "d.bin", "u.json"]).status.code(), Some(2));
    write(d, "f.json", r#"{"interpretation": "fuzzy", "entries": {"w000001": 1.5}}"#);
    assert_eq!(vset(d, &["encode", "--dict", "d.bin", "f.json"]).status.code(), Some(2));
    assert_eq!(vset(d, &["setop", "bogus", "f.json"]).status.code(), Some(2));
    assert_eq!(vset(d, &["encode", "--dict", "d.bin"]).status.code(), Some(2));

    let entries: Vec<String> = (0..60).step_by(2).map(|i| format!("\"w{i:06}\": {}", 1.0 + 0.01 * i as f64)).collect();
    write(d, "big.json", &format!(r#"{{"interpretation": "raw", "entries": {{{}}}}}"#, entries.join(",")));
    ok(d, &["encode", "--dict", "d.bin", "big.json", "-o", "big_y.json"]);
    write(d, "cfg.json", r#"{"max_cd_iters": 1}"#);
    let out = vset(d, &["decode", "--dict", "d.bin", "big_y.json", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    write(d, "badcfg.json", r#"{"grid_min_ratio": 2.0}"#);
    assert_eq!(
        vset(d, &["decode", "--dict", "d.bin", "big_y.json", "--config", "badcfg.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn set_operations() {
    let dir = setup();
    let d = dir.path();
    write(d, "a.json", r#"{"interpretation": "set", "entries": {"w000001": 1, "w000002": 1}}"#);
    write(d, "b.json", r#"{"interpretation": "set", "entries": {"w000002": 1, "w000003": 1}}"#);
    let u = json(d, &["setop", "union", "a.json", "b.json"]);
    assert_eq!(u["entries"].as_object().unwrap().len(), 3);
    let i = json(d, &["setop", "intersect", "a.json", "b.json"]);
    assert_eq!(i["entries"].as_object().unwrap().keys().collect::<Vec<_>>(), ["w000002"]);
    let n = json(d, &["setop", "negate", "a.json", "--dict", "d.bin"]);
    assert_eq!(n["entries"].as_object().unwrap().len(), 2998);
    let top = json(d, &["setop", "top", "--dict", "d.bin"]);
    assert_eq!(top["entries"].as_object().unwrap().len(), 3000);
    write(d, "p.json", r#"{"interpretation": "probability", "entries": {"w000001": 0.5, "w000002": 0.5}}"#);
    write(d, "q.json", r#"{"interpretation": "probability", "entries": {"w000002": 0.25, "w000003": 0.75}}"#);
    let pand = json(d, &["setop", "prob_and", "p.json", "q.json"]);
    assert_eq!(pand["entries"]["w000002"], 1.0);
    write(d, "r.json", r#"{"interpretation": "probability", "entries": {"w000009": 1.0}}"#);
    assert_eq!(vset(d, &["setop", "prob_and", "p.json", "r.json"]).status.code(), Some(2));
}

#[test]
fn venn_and_order() {
    let dir = setup();
    let d = dir.path();
    write(d, "a.json", r#"{"interpretation": "set", "entries": {"w000010": 1, "w000011": 1}}"#);
    write(d, "b.json", r#"{"interpretation": "set", "entries": {"w000011": 1, "w000012": 1}}"#);
    write(d, "c.json", r#"{"interpretation": "set", "entries": {"w000011": 1, "w000013": 1}}"#);
    ok(d, &["venn", "encode", "--dict", "d.bin", "a.json", "b.json", "c.json", "-o", "v.json"]);
    let v = json(d, &["venn", "decode", "--dict", "d.bin", "v.json"]);
    let regions = v["regions"].as_array().unwrap();
    let all = regions.iter().find(|r| r["sets"].as_array().unwrap().len() == 3).unwrap();
    assert_eq!(all["tokens"][0], "w000011");
    assert_eq!(regions.len(), 4);

    ok(d, &["order", "encode", "--dict", "d.bin", "w000500", "w000007", "w000042", "-o", "o.json"]);
    let seq = json(d, &["order", "decode", "--dict", "d.bin", "o.json"]);
    assert_eq!(seq, serde_json::json!(["w000500", "w000007", "w000042"]));
    assert_eq!(
        vset(d, &["order", "encode", "--dict", "d.bin", "w000001", "w000001"]).status.code(),
        Some(2)
    );
}

#[test]
fn simplex_commands() {
    let dir = setup();
    let d = dir.path();
    write(d, "class.json", r#"{"label": "c", "members": ["w000001", "w000002", "w000003"]}"#);
    let p = json(d, &["simplex", "project", "--dict", "d.bin", "--class", "class.json", "--token", "w000002"]);
    assert!(p["distance"].as_f64().unwrap() < 1e-12);
    assert!(p["kkt_gap"].as_f64().unwrap() <= 1e-8);
    let s = json(d, &["simplex", "score", "--dict", "d.bin", "--class", "class.json", "--token", "w000900"]);
    assert!(s["dist_simplex"].as_f64().unwrap() <= s["dist_centroid"].as_f64().unwrap());
    write(
        d,
        "classes.json",
        r#"[{"label": "c", "members": ["w000001", "w000002", "w000003"]},
            {"label": "e", "members": ["w000004", "w000005"]}]"#,
    );
    let csv = ok(d, &["simplex", "loo", "--dict", "d.bin", "--class", "classes.json"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "label,member,dist_simplex,dist_centroid");
    assert_eq!(lines.len(), 1 + 5);
    assert_eq!(
        vset(d, &["simplex", "project", "--dict", "d.bin", "--class", "classes.json", "--token", "w000002"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn reasoning_commands() {
    let dir = setup();
    let d = dir.path();
    write(
        d,
        "facts.json",
        r#"[{"id": "ab", "premise": ["w000001"], "conclusion": ["w000002"]},
            {"id": "bc", "premise": ["w000002"], "conclusion": ["w000003"]},
            {"id": "xy", "premise": ["w000007"], "conclusion": ["w000008"]},
            {"id": "cd", "premise": ["w000003"], "conclusion": ["w000004"]}]"#,
    );
    let chain = json(
        d,
        &["reason", "chain", "--dict", "d.bin", "--facts", "facts.json", "--premise", "w000001", "--conclusion", "w000004"],
    );
    let mut ids: Vec<String> = chain["support"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            assert!((e["weight"].as_f64().unwrap() - 1.0).abs() < 1e-6);
            e["token"].as_str().unwrap().to_string()
        })
        .collect();
    ids.sort();
    assert_eq!(ids, ["ab", "bc", "cd"]);

    let a = json(
        d,
        &["reason", "analogy", "--dict", "d.bin", "--base", "w000010", "--minus", "w000011", "--plus", "w000012", "-k", "3"],
    );
    assert_eq!(a["method"], "decompose");
    assert_eq!(a["ranked"][0][0], "w000010");

    write(d, "recipe.json", r#"{"op": "apply", "to": {"op": "token", "token": "w000020"}, "relation": "r"}"#);
    write(d, "rels.json", r#"[{"name": "r", "pairs": [["w000030", "w000031"], ["w000032", "w000033"]]}]"#);
    ok(
        d,
        &["reason", "define", "--dict", "d.bin", "--name", "newterm", "--recipe", "recipe.json", "--relations", "rels.json", "-o", "d2.bin"],
    );
    let info = json(d, &["dict", "info", "d2.bin"]);
    assert_eq!(info["size"], 3001);
    write(d, "bad_recipe.json", r#"{"op": "relation", "name": "missing"}"#);
    assert_eq!(
        vset(d, &["reason", "define", "--dict", "d.bin", "--name", "t", "--recipe", "bad_recipe.json", "-o", "d3.bin"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn experiment_run_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "spec.json",
        r#"{"kind": "baseline_table", "dictionary": {"kind": "synthetic_gaussian", "seed": 1},
            "dims": [40], "sizes": [500], "ks": [1, 2, 4], "trials": 3, "seed": 5}"#,
    );
    let summary = ok(d, &["experiment", "run", "spec.json", "--dir", "out", "-q"]);
    assert!(summary.starts_with("method,series,n,N,sigma,max_k_50"));
    assert_eq!(summary.lines().count(), 1 + 3);
    let cells = fs::read_to_string(d.join("out/cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 3 * 3);
    for f in ["summary.csv", "curves.svg", "report.json"] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
    ok(d, &["report", "render", "out/report.json", "--dir", "again", "--formats", "csv,svg"]);
    assert_eq!(fs::read_to_string(d.join("again/cells.csv")).unwrap(), cells);
    ok(d, &["experiment", "run", "spec.json", "--dir", "rerun", "-q", "--formats", "csv"]);
    assert_eq!(fs::read_to_string(d.join("rerun/cells.csv")).unwrap(), cells);

    write(d, "bad.json", r#"{"kind": "recovery_curve", "dictionary": {"kind": "synthetic_gaussian"}, "dims": [10], "sizes": [50], "ks": [], "trials": 1}"#);
    assert_eq!(vset(d, &["experiment", "run", "bad.json", "-q"]).status.code(), Some(2));
    assert_eq!(vset(d, &["experiment", "run", "spec.json", "--formats", "pdf"]).status.code(), Some(2));
}
