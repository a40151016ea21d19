use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrs_core::fixtures;
use hrs_core::serialize_instance;
use serde_json::Value;
use tempfile::TempDir;

fn hrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrs"))
        .args(args)
        .env_remove("HRS_MAX_NODES")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, body: &str) -> String {
        let p = self.0.path().join(name);
        fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn fig1(&self) -> String {
        self.file("fig1.hrs", &serialize_instance(&fixtures::no_stable_matching()))
    }

    fn fig5(&self) -> String {
        self.file("fig5.hrs", &serialize_instance(&fixtures::ratio_gap()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_ratio_gap_instance() {
    let d = Dir::new();
    let out = hrs(&["solve", &d.fig5(), "--ordering", "size-desc"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["size"], 3);
    assert_eq!(v["matched"]["a1"], "h1");
}

#[test]
fn solve_writes_trace_only_when_asked() {
    let d = Dir::new();
    let fig1 = d.fig1();
    let before: Vec<_> = fs::read_dir(d.0.path()).unwrap().collect();
    assert_eq!(code(&hrs(&["solve", &fig1])), 0);
    assert_eq!(fs::read_dir(d.0.path()).unwrap().count(), before.len());

    let trace = d.path("trace.json");
    assert_eq!(code(&hrs(&["solve", &fig1, "--trace", s(&trace)])), 0);
    let t: Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(t["rounds"].as_array().unwrap().len(), 2);
    assert_eq!(t["rounds"][1]["residual"]["h1"], 1);
}

#[test]
fn solve_orderings() {
    let d = Dir::new();
    let demo = d.file("demo.hrs", &serialize_instance(&fixtures::gen_master_list_demo()));
    let out = hrs(&["solve", &demo, "--ordering", "detect"]);
    assert_eq!(code(&out), 0);
    let classes = &stdout_json(&out)["partition"]["classes"];
    assert_eq!(classes[0], serde_json::json!(["a1", "a2"]));

    assert_eq!(code(&hrs(&["solve", &d.fig1(), "--ordering", "detect"])), 1);
    assert_eq!(code(&hrs(&["solve", &d.fig1(), "--ordering", "sideways"])), 2);

    let order = d.file("order.txt", "a3\na1 a2\n");
    let out = hrs(&["solve", &d.fig1(), "--ordering", &format!("file:{order}")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bad = d.file("bad.txt", "a3\na1\n");
    assert_eq!(code(&hrs(&["solve", &d.fig1(), "--ordering", &format!("file:{bad}")])), 4);
}

#[test]
fn verify_notions() {
    let d = Dir::new();
    let fig1 = d.fig1();
    let n = d.file("n.json", r#"{"matched": {"a1": "h1", "a3": "h2"}}"#);
    assert_eq!(code(&hrs(&["verify", &fig1, "--matching", &n, "--notion", "occupancy"])), 0);

    let out = hrs(&["verify", &fig1, "--matching", &n, "--notion", "stable"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["holds"], false);
    assert_eq!(v["witnesses"][0]["agent"], "a2");
    assert_eq!(v["witnesses"][0]["hospital"], "h2");
    assert_eq!(v["witnesses"][0]["displaced"], serde_json::json!(["a3"]));

    assert_eq!(code(&hrs(&["verify", &fig1, "--matching", &n, "--notion", "a-perfect"])), 1);

    let over = d.file("over.json", r#"{"matched": {"a1": "h2", "a2": "h2", "a3": "h2"}}"#);
    let out = hrs(&["verify", &fig1, "--matching", &over]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["feasible"], false);
}

#[test]
fn oracle_queries() {
    let d = Dir::new();
    let fig1 = d.fig1();
    let out = hrs(&["oracle", &fig1, "--query", "stable"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["count"], 0);
    assert_eq!(v["verdict"], "complete");

    let out = hrs(&["oracle", &d.fig5(), "--query", "max-occ"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["value"], 7);

    assert_eq!(code(&hrs(&["oracle", &fig1, "--query", "a-perfect"])), 1);
    assert_eq!(code(&hrs(&["oracle", &fig1, "--query", "occ-stable", "--max-nodes", "2"])), 3);

    let out = Command::new(env!("CARGO_BIN_EXE_hrs"))
        .args(["oracle", &fig1, "--query", "occ-stable"])
        .env("HRS_MAX_NODES", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);

    let out = hrs(&["oracle", &fig1, "--query", "occ-stable", "--strategy", "decompose", "--interface", "h2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let plain = stdout_json(&hrs(&["oracle", &fig1, "--query", "occ-stable"]));
    assert_eq!(stdout_json(&out)["count"], plain["count"]);

    assert_eq!(code(&hrs(&["oracle", &fig1, "--query", "stable", "--interface", "h9", "--strategy", "decompose"])), 2);
}

#[test]
fn input_errors_exit_4() {
    let d = Dir::new();
    let broken = d.file("broken.hrs", "hrs v1\nagents:\na a1 0 : h1\n");
    let out = hrs(&["solve", &broken]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
    assert_eq!(code(&hrs(&["solve", "/nonexistent/x.hrs"])), 4);
    assert_eq!(code(&hrs(&["frobnicate"])), 2);
    assert_eq!(code(&hrs(&["solve", "--help"])), 0);
}

#[test]
fn reduce_and_gen() {
    let d = Dir::new();
    let out = hrs(&["gen", "--family", "csmti", "--n", "3", "--tied", "1", "--seed", "5"]);
    assert_eq!(code(&out), 0);
    let smti = d.file("x.smti", &String::from_utf8(out.stdout).unwrap());

    let hrs_path = d.path("x.hrs");
    let index = d.path("x.json");
    let out = hrs(&["reduce", &smti, "--target", "occ", "--out", s(&hrs_path), "--index", s(&index)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&hrs_path).unwrap();
    assert!(hrs_core::parse_instance(&text).is_ok());
    let idx: Value = serde_json::from_str(&fs::read_to_string(&index).unwrap()).unwrap();
    assert_eq!(idx["target"], "occ");

    let out = hrs(&["reduce", &smti, "--target", "stable"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("hrs v1"));

    assert_eq!(code(&hrs(&["gen", "--family", "csmti", "--n", "2", "--tied", "1"])), 2);
    let a = hrs(&["gen", "--family", "gen-ml", "--seed", "9", "--agents", "8"]);
    let b = hrs(&["gen", "--family", "gen-ml", "--seed", "9", "--agents", "8"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bench_ratio_report() {
    let d = Dir::new();
    let csv = d.path("r.csv");
    let out = hrs(&["bench", "ratio", "--trials", "20", "--seed", "1", "--out", s(&csv)]);
    assert_eq!(code(&out), 0);
    let body = fs::read_to_string(&csv).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("seed,m,n_agents,sM,sMstar,ratio,verdict"));
    assert!(lines.next().unwrap().starts_with("pinned,"));
    assert_eq!(body.lines().count(), 22);
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.path("r.json")).unwrap()).unwrap();
    assert_eq!(summary, stdout_json(&out));
    assert_eq!(summary["violations"], 0);

    let again = hrs(&["bench", "ratio", "--trials", "20", "--seed", "1", "--jobs", "3"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), body);
}

#[test]
fn property_suites() {
    let out = hrs(&["test", "--suite", "occ-stable-always", "--trials", "50"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v[0]["suite"], "occ-stable-always");
    assert_eq!(v[0]["violations"], serde_json::json!([]));
    assert_eq!(code(&hrs(&["test", "--suite", "nope"])), 2);
}
