use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn geoplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoplan"))
        .args(args)
        .env_remove("GEOPLAN_OUT")
        .env_remove("GEOPLAN_WORKERS")
        .output()
        .unwrap()
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn small_two_link(methods: &[&str]) -> Value {
    let mut cfg: Value =
        serde_json::from_str(&fs::read_to_string(repo_file("configs/two_link.json")).unwrap()).unwrap();
    cfg["methods"] = json!(methods);
    cfg["tiers"]["smoke"] = json!({ "trials": 3, "runs": 2, "max_iterations": 300 });
    cfg
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(geoplan(&["bench", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let garbage = dir.path().join("bad.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(geoplan(&["solve", garbage.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let mut cfg = small_two_link(&["riemannian"]);
    cfg["methods"] = json!([]);
    let p = write_json(dir.path(), "empty_methods.json", &cfg);
    assert_eq!(geoplan(&["bench", &p, "--out", out]).status.code(), Some(2));

    let mut cfg = small_two_link(&["riemannian"]);
    cfg["perturbation"] = json!([0.1]);
    let p = write_json(dir.path(), "short_perturbation.json", &cfg);
    assert_eq!(geoplan(&["bench", &p, "--out", out]).status.code(), Some(2));

    let mut cfg = small_two_link(&["riemannian"]);
    cfg["unexpected"] = json!(1);
    let p = write_json(dir.path(), "unknown_field.json", &cfg);
    assert_eq!(geoplan(&["bench", &p, "--out", out]).status.code(), Some(2));

    let conv = json!({ "name": "c", "manifold": { "kind": "two-link" }, "base_points": [[0.0, 0.5]], "hs": [0.1] });
    let p = write_json(dir.path(), "one_h.json", &conv);
    assert_eq!(geoplan(&["converge", &p, "--out", out]).status.code(), Some(2));
}

#[test]
fn bench_report_is_consistent_with_its_raw_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(dir.path(), "tl.json", &small_two_link(&["riemannian", "euclidean-baseline", "variational"]));
    let out = dir.path().join("out");
    let o = geoplan(&["bench", &cfg, "--workers", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let runs = report["runs"].as_array().unwrap();
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    assert_eq!(report["trials"].as_array().unwrap().len(), 3);

    for m in methods {
        let name = m["method"].as_str().unwrap();
        let mine: Vec<&Value> = runs.iter().filter(|r| r["method"] == name).collect();
        let per_trial = if name == "variational" { 1 } else { 2 };
        assert_eq!(mine.len(), 3 * per_trial, "{name}");

        let mut lengths = Vec::new();
        let mut energies = Vec::new();
        for t in 0..3 {
            let best = mine
                .iter()
                .filter(|r| r["trial"] == t && r["success"] == true)
                .min_by(|a, b| a["length"].as_f64().unwrap().total_cmp(&b["length"].as_f64().unwrap()));
            if let Some(b) = best {
                lengths.push(b["length"].as_f64().unwrap());
                energies.push(b["energy"].as_f64().unwrap());
            }
        }
        assert_eq!(m["successes"].as_u64().unwrap() as usize, lengths.len());
        assert_eq!(m["success_rate"].as_f64().unwrap(), lengths.len() as f64 / 3.0);
        assert_eq!(m["median_length"].as_f64(), median(lengths), "{name}");
        assert_eq!(m["median_energy"].as_f64(), median(energies), "{name}");
    }

    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "method,trial,run,seed,success,length,energy,cost,iterations,nodes");
    assert_eq!(lines.count(), runs.len());
}

#[test]
fn seed_manifest_reproduces_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_two_link(&["riemannian", "bvp"]);
    let first = dir.path().join("a");
    let p = write_json(dir.path(), "tl.json", &cfg);
    assert!(geoplan(&["bench", &p, "--workers", "1", "--out", first.to_str().unwrap()]).status.success());

    let report: Value = serde_json::from_str(&fs::read_to_string(first.join("report.json")).unwrap()).unwrap();
    let mut pinned = cfg.clone();
    pinned["seed"] = json!(999);
    pinned["seeds"] = report["seeds"].clone();
    let second = dir.path().join("b");
    let p = write_json(dir.path(), "pinned.json", &pinned);
    assert!(geoplan(&["bench", &p, "--workers", "3", "--out", second.to_str().unwrap()]).status.success());

    assert_eq!(fs::read(first.join("report.csv")).unwrap(), fs::read(second.join("report.csv")).unwrap());
}

#[test]
fn out_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_geoplan"))
        .args(["solve", repo_file("configs/solve_free.json").to_str().unwrap()])
        .env("GEOPLAN_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("solution.csv").exists() && out.join("solution.json").exists());
}

#[test]
fn solve_free_plane_is_a_straight_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = geoplan(&["solve", repo_file("configs/solve_free.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("solution.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["index", "q0", "q1"]);
    let pts: Vec<[f64; 2]> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            [r[1].parse().unwrap(), r[2].parse().unwrap()]
        })
        .collect();
    assert_eq!(pts[0], [0.0, 0.0]);
    assert_eq!(*pts.last().unwrap(), [3.0, 2.0]);
    for p in &pts {
        // collinear with (3, 2)
        assert!((2.0 * p[0] - 3.0 * p[1]).abs() <= 1e-9, "{p:?}");
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    assert!((summary["length"].as_f64().unwrap() - 13f64.sqrt()).abs() <= 1e-9);
    assert!((summary["energy"].as_f64().unwrap() - 6.5).abs() <= 1e-9);
}

#[test]
fn solve_on_a_severed_map_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for _ in 0..20 {
        rows.push(format!("{}#{}", ".".repeat(19), ".".repeat(20)));
    }
    fs::write(dir.path().join("wall.txt"), format!("resolution 0.1 origin 0 0\n{}\n", rows.join("\n"))).unwrap();
    let cfg = json!({
        "name": "severed",
        "problem": {
            "manifold": { "kind": "se2", "weights": [1.0, 10.0, 1.0] },
            "environment": { "kind": "map-file", "path": "wall.txt", "robot_radius": 0.1 },
            "start": [0.8, 1.0, 0.0],
            "goal": [3.2, 1.0, 0.0]
        },
        "method": "riemannian",
        "settings": { "planner": { "max_iterations": 100, "collision_step": 0.02, "expansion": { "s": 0.1 } } }
    });
    let p = write_json(dir.path(), "severed.json", &cfg);
    let out = dir.path().join("out");
    let o = geoplan(&["solve", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    assert_eq!(summary["success"], false);
}

#[test]
fn converge_constant_metric_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = geoplan(&[
        "converge",
        repo_file("configs/converge_constant.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("converge.json")).unwrap()).unwrap();
    assert_eq!(r["summary"]["exact"], true);
    assert_eq!(r["summary"]["points"], 3);
    let rows = csv::Reader::from_path(out.join("converge.csv")).unwrap().records().count();
    assert_eq!(rows, 3 * 5);
}
