use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn browder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_browder")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn constant_config_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = constant\nradius_x = 0.25\nradius_y = 0.25\n");
    let out = dir.path().join("out");
    let o = browder(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["result"]["converged"], true);
    let iters = s["result"]["history"].as_array().unwrap();
    for rec in iters {
        let n = rec["iteration"].as_u64().unwrap();
        assert!(out.join(format!("iterations/{n:03}.json")).exists());
    }
    // One CSV row per rectangle per iteration.
    let total: u64 = iters.iter().map(|r| r["rect_count"].as_u64().unwrap()).sum();
    let csv = fs::read_to_string(out.join("component.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,x0,y0,radius_x,radius_y"));
    assert_eq!(lines.count() as u64, total);
}

#[test]
fn single_coarse_iteration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = diagonal\nmax_iters = 1\nradius_x = 0.5\nradius_y = 0.5\n");
    let out = dir.path().join("out");
    let o = browder(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(&out)["result"]["converged"], false);
}

#[test]
fn malformed_config_exits_1_naming_field() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [
        ("problem = constant\nschedule_factor = 1.5\n", "schedule_factor"),
        ("colour = blue\n", "colour"),
    ] {
        let cfg = write_config(dir.path(), text);
        let o = browder(&["--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{err}");
        assert!(err.contains("line"), "{err}");
    }
}

#[test]
fn unknown_problem_override_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = browder(&["--problem", "nope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn summary_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = logit-coordination\n");
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let o = browder(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push(fs::read(out.join("summary.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn seed_and_problem_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = diagonal\nseed = 1\n");
    let out = dir.path().join("out");
    let o = browder(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "42", "--problem", "constant"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["problem"], "constant");
    assert_eq!(s["config"]["seed"], 42);
}

#[test]
fn expression_problem_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "expr = (x[0] + y[0]) / 2\nx_points = 101\n");
    let out = dir.path().join("out");
    let o = browder(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&out)["problem"], "expr");
}
