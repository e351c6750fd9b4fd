use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortex-evans"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("failed to start vortex-evans")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_profile(dir: &Path, m: u32, mu: f64) -> std::path::PathBuf {
    let path = dir.join(format!("profile_m{m}.json"));
    let out = run(bin().args(["profile", "--m", &m.to_string(), "--mu-max", &mu.to_string(), "--out"]).arg(&path));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn malformed_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "m = \"two\"\n").unwrap();
    let out = run(bin().arg("--config").arg(&cfg).arg("certify"));
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(run(bin().arg("--config").arg(&cfg).arg("certify")).status.code(), Some(2));
    let out = run(bin().args(["track", "--m", "1", "--mu-range", "5:3"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evans_reports_forced_zero() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write_profile(dir.path(), 1, 6.0);
    let out = run(bin().args(["evans", "--j", "1", "--lambda", "-i", "--profile"]).arg(&profile));
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["j"], 1);
    assert_eq!(v["lambda"]["im"], -1.0);
    let generic = run(bin().args(["evans", "--j", "1", "--lambda", "0.4i", "--profile"]).arg(&profile));
    let g = stdout_json(&generic);
    let norm = |v: &serde_json::Value| v["mantissa"]["re"].as_f64().unwrap().hypot(v["mantissa"]["im"].as_f64().unwrap());
    assert!(norm(&v) < 1e-6 * norm(&g), "{v} vs {g}");
}

#[test]
fn scan_counts_m2_instability() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write_profile(dir.path(), 2, 4.0);
    let out = run(bin().args(["scan", "--j", "2", "--profile"]).arg(&profile));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["n_su"], 2, "{v}");
}

#[test]
fn track_output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "2"] {
        let path = dir.path().join(format!("branches_{threads}.csv"));
        let out = run(bin()
            .env("VORTEX_EVANS_THREADS", threads)
            .args(["track", "--m", "2", "--mu-range", "3:4", "--step", "0.1", "--out"])
            .arg(&path));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read_to_string(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let mut lines = files[0].lines();
    assert_eq!(lines.next(), Some("mu,j,re_lambda,im_lambda,signature,event"));
    assert!(lines.all(|l| l.split(',').count() == 6));
}

#[test]
fn certify_passes_on_a_short_m1_range() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = run(bin().args(["certify", "--m", "1", "--mu-range", "2:4", "--out"]).arg(&report));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}
