use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loopfield"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("loopfield-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn passing_experiment_exits_zero_and_writes_reports() {
    let out = scratch("pass");
    let o = bin().arg("run").arg(configs().join("verify-discrete.toml")).arg("--out").arg(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS [2]")).count() >= 3);
    let csv = std::fs::read_to_string(out.join("verify-discrete.csv")).unwrap();
    assert!(csv.starts_with("experiment,group,epsilon,triple_id,term,value,sigma,residual,residual_sigma,target,gap,rate"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify-discrete.json")).unwrap()).unwrap();
    assert!(json.as_array().map(|a| !a.is_empty()).unwrap_or(false));
    std::fs::remove_dir_all(&out).ok();
}

#[test]
fn negative_control_exits_one() {
    let o = bin().arg("run").arg(configs().join("negative-control.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL [2]"));
}

#[test]
fn config_errors_exit_two() {
    let d = scratch("bad");
    let p = d.join("bad.toml");
    std::fs::write(&p, "[experiment]\nname = \"verify-discrete\"\n[sweep]\nepsilon = [2.0]\n").unwrap();
    assert_eq!(bin().arg("run").arg(&p).output().unwrap().status.code(), Some(2));
    std::fs::write(&p, "[experiment]\nname = \"no-such-experiment\"\n").unwrap();
    assert_eq!(bin().arg("run").arg(&p).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("run").arg(d.join("missing.toml")).output().unwrap().status.code(), Some(2));
    std::fs::write(&p, "[experiment]\nname = \"converge-crossing\"\n[geometry]\nareas = [0.3, 1.5, 0.25, 1.5]\n").unwrap();
    assert_eq!(bin().arg("run").arg(&p).output().unwrap().status.code(), Some(2));
    std::fs::remove_dir_all(&d).ok();
}

#[test]
fn fixtures_and_selftest() {
    let d = scratch("fx");
    let o = bin().args(["fixtures", "loop-ops", "--out"]).arg(&d).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(d.join("loop-ops.tsv").exists());
    assert_eq!(bin().args(["fixtures", "nope"]).output().unwrap().status.code(), Some(2));
    let o = bin().arg("selftest").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    std::fs::remove_dir_all(&d).ok();
}
