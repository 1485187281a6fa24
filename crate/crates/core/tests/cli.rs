use std::path::Path;
use std::process::Command;

fn quadtrack(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_quadtrack")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s1.csv");
    let (code, msg) = quadtrack(&["run", "--scenario", "1", "--duration", "2", "--out", s(&out)]);
    assert_eq!(code, 0, "{msg}");
    for ext in ["csv", "json", "cfg"] {
        assert!(out.with_extension(ext).exists(), "{ext}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["records"], 2001);
    let (code, msg) = quadtrack(&["verify", "--telemetry", s(&out), "--strict"]);
    assert_eq!(code, 0, "{msg}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "gains.position.kk = 4\n").unwrap();
    let out = dir.path().join("o.csv");
    let (code, msg) = quadtrack(&["run", "--scenario", "1", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 2);
    assert!(msg.contains("bad.cfg:1"), "{msg}");
    let (code, _) = quadtrack(&["check-gains", "--config", s(&dir.path().join("missing.cfg"))]);
    assert_eq!(code, 2);
}

#[test]
fn broken_gains_fail_under_strict_and_refuse_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("kx.cfg");
    std::fs::write(&cfg, "gains.position.k_x = 12\n").unwrap();
    assert_eq!(quadtrack(&["check-gains", "--config", s(&cfg)]).0, 0);
    assert_eq!(quadtrack(&["check-gains", "--config", s(&cfg), "--strict"]).0, 4);
    let out = dir.path().join("o.csv");
    assert_eq!(quadtrack(&["run", "--scenario", "1", "--config", s(&cfg), "--out", s(&out)]).0, 2);
    let forced = ["run", "--scenario", "1", "--config", s(&cfg), "--out", s(&out), "--duration", "0.5", "--force"];
    assert_eq!(quadtrack(&forced).0, 0);
    let (code, _) = quadtrack(&[&forced[..], &["--strict"]].concat());
    assert_eq!(code, 4);
}

#[test]
fn divergence_exits_3_with_partial_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.cfg");
    std::fs::write(&cfg, "disturbance.torque.offset = 1e9, 0, 0\n").unwrap();
    let out = dir.path().join("d.csv");
    let (code, msg) = quadtrack(&["run", "--scenario", "1", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 3, "{msg}");
    let rows = std::fs::read_to_string(&out).unwrap().lines().count();
    assert!(rows >= 2 && rows < 60_002);
}

#[test]
fn parallel_seeds_match_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let many = dir.path().join("m.csv");
    let (code, msg) = quadtrack(&["run", "--scenario", "2", "--duration", "1", "--seed", "7", "--seeds", "3", "--out", s(&many)]);
    assert_eq!(code, 0, "{msg}");
    for seed in 7..10 {
        let single = dir.path().join(format!("single{seed}.csv"));
        let seed_arg = seed.to_string();
        let args = ["run", "--scenario", "2", "--duration", "1", "--seed", &seed_arg, "--out", s(&single)];
        assert_eq!(quadtrack(&args).0, 0);
        let a = std::fs::read(dir.path().join(format!("m.seed{seed}.csv"))).unwrap();
        assert_eq!(a, std::fs::read(&single).unwrap());
    }
}

#[test]
fn inertia_sweep_runs_both_factors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s3.csv");
    let (code, msg) = quadtrack(&["run", "--scenario", "3", "--duration", "0.5", "--out", s(&out)]);
    assert_eq!(code, 0, "{msg}");
    assert!(dir.path().join("s3.inertia0.7.csv").exists());
    assert!(dir.path().join("s3.inertia1.3.csv").exists());
}

#[test]
fn shipped_configs_match_presets() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for n in 1..=4 {
        let shipped = std::fs::read_to_string(root.join(format!("scenario{n}.cfg"))).unwrap();
        let (code, printed) = quadtrack(&["show-config", "--scenario", &n.to_string()]);
        assert_eq!(code, 0);
        assert_eq!(shipped, printed);
    }
}
