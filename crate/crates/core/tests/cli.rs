use std::path::Path;
use std::process::Command;

fn mtower(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_mtower"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr),
    )
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn uni_failure_is_a_finding() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, log) = mtower(&["uni", "--model", "doubling-constant"], tmp.path());
    assert_eq!(code, 0, "{log}");
    let csv = std::fs::read_to_string(tmp.path().join("uni.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(4), Some("0.0"));
    assert_eq!(manifest(tmp.path())["schema"], "v1");
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(mtower(&["induce", "--nmax", "0"], tmp.path()).0, 1);
    assert_eq!(mtower(&["induce", "--no-such-flag"], tmp.path()).0, 1);
    assert_eq!(mtower(&["frobnicate"], tmp.path()).0, 1);
    assert_eq!(mtower(&["uni", "--model", "no-such-model"], tmp.path()).0, 1);
    assert_eq!(mtower(&["models", "--config", "/nonexistent/run.toml"], tmp.path()).0, 1);
    assert_eq!(mtower(&["--help"], tmp.path()).0, 0);
}

#[test]
fn small_induce_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, log) = mtower(&["induce", "--model", "planar-triple", "--nmax", "6", "--res", "8"], tmp.path());
    assert!(code == 0 || code == 2, "{log}");
    for f in ["tails.csv", "ratios.csv", "components.csv"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let tails = std::fs::read_to_string(tmp.path().join("tails.csv")).unwrap();
    assert!(tails.starts_with("n,leb_R_gt_n,leb_a_n,leb_b_n"));
    assert_eq!(tails.lines().count(), 1 + 7);
    let m = manifest(tmp.path());
    assert_eq!(m["config"]["nmax"], 6);
    assert_eq!(m["config"]["res"], 8);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
    assert_eq!(m["exit_code"], code);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "model = \"A\"\nseed = 7\nnodes = 1025\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let out1 = tmp.path().join("one");
    let (code, log) = mtower(&["uni", "--config", cfg, "--seed", "8"], &out1);
    assert_eq!(code, 0, "{log}");
    let m = manifest(&out1);
    assert_eq!(m["config"]["seed"], 8);
    assert_eq!(m["config"]["model"], "A");
    assert_eq!(m["config"]["nodes"], 1025);
    std::fs::write(tmp.path().join("bad.toml"), "sedd = 1\n").unwrap();
    let bad = tmp.path().join("bad.toml");
    assert_eq!(mtower(&["uni", "--config", bad.to_str().unwrap()], &out1).0, 1);
}

#[test]
fn seeded_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["distortion", "--model", "C", "--pairs", "5", "--seed", "3"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(mtower(&args, &a).0, 0);
    assert_eq!(mtower(&args, &b).0, 0);
    let read = |d: &Path| std::fs::read(d.join("distortion.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
}
