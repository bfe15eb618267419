use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffgtd"))
}

fn small_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/small.toml")
}

fn run_small(out: &Path, extra: &[&str]) -> std::process::Output {
    let cfg = small_config();
    let mut cmd = bin();
    cmd.args(["run", "--config"]).arg(&cfg).arg("--out").arg(out);
    cmd.args(["--horizon", "3000", "--replicas", "2"]).args(extra);
    cmd.output().unwrap()
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = run_small(d, &["--seed", "5", "--mode", "diffusion,noncooperative"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }

    let c = dir.path().join("c");
    assert!(run_small(&c, &["--seed", "6", "--mode", "diffusion,noncooperative"]).status.success());
    let name = "curve_myopic_diffusion.csv";
    assert_ne!(fs::read(a.join(name)).unwrap(), fs::read(c.join(name)).unwrap());
}

#[test]
fn writes_expected_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_small(&out, &["--target", "detour", "--analysis", "--iid-sampling"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("median final J_PB"));
    assert_eq!(stdout.lines().count(), 4);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["horizon"], 3000);
    assert_eq!(manifest["replicas"], 2);
    assert_eq!(manifest["sampling"], "iid");
    assert_eq!(manifest["targets"], serde_json::json!(["detour"]));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let files: Vec<String> =
        manifest["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut expected = vec!["exact_detour.csv".to_string()];
    for m in ["diffusion", "noncooperative", "centralized"] {
        expected.push(format!("curve_detour_{m}.csv"));
        expected.push(format!("surface_detour_{m}.csv"));
    }
    expected.push("report_detour.json".into());
    assert_eq!(files, expected);
    for f in &files {
        assert!(out.join(f).is_file(), "{f}");
    }

    let exact = fs::read_to_string(out.join("exact_detour.csv")).unwrap();
    let mut lines = exact.lines();
    assert_eq!(lines.next().unwrap(), "row,c1,c2,c3,c4,c5,c6");
    assert_eq!(lines.count(), 6);
    let curve = fs::read_to_string(out.join("curve_detour_diffusion.csv")).unwrap();
    assert!(curve.starts_with("iteration,jpb_0,jpb_1,jpb_2,jpb_3,mean_jpb,diverged\n"));
    // records at 0, 1000, 2000, 3000
    assert_eq!(curve.lines().count(), 5);
    let surface = fs::read_to_string(out.join("surface_detour_centralized.csv")).unwrap();
    assert_eq!(surface.lines().count(), 1 + 6);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report_detour.json")).unwrap()).unwrap();
    assert_eq!(report["num_agents"], 4);
    assert!(report["mean_stable"].as_bool().unwrap());
    assert!(report["msd_network"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[run]\ngamma = 0.9\nmu = \"fast\"\n").unwrap();
    let o = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = bin().args(["run", "--mode", "sideways"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["run", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
