//! Runs the `echotomo` binary on the scenes shipped with the repository.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
}

/// Small grids so that each run takes a second or two.
const SMALL: [&str; 12] = [
    "--diag-grid",
    "256",
    "--x-grid",
    "256",
    "--dir-grid",
    "256",
    "--hull-directions",
    "90",
    "--hull-offsets",
    "512",
    "--checks",
    "500",
];

/// `SMALL` with the flags in `extra` replaced.
fn flags<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for pair in SMALL.chunks(2) {
        if !extra.contains(&pair[0]) {
            out.extend(pair);
        }
    }
    out.extend(extra);
    out
}

fn run(cmd: &str, scene_file: &str, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echotomo"))
        .arg(cmd)
        .arg("--scene")
        .arg(scene(scene_file))
        .arg("--out")
        .arg(out)
        .args(flags(extra))
        .output()
        .expect("spawn echotomo")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_disc_and_empty_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("disc");
    let o = run("simulate", "disc.json", &out, &["--rays", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("ray,vertex,x,y,body,time,status"));
    // The middle ray of an odd fan is head-on and reflects off the disc.
    assert!(csv
        .lines()
        .any(|l| l.starts_with("4,") && l.contains(",1,")));
    assert!(std::fs::read_to_string(out.join("rays.svg"))
        .unwrap()
        .contains("<svg"));

    let out = dir.path().join("empty");
    let o = run("simulate", "empty.json", &out, &["--rays", "5"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    // Entry and exit only.
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with("Exited")), "{csv}");
}

#[test]
fn invalid_inputs_have_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("spectrum", "balls3d.json", dir.path(), &[]);
    assert_eq!(code(&o), 2);
    let o = run("spectrum", "missing.json", dir.path(), &[]);
    assert_eq!(code(&o), 2);
    let o = run("spectrum", "disc.json", dir.path(), &["--diag-grid", "300"]);
    assert_eq!(code(&o), 1);
    let bad = dir.path().join("overlap.json");
    std::fs::write(
        &bad,
        r#"{"s0": {"center": [0, 0], "radius": 4},
            "bodies": [{"type": "disc", "center": [0, 0], "radius": 1},
                       {"type": "disc", "center": [0.5, 0], "radius": 1}]}"#,
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_echotomo"))
        .args(["simulate", "--scene"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    // Reconstruction needs a stored echograph.
    let o = run("reconstruct", "disc.json", &dir.path().join("none"), &[]);
    assert_ne!(code(&o), 0);
}

#[test]
fn symmetric_discs_abort() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["spectrum", "echograph"] {
        assert_eq!(code(&run(cmd, "two_discs.json", dir.path(), &[])), 0);
    }
    let o = run("reconstruct", "two_discs.json", dir.path(), &[]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("reconstruction.json"));
    assert_eq!(summary["status"], "aborted");
    assert_eq!(summary["error"], "NonUniqueMinimum");
}

#[test]
fn spectrum_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run("spectrum", "ex11.json", &a, &[])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_echotomo"))
        .args(["--threads", "1", "spectrum", "--scene"])
        .arg(scene("ex11.json"))
        .arg("--out")
        .arg(&b)
        .args(SMALL)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in [
        "diag.csv",
        "diag.json",
        "spectrum.csv",
        "hull.csv",
        "support.csv",
        "vacuous.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let vac = json(&a.join("vacuous.json"));
    assert!(!vac["separating_line"].is_null());
}

#[test]
fn single_body_pipeline_verifies() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["spectrum", "echograph", "reconstruct", "verify"] {
        let o = run(cmd, "disc.json", dir.path(), &[]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let v = json(&dir.path().join("verify.json"));
    assert_eq!(v["passed"], true);
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"single_body_hausdorff"));
    assert!(names.contains(&"specular_law"));
}

#[test]
fn two_body_pipeline_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let extra = ["--diag-grid", "2048", "--k-max", "4"];
    for cmd in ["spectrum", "echograph", "reconstruct", "verify"] {
        let o = run(cmd, "two_discs_offset.json", dir.path(), &extra);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let v = json(&dir.path().join("verify.json"));
    assert_eq!(v["passed"], true, "{v:#}");
    let summary = json(&dir.path().join("reconstruction.json"));
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["audit_violations"], 0);
    let boundary = std::fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    assert!(boundary.starts_with("arc,level,side,body,z1,z2,n1,n2"));
    assert!(std::fs::read_to_string(dir.path().join("echograph.svg"))
        .unwrap()
        .contains("<!-- config "));
}
