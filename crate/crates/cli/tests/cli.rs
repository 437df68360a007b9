use std::path::Path;
use std::process::{Command, Output};

fn mvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_chain_on_synthetic_plane() {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = tmp.path().join("scene");
    let manifest = scene_dir.join("scene.json");
    let tuples = tmp.path().join("tuples.json");
    let depth_dir = tmp.path().join("depth");
    let mesh = tmp.path().join("mesh.ply");

    let out = mvs(&[
        "synth",
        "--kind",
        "plane",
        "--frames",
        "3",
        "--out",
        s(&scene_dir),
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(manifest.is_file());

    let out = mvs(&[
        "tuples",
        "--scene",
        s(&manifest),
        "--mode",
        "pose",
        "--out",
        s(&tuples),
        "--max-sources",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sel = json(&tuples);
    assert_eq!(sel["tuples"].as_array().unwrap().len(), 3);

    let out = mvs(&[
        "depth",
        "--scene",
        s(&manifest),
        "--tuples",
        s(&tuples),
        "--out",
        s(&depth_dir),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for id in ["frame000", "frame001", "frame002"] {
        assert!(depth_dir.join(format!("{id}.mvsd")).is_file());
    }
    let report = json(&depth_dir.join("report.json"));
    assert_eq!(report["completed"].as_array().unwrap().len(), 3);
    assert!(report["metrics"]["abs_rel"].as_f64().unwrap().is_finite());

    let eval = tmp.path().join("eval.json");
    let out = mvs(&[
        "eval-depth",
        "--pred-dir",
        s(&depth_dir),
        "--scene",
        s(&manifest),
        "--report",
        s(&eval),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&eval)["per_image"].as_array().unwrap().len(), 3);

    let out = mvs(&[
        "fuse",
        "--scene",
        s(&manifest),
        "--depth-dir",
        s(&depth_dir),
        "--out",
        s(&mesh),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read(&mesh).unwrap().starts_with(b"ply\n"));

    let mreport = tmp.path().join("mesh_eval.json");
    let out = mvs(&[
        "eval-mesh",
        "--pred",
        s(&mesh),
        "--gt",
        s(&mesh),
        "--samples",
        "2000",
        "--report",
        s(&mreport),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&mreport);
    assert_eq!(m["chamfer"].as_f64(), Some(0.0));
    assert_eq!(m["fscore"].as_f64(), Some(1.0));
}

#[test]
fn missing_frame_is_a_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = tmp.path().join("scene");
    let manifest = scene_dir.join("scene.json");
    assert!(mvs(&[
        "synth",
        "--kind",
        "two-planes",
        "--frames",
        "2",
        "--out",
        s(&scene_dir)
    ])
    .status
    .success());
    let tuples = tmp.path().join("tuples.json");
    std::fs::write(
        &tuples,
        r#"{"tuples":[{"reference":"frame000","sources":["frame001"]},{"reference":"frame001","sources":["nope"]}]}"#,
    )
    .unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"bins": 16, "passes": 1}"#).unwrap();
    let depth_dir = tmp.path().join("depth");
    let out = mvs(&[
        "depth",
        "--scene",
        s(&manifest),
        "--tuples",
        s(&tuples),
        "--config",
        s(&cfg),
        "--out",
        s(&depth_dir),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(depth_dir.join("frame000.mvsd").is_file());
    assert!(!depth_dir.join("frame001.mvsd").exists());
    let report = json(&depth_dir.join("report.json"));
    assert_eq!(report["failed"][0]["reference"], "frame001");
}

#[test]
fn configuration_and_format_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_cfg = tmp.path().join("cfg.json");
    std::fs::write(&bad_cfg, r#"{"bins": 1}"#).unwrap();
    let scene_dir = tmp.path().join("scene");
    let manifest = scene_dir.join("scene.json");
    assert!(mvs(&[
        "synth",
        "--kind",
        "plane",
        "--frames",
        "2",
        "--out",
        s(&scene_dir)
    ])
    .status
    .success());
    let tuples = tmp.path().join("tuples.json");
    std::fs::write(&tuples, r#"{"tuples":[]}"#).unwrap();
    let out = mvs(&[
        "depth",
        "--scene",
        s(&manifest),
        "--tuples",
        s(&tuples),
        "--config",
        s(&bad_cfg),
        "--out",
        s(&tmp.path().join("d")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let not_ply = tmp.path().join("x.ply");
    std::fs::write(&not_ply, b"solid cube\n").unwrap();
    let out = mvs(&["eval-mesh", "--pred", s(&not_ply), "--gt", s(&not_ply)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format error at byte 0"));

    let out = mvs(&["synth", "--kind", "torus", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = mvs(&[
        "tuples",
        "--scene",
        s(&tmp.path().join("missing.json")),
        "--out",
        s(&tuples),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
