use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use midsurf::mesh::{io as mesh_io, shapes};
use tempfile::TempDir;

fn midsurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midsurf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = midsurf(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

/// `key=value` pairs of the last output line.
fn record(out: &str) -> HashMap<String, String> {
    out.lines()
        .last()
        .unwrap_or("")
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small sphere-pair phantom; returns its directory.
fn phantom(dir: &TempDir) -> PathBuf {
    let out = dir.path().join("ph");
    ok(&["phantom", "--dims", "32", "--rw", "5", "--rg", "9", "--gt-vertices", "2000", "--out", s(&out)]);
    out
}

fn reconstruct(ph: &Path, out: &Path, extra: &[&str]) -> Output {
    let wm = ph.join("wm_mask.mvol");
    let gm = ph.join("gm_mask.mvol");
    let mut args = vec![
        "reconstruct",
        "--wm-mask",
        s(&wm),
        "--gm-mask",
        s(&gm),
        "--target-vertices",
        "1500",
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    midsurf(&args)
}

#[test]
fn phantom_writes_masks_and_surfaces() {
    let dir = TempDir::new().unwrap();
    let ph = phantom(&dir);
    let mut names: Vec<_> = fs::read_dir(&ph).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["gm_mask.mvol", "gt_mid.ply", "gt_pial.ply", "gt_wm.ply", "wm_mask.mvol"]);
    let r = record(&ok(&["inspect", s(&ph.join("gt_mid.ply"))]));
    assert_eq!(r["genus"], "0");
    assert_eq!(r["closed_manifold"], "true");
    let r = record(&ok(&["inspect", s(&ph.join("wm_mask.mvol"))]));
    assert_eq!((r["kind"].as_str(), r["dims"].as_str()), ("mask", "32x32x32"));
}

#[test]
fn inverted_radii_are_rejected() {
    let dir = TempDir::new().unwrap();
    let o = midsurf(&["phantom", "--rw", "9", "--rg", "9", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_magic_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.mvol");
    fs::write(&bad, b"NOPE0000000000000000").unwrap();
    let o = midsurf(&["sdf", "--mask", s(&bad), "--out", s(&dir.path().join("o.mvol"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad magic"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let ph = phantom(&dir);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "iterations = 2\nlearning_rate = 0.1\n").unwrap();
    let o = reconstruct(&ph, &dir.path().join("r"), &["--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn reconstruct_writes_outputs_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let ph = phantom(&dir);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# short run\niterations = 4\nseed = 3\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = reconstruct(&ph, &a, &["--config", s(&cfg), "--threads", "1"]);
    assert!(oa.status.success(), "{}", stderr(&oa));
    let ob = reconstruct(&ph, &b, &["--config", s(&cfg), "--threads", "2"]);
    assert!(ob.status.success(), "{}", stderr(&ob));
    for name in ["mid.ply", "wm.ply", "pial.ply", "thickness.txt", "trace.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    assert_eq!(stdout(&oa), stdout(&ob));
    let r = record(&stdout(&oa));
    assert_eq!(r["iterations"], "4");
    let trace = fs::read_to_string(a.join("trace.txt")).unwrap();
    assert_eq!(trace.lines().count(), 5);
    let mid = mesh_io::read(&a.join("mid.ply")).unwrap();
    let thickness = fs::read_to_string(a.join("thickness.txt")).unwrap();
    let values: Vec<f64> = thickness.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), mid.num_vertices());
    assert!(values.iter().all(|&t| t > 0.0));
}

#[test]
fn zero_iterations_return_the_initialization() {
    let dir = TempDir::new().unwrap();
    let ph = phantom(&dir);
    let out = dir.path().join("r");
    let o = reconstruct(&ph, &out, &["--iterations", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = record(&stdout(&o));
    assert_eq!(r["best_iteration"], "0");
    assert_eq!(r["initial_loss"], r["best_loss"]);
    assert_eq!(fs::read_to_string(out.join("trace.txt")).unwrap().lines().count(), 1);
    // The starting thickness is half the measured mask gap (4 voxels here).
    let t: f64 = r["mean_thickness"].parse().unwrap();
    assert!((t - 2.0).abs() < 0.6, "{t}");
}

#[test]
fn reconstruct_reports_metrics_against_references() {
    let dir = TempDir::new().unwrap();
    let ph = phantom(&dir);
    let gw = ph.join("gt_wm.ply");
    let gp = ph.join("gt_pial.ply");
    let o = reconstruct(&ph, &dir.path().join("r"), &["--iterations", "3", "--gt-wm", s(&gw), "--gt-pial", s(&gp)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = record(&stdout(&o));
    for key in ["wm_cd", "wm_ad", "wm_hd90", "pial_cd", "pial_ad", "pial_hd90"] {
        let v: f64 = r[key].parse().unwrap();
        assert!(v.is_finite() && v >= 0.0 && v < 3.0, "{key}={v}");
    }
}

#[test]
fn metrics_of_a_mesh_against_itself_are_zero() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("s.ply");
    mesh_io::write(&p, &shapes::icosphere(3)).unwrap();
    let out = ok(&["metrics", "--pred", s(&p), "--target", s(&p)]);
    assert_eq!(out.trim(), "cd=0.000000 ad=0.000000 hd90=0.000000 n=20000");
}

#[test]
fn metrics_of_offset_spheres_match_the_gap() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.off");
    let b = dir.path().join("b.ply");
    mesh_io::write(&a, &shapes::icosphere(5).map_vertices(|p| p * 0.5)).unwrap();
    mesh_io::write(&b, &shapes::icosphere(5).map_vertices(|p| p * 0.6)).unwrap();
    let r = record(&ok(&["metrics", "--pred", s(&a), "--target", s(&b), "--n", "5000"]));
    let ad: f64 = r["ad"].parse().unwrap();
    let hd90: f64 = r["hd90"].parse().unwrap();
    assert!((ad - 0.1).abs() < 0.005, "{ad}");
    assert!((hd90 - 0.1).abs() < 0.01, "{hd90}");
    assert_eq!(r["n"], "5000");
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck"]);
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().all(|l| l.ends_with("pass=true")), "{out}");
    let o = midsurf(&["gradcheck", "--fixture", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convert_round_trips_between_formats() {
    let dir = TempDir::new().unwrap();
    let ply = dir.path().join("t.ply");
    let off = dir.path().join("t.off");
    let m = shapes::torus(0.6, 0.2, 24, 12);
    mesh_io::write(&ply, &m).unwrap();
    ok(&["convert", s(&ply), s(&off)]);
    let back = mesh_io::read(&off).unwrap();
    assert_eq!(back.faces(), m.faces());
    assert_eq!(record(&ok(&["inspect", s(&off)]))["genus"], "1");
}

#[test]
fn sdf_of_a_mask_is_signed() {
    let dir = TempDir::new().unwrap();
    let ph = phantom(&dir);
    let out = dir.path().join("sdf.mvol");
    let r = record(&ok(&["sdf", "--mask", s(&ph.join("wm_mask.mvol")), "--out", s(&out)]));
    let lo: f64 = r["min"].parse().unwrap();
    let hi: f64 = r["max"].parse().unwrap();
    assert!(lo < 0.0 && hi > 0.0);
    assert_eq!(record(&ok(&["inspect", s(&out)]))["kind"], "scalar");
}
