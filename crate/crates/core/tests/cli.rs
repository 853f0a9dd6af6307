use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn example_config() -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/flat_crossing.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("scene.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn wavelab(args: &[&str], config: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_wavelab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn rays_cone_rows_lie_on_the_light_cone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &example_config());
    let out = dir.path().join("out");
    assert_eq!(wavelab(&["rays"], &cfg, &out), 0);
    let summary = read_json(&out.join("support.json"));
    assert_eq!(summary["on_interface"], Value::Bool(true));
    let t0 = summary["p0"]["t"].as_f64().unwrap();
    let x0: Vec<f64> = summary["p0"]["x"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();

    let csv = std::fs::read_to_string(out.join("support.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], &["surface", "t", "x0", "x1"]);
    let mut cone = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), header.len());
        if cols[0] != "cone" {
            continue;
        }
        cone += 1;
        let v: Vec<f64> = cols[1..4].iter().map(|c| c.parse().unwrap()).collect();
        let r = (v[1] - x0[0]).hypot(v[2] - x0[1]);
        assert!((r - (v[0] - t0)).abs() < 1e-6, "{line}");
    }
    assert!(cone > 100);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["exit_code"], 0);
}

#[test]
fn negative_grid_spacing_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = example_config();
    c["grid"]["h"] = Value::from(-0.04);
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    assert_eq!(wavelab(&["cross"], &cfg, &out), 2);
    let err = read_json(&out.join("error.json"));
    assert_eq!(err["code"], 2);
    assert_eq!(err["field"], "grid.h");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn cross_without_jump_is_null() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = example_config();
    c["coefficient"]["alpha"] = Value::from(0.0);
    let eps = c["experiment"]["eps"].as_f64().unwrap();
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    assert_eq!(wavelab(&["cross"], &cfg, &out), 0);
    let rep = read_json(&out.join("cross.json"));
    let norm = rep["field_norm"].as_f64().unwrap();
    assert!(norm < 1e-10 * eps * eps, "{norm}");
    let snaps = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "wfg"));
    assert!(snaps.count() > 0);
}

#[test]
fn other_failures_map_to_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // unreadable config
    assert_eq!(wavelab(&["rays"], &dir.path().join("missing.json"), &out), 1);
    assert_eq!(read_json(&out.join("error.json"))["kind"], "Io");
    // unknown key
    let mut c = example_config();
    c["grid"]["spacing"] = Value::from(1.0);
    let cfg = write_config(dir.path(), &c);
    assert_eq!(wavelab(&["rays"], &cfg, &out), 2);
    assert_eq!(read_json(&out.join("error.json"))["kind"], "Parse");
    // perturb needs a potential
    let cfg = write_config(dir.path(), &example_config());
    assert_eq!(wavelab(&["perturb"], &cfg, &out), 2);
    assert_eq!(read_json(&out.join("error.json"))["field"], "coefficient.potential");
    // parallel rays: no intersection
    let mut c = example_config();
    c["sources"][0]["zeta"]["xi"] = serde_json::json!([1.0, 0.0]);
    c["sources"][1]["zeta"]["xi"] = serde_json::json!([1.0, 0.0]);
    let cfg = write_config(dir.path(), &c);
    assert_eq!(wavelab(&["invert", "--no-scaling"], &cfg, &out), 4);
    assert_eq!(read_json(&out.join("error.json"))["kind"], "NoIntersection");
    // a tiny cap makes the nonlinear corner blow up
    let mut c = example_config();
    c["solver"]["blowup_cap"] = Value::from(1e-12);
    let cfg = write_config(dir.path(), &c);
    assert_eq!(wavelab(&["cross"], &cfg, &out), 3);
    assert_eq!(read_json(&out.join("error.json"))["kind"], "BlowUp");
}

#[test]
fn forward_writes_snapshots_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &example_config());
    let out = dir.path().join("out");
    assert_eq!(wavelab(&["forward"], &cfg, &out), 0);
    let diag = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().next().unwrap(), "step,time,l2,l4_accum,energy");
    assert!(diag.lines().count() > 10);
    let manifest = read_json(&out.join("manifest.json"));
    let snap = manifest["artifacts"].as_array().unwrap().iter().find(|a| a.as_str().unwrap().ends_with(".wfg")).unwrap();
    let s = wavelab::snapshot::Snapshot::read(&out.join(snap.as_str().unwrap())).unwrap();
    assert_eq!(s.header.dims, vec![75, 75]);
}
