use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ncham(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncham")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).expect("column exists");
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn empty_config_prints_usage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# only a comment\n\n");
    let out = ncham(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage: ncham run"));
}

#[test]
fn missing_subcommand_fails_with_usage() {
    let out = ncham(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = hbar_sweep\n# comment\nhbar_lst = 0.1,0.01\n");
    let out = ncham(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("hbar_lst"), "{err}");
}

#[test]
fn out_of_range_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = oscillator_correspondence\n");
    let out = ncham(&["run", &cfg, "--set", "levels=4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--set #1"));
}

#[test]
fn list_names_every_experiment() {
    let out = ncham(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["oscillator_correspondence", "free_packet", "hbar_sweep", "galilean_audit", "gass_property_audit"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn hbar_sweep_fits_a_quadratic_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = hbar_sweep\nhbar_list = 1e-1,3e-2,1e-2,3e-3,1e-3\n");
    let out_dir = dir.path().join("out");
    let out = ncham(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = fs::read_to_string(out_dir.join("hbar_sweep/fit.csv")).unwrap();
    let slope = column(&fit, "slope")[0];
    assert!((1.9..=2.1).contains(&slope), "{slope}");
    assert_eq!(column(&fs::read_to_string(out_dir.join("hbar_sweep/residuals.csv")).unwrap(), "hbar").len(), 5);
}

#[test]
fn oscillator_means_follow_the_classical_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = oscillator_correspondence\nhbar = 1\nperiods = 1\n");
    let out_dir = dir.path().join("out");
    assert!(ncham(&["run", &cfg, "--out", out_dir.to_str().unwrap()]).status.success());
    let table = fs::read_to_string(out_dir.join("oscillator_correspondence/ehrenfest.csv")).unwrap();
    let gaps = column(&table, "gap");
    assert_eq!(gaps.len(), 65);
    assert!(gaps.iter().all(|&g| g < 1e-6));
}

#[test]
fn caustic_exits_with_code_2_and_flags_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = free_packet\np0 = 0\nchirp = -0.5\ntime = 1.5\nsnapshots = 6\n",
    );
    let out_dir = dir.path().join("out");
    let out = ncham(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("caustic"));
    let manifest = fs::read_to_string(out_dir.join("free_packet/manifest.txt")).unwrap();
    assert!(manifest.contains("status=numeric_error") && manifest.contains("partial=true"));
    // snapshots before the focus at t = 1 were kept
    assert!(out_dir.join("free_packet/classical_snapshot_003.csv").exists());
    assert!(!out_dir.join("free_packet/correspondence.csv").exists());
}

#[test]
fn manifest_echoes_config_and_relations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = galilean_audit\nseed = 9\n");
    let out_dir = dir.path().join("out");
    assert!(ncham(&["run", &cfg, "--set", "time=1.25", "--out", out_dir.to_str().unwrap()]).status.success());
    let manifest = fs::read_to_string(out_dir.join("galilean_audit/manifest.txt")).unwrap();
    for line in ["config.seed=9", "config.time=1.25e0", "status=ok", "partial=false", "library_version="] {
        assert!(manifest.contains(line), "{line}\n{manifest}");
    }
    let relations = manifest.lines().find_map(|l| l.strip_prefix("relations=")).unwrap();
    assert!(relations.split(',').any(|r| r == "hamiltonian_boost"));
    let header = fs::read_to_string(out_dir.join("galilean_audit/relations.csv")).unwrap();
    assert!(header.starts_with("relation_id,state_id,residual\n"));
}

#[test]
fn rerun_replaces_stale_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = free_packet\ngrid_n = 256\nextent = 8\nhbar_list = 0.4,0.2\nsnapshots = 6\n");
    let out_dir = dir.path().join("out");
    let od = out_dir.to_str().unwrap();
    assert!(ncham(&["run", &cfg, "--out", od]).status.success());
    assert!(out_dir.join("free_packet/classical_snapshot_006.csv").exists());
    assert!(ncham(&["run", &cfg, "--out", od, "--set", "snapshots=2"]).status.success());
    assert!(!out_dir.join("free_packet/classical_snapshot_006.csv").exists());
}
