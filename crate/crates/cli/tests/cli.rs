use std::path::Path;
use std::process::{Command, Output};

use num_bigint::BigInt;
use num_rational::BigRational;

fn skewlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewlab")).arg("--out").arg(out).args(args).output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_lists_keys_and_exit_codes() {
    let o = Command::new(env!("CARGO_BIN_EXE_skewlab")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for key in ["experiment.samples_per_shell", "experiment.seed", "verify.l", "threads", "out_dir"] {
        assert!(text.contains(key), "help lacks {key}");
    }
    assert!(text.contains("Exit codes"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = skewlab(dir.path(), &["verify-example", "--set", "experiment.nonsense=1"]);
    assert_eq!(o.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.split(|&b| b == b'\n').find(|l| l.starts_with(b"{")).unwrap()).unwrap();
    assert!(err["message"].as_str().unwrap().contains("nonsense"), "{err}");
    assert_eq!(err["kind"], "config");
    assert!(dir.path().join("error.json").exists());
}

#[test]
fn bad_flag_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_skewlab")).args(["basin", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn verify_example_verdicts_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = skewlab(dir.path(), &["verify-example", "--set", "verify.l=\"10\"", "--set", "verify.b=\"5\""]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&dir.path().join("example.json"));
    let star: BigRational = v["star"].as_str().unwrap().parse().unwrap();
    assert_eq!(star, BigRational::new(BigInt::from(11), BigInt::from(8)));
    assert!(dir.path().join("report.txt").exists());
    let cfg = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(cfg.contains(v["config_hash"].as_str().unwrap()));

    // B = 3 is too small for (*)
    let bad = tempfile::tempdir().unwrap();
    let o = skewlab(bad.path(), &["verify-example", "--set", "verify.b=\"3\""]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&bad.path().join("example.json"))["star_verdict"], "FAIL");
}

#[test]
fn preimages_report_three_children_of_the_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = skewlab(dir.path(), &["preimages", "--set", "experiment.depths=[1, 2]"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("preimages.json"));
    let nodes = v["nodes"].as_array().unwrap();
    assert_eq!(nodes.iter().filter(|n| n["depth"] == 1).count(), 3);
    assert!(nodes.iter().all(|n| n["depth"].as_u64().unwrap() <= 2));
}

#[test]
fn raster_from_another_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("basin");
    let o = skewlab(&base, &["basin", "--set", "experiment.u_resolution=128"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for ext in ["pgm", "ppm", "json"] {
        assert!(base.join(format!("u_grid.{ext}")).exists());
    }
    let raster = base.join("u_grid.pgm");
    let o = skewlab(&dir.path().join("d"), &["distance", "--u-grid", raster.to_str().unwrap(), "--set", "experiment.u_resolution=256"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn distance_writes_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = skewlab(
        dir.path(),
        &[
            "distance",
            "--set", "distance.from=[0.1, 0.0, 0.2, 0.0]",
            "--set", "distance.to=[0.1, 0.0, -0.3, 0.1]",
            "--set", "experiment.u_resolution=128",
            "--set", "experiment.slice_resolution=128",
            "--set", "experiment.depths=[2]",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("distance.csv")).unwrap();
    for method in ["projection", "slice-graph", "chain"] {
        assert!(csv.lines().any(|l| l.starts_with(method)), "{method} missing:\n{csv}");
    }
    for line in csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("method")) {
        let cols: Vec<&str> = line.split(',').collect();
        let (lo, up): (f64, f64) = (cols[2].parse().unwrap(), cols[3].parse().unwrap());
        assert!(lo <= up, "{line}");
    }
}
