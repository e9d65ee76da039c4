//! File-interface contract: schemas round-trip, malformed inputs are
//! rejected with the offending field named, and saved models predict
//! identically after reload.

use std::path::{Path, PathBuf};
use std::process::Command;

use juntalab::estim::RngStream;
use juntalab::learn::Model;
use juntalab::setfn::Point;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_juntalab"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("juntalab_io_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn family_spec_roundtrip_via_files() {
    let dir = workdir("spec");
    let spec = r#"{"family": "tribes_xos", "n": 6, "params": {"a": 3, "b": 2}}"#;
    write(&dir.join("f.json"), spec);
    let out = bin()
        .current_dir(&dir)
        .args(["analyze", "--fn", "f.json", "--out", "a.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("a.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 6);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_spec_names_offending_field() {
    let dir = workdir("bad");
    write(&dir.join("bad.json"), r#"{"family": "tribes_xos", "n": 6, "params": {"a": "three", "b": 2}}"#);
    let out = bin()
        .current_dir(&dir)
        .args(["analyze", "--fn", "bad.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("params.a"), "stderr was: {stderr}");

    // Structurally valid JSON with invalid family parameters is also
    // rejected with a diagnostic.
    write(&dir.join("bad2.json"), r#"{"family": "tribes_xos", "n": 5, "params": {"a": 2, "b": 2}}"#);
    let out = bin().current_dir(&dir).args(["analyze", "--fn", "bad2.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tribes_xos"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn model_roundtrip_preserves_predictions() {
    let dir = workdir("model");
    write(
        &dir.join("f.json"),
        r#"{"family": "matroid_rank", "n": 8, "params": {"blocks": [[1, 4, 6]], "caps": [2], "normalize": true}}"#,
    );
    let out = bin()
        .current_dir(&dir)
        .args(["junta", "--fn", "f.json", "--mode", "additive", "--eps", "0.3", "--seed", "5", "--out", "m.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let model: Model =
        serde_json::from_str(&std::fs::read_to_string(dir.join("m.json")).unwrap()).unwrap();
    use rand::Rng;
    let mut rng = RngStream::new(99).rng();
    for _ in 0..100 {
        let bits: u64 = rng.random_range(0..256);
        let x = Point::new(bits, 8).unwrap();
        let want = juntalab::learn::predict(&model, x);
        let out = bin()
            .current_dir(&dir)
            .args(["predict", "--model", "m.json", "--point", &bits.to_string(), "--n", "8"])
            .output()
            .unwrap();
        let got: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
        assert_eq!(got, want, "mask {bits}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sample_csv_feeds_agnostic_learner() {
    let dir = workdir("agn");
    write(&dir.join("f.json"), r#"{"family": "pseudo_boolean", "n": 4, "params": {"k": 1, "active": [0, 3]}}"#);
    let out = bin()
        .current_dir(&dir)
        .args(["sample", "--fn", "f.json", "--exhaustive", "--out", "s.csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .current_dir(&dir)
        .args(["learn", "--fn", "f.json", "--alg", "agnostic", "--eps", "0.3", "--w", "2.0", "--data", "s.csv", "--out", "p.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: Model = serde_json::from_str(&std::fs::read_to_string(dir.join("p.json")).unwrap()).unwrap();
    // On exhaustive noise-free samples the fit is essentially exact.
    let f = juntalab::setfn::make_family(&juntalab::setfn::FamilySpec::new(
        4,
        juntalab::setfn::Family::PseudoBoolean { k: 1, active: vec![0, 3] },
    ))
    .unwrap();
    for x in Point::all(4) {
        assert!((juntalab::learn::predict(&model, x) - f.eval(x)).abs() < 1e-6);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_csv_rejected_with_location() {
    let dir = workdir("csv");
    write(&dir.join("f.json"), r#"{"family": "pseudo_boolean", "n": 4, "params": {"k": 1, "active": [0, 3]}}"#);
    write(&dir.join("s.csv"), "mask,label\n3,0.5\nnotanumber,1\n");
    let out = bin()
        .current_dir(&dir)
        .args(["learn", "--fn", "f.json", "--alg", "agnostic", "--data", "s.csv", "--out", "p.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    std::fs::remove_dir_all(&dir).ok();
}
