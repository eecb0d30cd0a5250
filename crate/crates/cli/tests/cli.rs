use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hypsurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypsurf")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.json");
    std::fs::write(
        &p,
        r#"{"z_step": 0.015625, "n_theta": 64, "section_step": 0.015625, "mesh_samples": 100, "line_search": {"starts": 4}}"#,
    )
    .unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&hypsurf(&["bogus"])), 2);
    assert_eq!(code(&hypsurf(&["arnold", "verify", "--signature", "3,1"])), 2);
    assert_eq!(code(&hypsurf(&["arnold", "verify", "--signature", "two"])), 2);
    assert_eq!(code(&hypsurf(&["certify", "curvature", "--field", "/nonexistent/field.bin"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"z_stpe": 0.01}"#).unwrap();
    assert_eq!(code(&hypsurf(&["run", "--config", bad.to_str().unwrap()])), 2);
}

#[test]
fn forms_and_rolle_checks_pass() {
    let out = hypsurf(&["forms", "check", "--forms", "200"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(v.as_array().unwrap().iter().all(|c| c["status"] == "pass"), "{v}");

    let out = hypsurf(&["rolle", "check", "--points", "300"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)[0]["margin"].as_f64().unwrap() < 1e-8);
}

#[test]
fn arnold_verify_reports_no_violations() {
    let out = hypsurf(&["arnold", "verify", "--signature", "2,2", "--lines", "300", "--seed", "7"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["violations"], 0);
    assert_eq!(v["lines"], 300);
    assert!(v["skipped_near_tangent"].as_u64().unwrap() <= 3);
    // Same seed, same output.
    assert_eq!(out.stdout, hypsurf(&["arnold", "verify", "--lines", "300"]).stdout);
}

#[test]
fn field_stages_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = d.join("s");
    let p = |name: &str| d.join(name).to_str().unwrap().to_owned();
    let out = hypsurf(&["strip", "build", "--out", s.to_str().unwrap(), "--z-step", "0.015625", "--n-theta", "64"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["strip.json", "strip.csv", "strip.bin"] {
        assert!(s.join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(s.join("strip.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "z,g,rho,f1,df1,f2,df2,u1,du1,u2,du2");

    let strip_bin = s.join("strip.bin");
    let out = hypsurf(&["certify", "cc", "--field", strip_bin.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    assert_eq!(code(&hypsurf(&["glue", "--strip", strip_bin.to_str().unwrap(), "--out", &p("e.bin")])), 0);
    let out = hypsurf(&["smooth", "--field", &p("e.bin"), "--epsilon", "0.05", "--out", &p("d.bin")]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["sup_distance"].as_f64().unwrap() < 0.1);

    let out = hypsurf(&["certify", "curvature", "--field", &p("d.bin")]);
    assert_eq!(code(&out), 0);

    let out = hypsurf(&["export", "--field", &p("d.bin"), "--out", &p("m.obj"), "--csv", &p("d.csv")]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let (rows, n) = (v["rows"].as_u64().unwrap() as usize, v["n_theta"].as_u64().unwrap() as usize);
    assert_eq!(n, 64);
    let obj = std::fs::read_to_string(p("m.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), rows * n);
    assert_eq!(obj.lines().filter(|l| l.starts_with("vn ")).count(), rows * n);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), (rows - 1) * n);

    // The CSV copy reads back to the same certificate as the binary file.
    let a = json(&hypsurf(&["certify", "curvature", "--field", &p("d.bin")]));
    let b = json(&hypsurf(&["certify", "curvature", "--field", &p("d.csv")]));
    assert_eq!(a[0]["margin"], b[0]["margin"]);
}

#[test]
fn linefree_from_strip_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    let deg = dir.path().join("deg");
    assert_eq!(code(&hypsurf(&["strip", "build", "--out", s.to_str().unwrap(), "--z-step", "0.0625", "--n-theta", "16"])), 0);
    assert_eq!(
        code(&hypsurf(&["strip", "build", "--out", deg.to_str().unwrap(), "--degenerate", "--z-step", "0.0625", "--n-theta", "16"])),
        0
    );

    let strip = s.join("strip.json");
    let out = hypsurf(&["linefree", "--strip", strip.to_str().unwrap(), "--glued", "--budget", "4", "--margin", "1e-6"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    let m = v["margin"].as_f64().unwrap();
    assert!(m > 1e-6 && m < 1e-4, "margin {m}");
    assert_eq!(v["certificate"]["name"], "line_free");

    // g ≡ 0 is the ruled quadric: the z-axis lies in it.
    let strip = deg.join("strip.json");
    let out = hypsurf(&["certify", "linefree", "--strip", strip.to_str().unwrap(), "--budget", "2"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["margin"].as_f64().unwrap(), 0.0);
}

#[test]
fn run_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut reports = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = hypsurf(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "11"]);
        // The smoothed body never separates from every line: the run reports failure.
        assert_eq!(code(&out), 1);
        let v = json(&out);
        let status = |name: &str| {
            v["certificates"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["status"].as_str().unwrap().to_owned()
        };
        assert_eq!(status("glued_line_free"), "pass");
        assert_eq!(status("section_curvature"), "pass");
        assert_eq!(status("smoothed_line_free"), "fail");
        for f in ["strip.csv", "strip.json", "glued.bin", "smoothed.bin", "mesh.obj", "report.json"] {
            assert!(out_dir.join(f).is_file(), "{f} missing");
        }
        let mut r: Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
        let obj = r.as_object_mut().unwrap();
        obj.remove("timings");
        obj.remove("artifacts");
        obj["config"].as_object_mut().unwrap().remove("output_dir");
        reports.push((r, std::fs::read(out_dir.join("smoothed.bin")).unwrap()));
    }
    assert_eq!(reports[0].0, reports[1].0);
    assert!(reports[0].1 == reports[1].1, "smoothed.bin differs between runs");
    assert_eq!(reports[0].0["config"]["line_search"]["seed"], 11);
}
