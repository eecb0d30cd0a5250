mod common;

use hypsurf::linefree::DEFAULT_WINDOW;
use hypsurf::pipeline::{run_pipeline, PipelineConfig};
use hypsurf::strip::{build_strip, StripOptions};
use hypsurf::Error;

fn small() -> PipelineConfig {
    PipelineConfig::from_json(r#"{"z_step": 0.015625, "n_theta": 64, "section_step": 0.015625, "mesh_samples": 100, "line_search": {"starts": 4}}"#)
        .unwrap()
}

#[test]
fn reports_are_reproducible() {
    let a = run_pipeline(&small()).unwrap();
    let b = run_pipeline(&small()).unwrap();
    assert_eq!(a.deterministic_json().unwrap(), b.deterministic_json().unwrap());
    assert!(a.timings.contains_key("strip") && a.timings.contains_key("linefree_glued"));
    // overall verdict is the conjunction of the required certificates
    assert_eq!(a.passed, a.certificates.iter().all(|c| !c.failed()));
    assert!(a.informational.iter().any(|c| c.name == "kernel_concentration"));
    assert_eq!(a.margins.linefree_glued, a.linefree_glued.margin);
    assert_eq!(a.certificate("glued_line_free").unwrap().margin, a.margins.linefree_glued);
}

#[test]
fn unperturbed_strip_yields_a_line() {
    let mut cfg = small();
    cfg.strip.rho_scale = 0.0;
    let r = run_pipeline(&cfg).unwrap();
    assert!(!r.passed);
    assert!(r.certificate("glued_line_free").unwrap().failed());
    // the witness lies in the strip itself
    let model = build_strip(&StripOptions { rho_scale: 0.0, ..Default::default() }).unwrap().model;
    let scan = common::StripScan::new(&model, DEFAULT_WINDOW, 1.0 / 64.0);
    let l = r.linefree_glued.best_line;
    assert!(scan.maxdist([l.a, l.b, l.c, l.d]) < 1e-9);
}

#[test]
fn degenerate_strip_reports_zero_margin() {
    let mut cfg = small();
    cfg.strip.degenerate = true;
    let r = run_pipeline(&cfg).unwrap();
    assert_eq!(r.margins.linefree_glued, 0.0);
    assert!(!r.passed);
}

#[test]
fn invalid_configs_are_rejected() {
    let edits: [fn(&mut PipelineConfig); 5] = [
        |c| c.z_max = 8.0,
        |c| c.n_theta = 30,
        |c| c.epsilon = -0.1,
        |c| (c.epsilon, c.epsilon_min) = (0.01, 0.02),
        |c| c.line_search.starts = 0,
    ];
    for (k, edit) in edits.iter().enumerate() {
        let mut cfg = PipelineConfig::default();
        edit(&mut cfg);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "edit {k}");
        assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))), "edit {k}");
    }
    assert!(matches!(PipelineConfig::from_json(r#"{"z_max": 8}"#), Err(Error::Config(_))));
    assert!(PipelineConfig::from_json(r#"{"zmax": 12}"#).is_err());
}
