//! End-to-end construction: strip, gluing to the quasi-cone, line search on
//! the glued body, choice of ε, smoothing, certificates and export.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::glue_smooth::{
    export_mesh, glue, make_kernel, quasicone_field, smooth, smoothed_certificates, SmoothedCheckOptions,
    SmoothingKernel, CLOSENESS_WINDOW,
};
use crate::linefree::{linefree_certificate, linefree_certificate_on, ExactStripSections, LineSearchOptions, LineSearchReport};
use crate::strip::{build_strip, construction_certificates, strip_cc_certificate, StripDiagnostics, StripOptions};
use crate::supportgeo::{field_sup_distance, z_convexity_certificate, FieldGrid, SupportField, TOL_CC};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Field grid: `z ∈ [−z_max, z_max]` with spacing `z_step`, `n_theta` directions.
    pub z_step: f64,
    pub z_max: f64,
    pub n_theta: usize,
    pub strip: StripOptions,
    /// First ε tried; it is halved while the δ-closeness exceeds the margin
    /// of `E`, down to `epsilon_min`.
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub delta: f64,
    /// Margin `E` must reach for the line-free certificate.
    pub required_margin: f64,
    pub line_search: LineSearchOptions,
    /// Node spacing of the exact sections of `E`.
    pub section_step: f64,
    pub mesh_samples: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            z_step: 1.0 / 256.0,
            z_max: 12.0,
            n_theta: 256,
            strip: StripOptions::default(),
            epsilon: 0.05,
            epsilon_min: 0.05 / 16.0,
            delta: 0.1,
            required_margin: 1e-6,
            line_search: LineSearchOptions::default(),
            section_step: crate::linefree::DEFAULT_NODE_STEP,
            mesh_samples: 500,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("z_step", self.z_step),
            ("strip.step", self.strip.step),
            ("strip.tol_ode", self.strip.tol_ode),
            ("epsilon", self.epsilon),
            ("epsilon_min", self.epsilon_min),
            ("delta", self.delta),
            ("section_step", self.section_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive (got {v})")));
            }
        }
        if self.z_max < 12.0 {
            return Err(Error::Config(format!("z_max must be >= 12 (got {})", self.z_max)));
        }
        if self.epsilon > 1.0 || self.epsilon_min > self.epsilon {
            return Err(Error::Config("need 0 < epsilon_min <= epsilon <= 1".into()));
        }
        if self.n_theta < 16 || self.n_theta % 4 != 0 {
            return Err(Error::Config(format!("n_theta must be a multiple of 4 and >= 16 (got {})", self.n_theta)));
        }
        if self.strip.basis_size < 6 {
            return Err(Error::Config("strip.basis_size must be >= 6".into()));
        }
        if self.line_search.starts == 0 {
            return Err(Error::Config("line_search.starts must be >= 1".into()));
        }
        if self.required_margin < 0.0 {
            return Err(Error::Config("required_margin must be >= 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<FieldGrid> {
        FieldGrid::symmetric(self.z_max, self.z_step, self.n_theta)
    }
}

/// One rung of the ε ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonTrial {
    pub epsilon: f64,
    /// `sup |F_D − F_E|` over `|z| ≤ 10`.
    pub closeness: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub strip_cc: f64,
    pub glued_cc: f64,
    pub curvature: f64,
    pub linefree_glued: f64,
    pub linefree_smoothed: f64,
    pub closeness: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub passed: bool,
    pub certificates: Vec<Certificate>,
    /// Measured but not required, e.g. kernel concentration.
    pub informational: Vec<Certificate>,
    pub margins: Margins,
    pub strip: StripDiagnostics,
    pub epsilon_ladder: Vec<EpsilonTrial>,
    pub linefree_glued: LineSearchReport,
    pub linefree_smoothed: LineSearchReport,
    pub artifacts: Vec<PathBuf>,
    pub config: PipelineConfig,
    /// Seconds per stage; the only part of the report that varies between runs.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    /// The report without timings, for reproducibility comparisons.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.timings.clear();
        Ok(serde_json::to_string_pretty(&r)?)
    }
}

struct Timer(BTreeMap<String, f64>, Instant);

impl Timer {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.0.insert(stage.into(), (now - self.1).as_secs_f64());
        self.1 = now;
    }
}

fn named(mut c: Certificate, name: &str) -> Certificate {
    c.name = name.into();
    c
}

/// Runs every stage in order. Stage failures return a stage-tagged error;
/// failing certificates are recorded and the run continues.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    config.validate()?;
    let mut timer = Timer(BTreeMap::new(), Instant::now());
    let mut certs = Vec::new();
    let grid = config.grid()?;

    let build = build_strip(&config.strip)?;
    let model = &build.model;
    let strip_diag = model.diagnostics();
    certs.extend(construction_certificates(&strip_diag));
    let strip_cc = strip_cc_certificate(model, config.n_theta)?;
    certs.push(strip_cc.clone());
    timer.lap("strip");

    let s_field = crate::strip::strip_field(model, grid).map_err(|e| e.at_stage("strip_field", "extend the strip grid"))?;
    let s_cc = named(z_convexity_certificate(&s_field, TOL_CC), "strip_field_z_convexity");
    certs.push(s_cc);
    let cone = quasicone_field(grid)?;
    let e = glue(&s_field, &cone).map_err(|e| e.at_stage("glue", "check the strip rescaling"))?;
    let e_cc = named(z_convexity_certificate(&e, TOL_CC), "glued_z_convexity");
    certs.push(e_cc.clone());
    timer.lap("glue");

    let sections = ExactStripSections::new(model, true, config.line_search.window, config.section_step)?;
    let (lf_e, report_e) = linefree_certificate_on(&sections, config.required_margin, &config.line_search)?;
    let c = report_e.margin;
    certs.push(named(lf_e, "glued_line_free"));
    timer.lap("linefree_glued");

    let (d, kernel, ladder) = choose_epsilon(&e, grid, config, c)?;
    let chosen = ladder.iter().find(|t| t.epsilon == kernel.epsilon).expect("chosen rung recorded").clone();
    certs.push(
        Certificate::new("epsilon_below_margin", chosen.closeness < c, c - chosen.closeness).with_detail(format!(
            "eps {} gives sup |F_D - F_E| = {:e} against margin(E) = {c:e}; smallest closeness on the ladder {:e}",
            chosen.epsilon,
            chosen.closeness,
            ladder.iter().map(|t| t.closeness).fold(f64::INFINITY, f64::min)
        )),
    );
    let informational = vec![kernel.concentration_certificate()];
    timer.lap("smooth");

    let opts = SmoothedCheckOptions { delta: config.delta, mesh_samples: config.mesh_samples, seed: config.line_search.seed };
    let smoothed = smoothed_certificates(&d, &e, &kernel, &opts)?;
    let curvature = smoothed.iter().find(|c| c.name == "section_curvature").map_or(f64::NAN, |c| c.margin);
    certs.extend(smoothed);
    timer.lap("smoothed_certificates");

    let (lf_d, report_d) = linefree_certificate(&d, f64::MIN_POSITIVE, &config.line_search)?;
    certs.push(named(lf_d, "smoothed_line_free"));
    timer.lap("linefree_smoothed");

    let mut artifacts = Vec::new();
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
        let w = CLOSENESS_WINDOW.min(config.z_max - kernel.half_window);
        let mesh = export_mesh(&d, -w, w)?;
        let mut write = |name: &str, f: &dyn Fn(BufWriter<File>) -> Result<()>| -> Result<()> {
            let path = dir.join(name);
            f(BufWriter::new(File::create(&path)?))?;
            artifacts.push(path);
            Ok(())
        };
        write("strip.csv", &|w| model.write_csv(w))?;
        write("strip.json", &|w| Ok(serde_json::to_writer(w, model)?))?;
        write("glued.bin", &|w| e.write_binary(w))?;
        write("smoothed.bin", &|w| d.write_binary(w))?;
        write("mesh.obj", &|w| mesh.write_obj(w))?;
        timer.lap("export");
    }

    let margins = Margins {
        strip_cc: strip_cc.margin,
        glued_cc: e_cc.margin,
        curvature,
        linefree_glued: c,
        linefree_smoothed: report_d.margin,
        closeness: chosen.closeness,
        epsilon: chosen.epsilon,
    };
    let passed = certs.iter().all(|c| !c.failed());
    let mut report = RunReport {
        passed,
        certificates: certs,
        informational,
        margins,
        strip: strip_diag,
        epsilon_ladder: ladder,
        linefree_glued: report_e,
        linefree_smoothed: report_d,
        artifacts,
        config: config.clone(),
        timings: timer.0,
    };
    if let Some(dir) = &config.output_dir {
        let path = dir.join("report.json");
        report.artifacts.push(path.clone());
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// Halves ε from `config.epsilon` until `sup |F_D − F_E| < margin` or
/// `epsilon_min` is passed. Without a qualifying rung the first one is kept.
fn choose_epsilon(
    e: &SupportField<f64>,
    grid: FieldGrid,
    config: &PipelineConfig,
    margin: f64,
) -> Result<(SupportField<f64>, SmoothingKernel, Vec<EpsilonTrial>)> {
    let mut ladder = Vec::new();
    let mut first: Option<(SupportField<f64>, SmoothingKernel)> = None;
    let mut eps = config.epsilon;
    while eps >= config.epsilon_min * (1.0 - 1e-12) {
        let kernel = make_kernel(eps, grid.dz(), grid.n_theta)?;
        let d = smooth(e, &kernel).map_err(|err| err.at_stage("smooth", "decrease epsilon or enlarge z_max"))?;
        let closeness = field_sup_distance(&d, e, -CLOSENESS_WINDOW, CLOSENESS_WINDOW)?;
        ladder.push(EpsilonTrial { epsilon: eps, closeness });
        if closeness < margin {
            return Ok((d, kernel, ladder));
        }
        if first.is_none() {
            first = Some((d, kernel));
        }
        eps /= 2.0;
    }
    let (d, kernel) = first.expect("at least one rung");
    Ok((d, kernel, ladder))
}
