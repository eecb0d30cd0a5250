use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hypsurf::arnoldcount::{arnold_identity_certificate, ArnoldOptions, HomogeneousQuadric};
use hypsurf::gaussmap::rolle_certificate;
use hypsurf::glue_smooth::{export_mesh, glue, make_kernel, quasicone_field, smooth};
use hypsurf::linefree::{linefree_certificate, linefree_certificate_on, ExactStripSections, LineSearchOptions, DEFAULT_NODE_STEP};
use hypsurf::pipeline::{run_pipeline, PipelineConfig};
use hypsurf::quadforms::{gauss_identity_residual, signature_law_certificate};
use hypsurf::strip::{build_strip, construction_certificates, strip_cc_certificate, strip_field, StripModel, StripOptions};
use hypsurf::supportgeo::{curvature_positivity_certificate, z_convexity_certificate, FieldGrid, Provenance, TOL_CC};
use hypsurf::{Certificate, Error, SupportField64};

#[derive(Parser)]
#[command(name = "hypsurf", version, about = "Line-free hyperbolic surface construction and certificates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quadratic-form self tests: restricted-signature law and Gauss identity.
    Forms {
        #[command(subcommand)]
        action: FormsCmd,
    },
    /// Build the strip and write its curves and support field.
    Strip {
        #[command(subcommand)]
        action: StripCmd,
    },
    /// Run one certificate on a field or strip file.
    Certify {
        #[command(subcommand)]
        what: CertifyCmd,
    },
    /// Minimax line search on a field or strip file.
    Linefree(LinefreeArgs),
    /// Glue a strip field to the quasi-cone.
    Glue {
        #[arg(long)]
        strip: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smooth a glued field with the kernel for `epsilon`.
    Smooth {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Raise the kernel to this power before normalising.
        #[arg(long, default_value_t = 1.0)]
        power: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the surface of a smoothed field as an OBJ mesh.
    Export {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        z_lo: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        z_hi: f64,
        /// Also write the field as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Line/quadric counting identity.
    Arnold {
        #[command(subcommand)]
        action: ArnoldCmd,
    },
    /// Gradient identity of the Rolle function.
    Rolle {
        #[command(subcommand)]
        action: RolleCmd,
    },
    /// Full pipeline from a JSON config; flags override the file.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum FormsCmd {
    Check {
        #[arg(long, default_value_t = 500)]
        forms: usize,
        #[arg(long, default_value_t = 6)]
        max_dim: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum StripCmd {
    Build(StripArgs),
}

#[derive(Args)]
struct StripArgs {
    #[arg(long)]
    out: PathBuf,
    /// Use g ≡ 0 (the ruled quadric).
    #[arg(long)]
    degenerate: bool,
    #[arg(long, default_value_t = 1.0)]
    rho_scale: f64,
    #[arg(long, default_value_t = hypsurf::strip::DEFAULT_BASIS_SIZE)]
    basis_size: usize,
    #[arg(long, default_value_t = 12.0)]
    z_max: f64,
    #[arg(long, default_value_t = 1.0 / 256.0)]
    z_step: f64,
    #[arg(long, default_value_t = 256)]
    n_theta: usize,
}

#[derive(Subcommand)]
enum CertifyCmd {
    /// z-convexity of a field, or the one-sided strip check for a strip file.
    Cc(Source),
    /// Section curvature h + h'' > 0.
    Curvature {
        #[arg(long)]
        field: PathBuf,
    },
    Linefree(LinefreeArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Support field (.bin or .csv).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Strip model (strip.json from `strip build`).
    #[arg(long)]
    strip: Option<PathBuf>,
}

#[derive(Args)]
struct LinefreeArgs {
    #[command(flatten)]
    source: Source,
    /// With --strip: use the sections of the strip glued to the quasi-cone.
    #[arg(long)]
    glued: bool,
    /// Required margin.
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    /// Number of multistart runs.
    #[arg(long, default_value_t = 32)]
    budget: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Subcommand)]
enum ArnoldCmd {
    Verify {
        /// Signature of the diagonal quadric, as `k,l`.
        #[arg(long, default_value = "2,2")]
        signature: String,
        #[arg(long, default_value_t = 1000)]
        lines: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum RolleCmd {
    Check {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StripKind {
    Perturbed,
    Unperturbed,
    Degenerate,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strip: Option<StripKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    basis_size: Option<usize>,
}

/// Runtime failure: usage-type problems exit with 2, the rest with 1.
struct Failure(Error);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(e.into())
    }
}

type CmdResult = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(e)) => {
            eprintln!("error: {e}");
            let usage = matches!(
                e,
                Error::Config(_) | Error::Format(_) | Error::Io(_) | Error::Json(_) | Error::Precondition(_) | Error::DimensionMismatch { .. }
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn print(v: &serde_json::Value) {
    // A closed pipe (`| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("serialisable"));
}

fn report(certs: &[Certificate]) -> bool {
    print(&json!(certs));
    certs.iter().all(|c| !c.failed())
}

fn read_field(path: &Path) -> Result<SupportField64, Error> {
    let r = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        SupportField64::read_csv(r, Provenance::Other)
    } else {
        SupportField64::read_binary(r)
    }
}

fn write_field(field: &SupportField64, path: &Path) -> Result<(), Error> {
    let w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        field.write_csv(w)
    } else {
        field.write_binary(w)
    }
}

fn read_strip(path: &Path) -> Result<StripModel, Error> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn dispatch(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Forms { action: FormsCmd::Check { forms, max_dim, seed } } => {
            let law = signature_law_certificate::<f64>(forms, max_dim, seed)?;
            let residual = gauss_identity_residual::<f64>(1000, 3, seed)?;
            let gauss = Certificate::new("gauss_identity", residual < 1e-10, residual)
                .with_detail("max |q*(dQ, dQ) - 4Q| / max(1, |x|^2), (k, l) <= (3, 3)");
            Ok(report(&[law, gauss]))
        }
        Cmd::Strip { action: StripCmd::Build(a) } => strip_build(a),
        Cmd::Certify { what } => certify(what),
        Cmd::Linefree(a) => linefree(a),
        Cmd::Glue { strip, out } => {
            let s = read_field(&strip)?;
            let e = glue(&s, &quasicone_field(s.grid)?)?;
            write_field(&e, &out)?;
            Ok(report(&[z_convexity_certificate(&e, TOL_CC)]))
        }
        Cmd::Smooth { field, epsilon, power, out } => {
            let e = read_field(&field)?;
            let mut kernel = make_kernel(epsilon, e.grid.dz(), e.grid.n_theta)?;
            if power != 1.0 {
                kernel = kernel.sharpened(power)?;
            }
            let d = smooth(&e, &kernel)?;
            write_field(&d, &out)?;
            let dist = hypsurf::supportgeo::field_sup_distance(&d, &e, -10.0, 10.0)?;
            print(&json!({
                "epsilon": epsilon,
                "half_window": kernel.half_window,
                "mass": kernel.mass(),
                "concentration": kernel.concentration,
                "sup_distance": dist,
            }));
            Ok(true)
        }
        Cmd::Export { field, out, z_lo, z_hi, csv } => {
            let d = read_field(&field)?;
            let mesh = export_mesh(&d, z_lo, z_hi)?;
            mesh.write_obj(BufWriter::new(File::create(&out)?))?;
            if let Some(p) = csv {
                d.write_csv(BufWriter::new(File::create(p)?))?;
            }
            print(&json!({ "rows": mesh.rows, "n_theta": mesh.n_theta, "vertices": mesh.vertices.len() }));
            Ok(true)
        }
        Cmd::Arnold { action: ArnoldCmd::Verify { signature, lines, seed } } => {
            let (k, _) = parse_signature(&signature)?;
            let d: Vec<f64> = (0..4).map(|i| if i < k { 1.0 } else { -1.0 }).collect();
            let s = HomogeneousQuadric::diagonal([d[0], d[1], d[2], d[3]])?;
            let (cert, r) = arnold_identity_certificate(&s, &ArnoldOptions { lines, seed })?;
            print(&json!({
                "violations": r.violations,
                "skipped_near_tangent": r.skipped_near_tangent,
                "skipped_ruling": r.skipped_ruling,
                "lines": r.lines,
                "histogram": r.histogram,
                "seed": r.seed,
            }));
            Ok(cert.passed())
        }
        Cmd::Rolle { action: RolleCmd::Check { k, l, epsilon, points, seed } } => {
            Ok(report(&[rolle_certificate::<f64>(k, l, epsilon, points, seed)?]))
        }
        Cmd::Run(a) => run(a),
    }
}

fn parse_signature(s: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::Config(format!("signature must be `k,l` with k + l = 4 (got {s:?})"));
    let (k, l) = s.split_once(',').ok_or_else(bad)?;
    let (k, l): (usize, usize) = (k.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?);
    if k + l != 4 {
        return Err(bad());
    }
    Ok((k, l))
}

fn strip_build(a: StripArgs) -> CmdResult {
    let opts = StripOptions { degenerate: a.degenerate, rho_scale: a.rho_scale, basis_size: a.basis_size, ..Default::default() };
    let build = build_strip(&opts)?;
    let model = &build.model;
    std::fs::create_dir_all(&a.out)?;
    let grid = FieldGrid::symmetric(a.z_max, a.z_step, a.n_theta)?;
    let field = strip_field(model, grid)?;
    write_field(&field, &a.out.join("strip.bin"))?;
    model.write_csv(BufWriter::new(File::create(a.out.join("strip.csv"))?))?;
    serde_json::to_writer(BufWriter::new(File::create(a.out.join("strip.json"))?), model)?;
    let diag = model.diagnostics();
    let mut certs = if build.rho.is_some() { construction_certificates(&diag) } else { Vec::new() };
    certs.push(strip_cc_certificate(model, a.n_theta)?);
    print(&json!({ "diagnostics": diag, "certificates": certs }));
    Ok(certs.iter().all(|c| !c.failed()))
}

fn certify(what: CertifyCmd) -> CmdResult {
    match what {
        CertifyCmd::Cc(src) => {
            let cert = match (src.field, src.strip) {
                (Some(f), _) => z_convexity_certificate(&read_field(&f)?, TOL_CC),
                (None, Some(s)) => strip_cc_certificate(&read_strip(&s)?, 256)?,
                (None, None) => unreachable!("clap group requires one source"),
            };
            Ok(report(&[cert]))
        }
        CertifyCmd::Curvature { field } => Ok(report(&[curvature_positivity_certificate(&read_field(&field)?)])),
        CertifyCmd::Linefree(a) => linefree(a),
    }
}

fn linefree(a: LinefreeArgs) -> CmdResult {
    let opts = LineSearchOptions { starts: a.budget, seed: a.seed, ..Default::default() };
    let (cert, r) = match (a.source.field, a.source.strip) {
        (Some(f), _) => linefree_certificate(&read_field(&f)?, a.margin, &opts)?,
        (None, Some(s)) => {
            let model = read_strip(&s)?;
            let set = ExactStripSections::new(&model, a.glued, opts.window, DEFAULT_NODE_STEP)?;
            linefree_certificate_on(&set, a.margin, &opts)?
        }
        (None, None) => unreachable!("clap group requires one source"),
    };
    print(&json!({
        "best_line": r.best_line,
        "margin": r.margin,
        "witness_z": r.witness_z,
        "evaluations": r.evaluations,
        "restarts": r.restarts,
        "seed": r.seed,
        "certificate": cert,
    }));
    Ok(cert.passed())
}

fn run(a: RunArgs) -> CmdResult {
    let mut config = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = a.out {
        config.output_dir = Some(out);
    }
    match a.strip {
        Some(StripKind::Perturbed) => {}
        Some(StripKind::Unperturbed) => config.strip.rho_scale = 0.0,
        Some(StripKind::Degenerate) => config.strip.degenerate = true,
        None => {}
    }
    if let Some(e) = a.epsilon {
        config.epsilon = e;
        config.epsilon_min = config.epsilon_min.min(e);
    }
    if let Some(d) = a.delta {
        config.delta = d;
    }
    if let Some(b) = a.budget {
        config.line_search.starts = b;
    }
    if let Some(s) = a.seed {
        config.line_search.seed = s;
    }
    if let Some(m) = a.basis_size {
        config.strip.basis_size = m;
    }
    config.validate()?;
    let r = run_pipeline(&config)?;
    let summary: Vec<_> = r
        .certificates
        .iter()
        .map(|c| json!({ "name": c.name, "status": c.status, "margin": c.margin }))
        .collect();
    print(&json!({
        "passed": r.passed,
        "margins": r.margins,
        "certificates": summary,
        "artifacts": r.artifacts,
        "timings": r.timings,
    }));
    Ok(r.passed)
}
