//! Gluing the strip to the quasi-cone `x² + y² = (|z| − 1)²`, `|z| ≥ 1`, and
//! smoothing by Minkowski convolution over `ℝ × S¹` with
//! `K_ε(t, ψ) = C(ε) exp((cos ψ − 1 − t²)/ε)`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::gaussmap::{signature_certificate, Region, ScalarFieldOracle, SurfaceSample, SurfaceSampleSet};
use crate::linalg::Matrix;
use crate::quadforms::Signature;
use crate::supportgeo::{
    curvature_positivity_certificate, field_sup_distance, reconstruct_section, theta_derivative, z_convexity_certificate,
    z_convexity_on, FieldGrid, Provenance, SupportField, TOL_CC,
};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const KERNEL_TAIL: f64 = 1e-14;
pub const MAX_HALF_WINDOW: f64 = 2.0;
/// `z` window of the closeness test.
pub const CLOSENESS_WINDOW: f64 = 10.0;
const AFFINE_TOL: f64 = 1e-9;
const TAIL_FLOOR: f64 = 1e-12;

/// Support value `|z| − 1` of the quasi-cone section, defined for `|z| ≥ 1`.
pub fn quasicone_value(z: f64) -> Option<f64> {
    (z.abs() >= 1.0).then(|| z.abs() - 1.0)
}

/// Quasi-cone support values with a per-row definedness flag. Undefined rows
/// hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialField {
    pub field: SupportField<f64>,
    pub defined: Vec<bool>,
}

pub fn quasicone_field(grid: FieldGrid) -> Result<PartialField> {
    let defined: Vec<bool> = (0..grid.nz).map(|i| quasicone_value(grid.z(i)).is_some()).collect();
    if !defined.iter().any(|&d| d) {
        return Err(Error::Precondition("grid does not reach |z| >= 1".into()));
    }
    let field = SupportField::from_fn(grid, Provenance::Cone, |z, _| quasicone_value(z).unwrap_or(0.0))?;
    Ok(PartialField { field, defined })
}

/// `F_E = max(F_S, F_K')` where the cone is defined and `F_S` elsewhere; the
/// result must be convex in `z`.
pub fn glue(strip: &SupportField<f64>, cone: &PartialField) -> Result<SupportField<f64>> {
    let grid = strip.grid;
    if cone.field.grid != grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", grid, cone.field.grid)));
    }
    let glued = SupportField::from_rows(grid, Provenance::Glued, |i| {
        let s = strip.row(i);
        if cone.defined[i] {
            s.iter().zip(cone.field.row(i)).map(|(a, b)| a.max(*b)).collect()
        } else {
            s.to_vec()
        }
    })?;
    let cert = z_convexity_certificate(&glued, TOL_CC);
    if cert.failed() {
        let w = cert.witness.clone().unwrap_or_default();
        return Err(Error::GlueConvexityFailure {
            margin: cert.margin,
            z: w.first().copied().unwrap_or(f64::NAN),
            theta: w.get(1).copied().unwrap_or(f64::NAN),
        });
    }
    Ok(glued)
}

/// Discretised kernel on the field grid. `K` is separable, so it is stored as
/// two weight vectors whose outer product has unit discrete mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingKernel {
    pub epsilon: f64,
    /// Exponent applied to the example kernel; `K^p` is the kernel for `ε/p`.
    pub power: f64,
    pub half_window: f64,
    pub dz: f64,
    pub n_theta: usize,
    /// Weights for `t = k·dz`, `k = −m..=m`.
    pub z_weights: Vec<f64>,
    /// Weights for `ψ = 2πj / n_theta`.
    pub theta_weights: Vec<f64>,
    /// `C(ε)` with respect to `dt dψ`.
    pub normalization: f64,
    /// Discrete mass with `|t| ≤ ε` and `|ψ| ≤ ε`.
    pub concentration: f64,
}

impl SmoothingKernel {
    pub fn taps(&self) -> usize {
        (self.z_weights.len() - 1) / 2
    }

    pub fn mass(&self) -> f64 {
        self.z_weights.iter().sum::<f64>() * self.theta_weights.iter().sum::<f64>()
    }

    pub fn value(&self, t: f64, psi: f64) -> f64 {
        let e = self.epsilon / self.power;
        self.normalization * ((psi.cos() - 1.0 - t * t) / e).exp()
    }

    /// The kernel for `K^p`, renormalised.
    pub fn sharpened(&self, power: f64) -> Result<Self> {
        kernel_with_power(self.epsilon, power, self.dz, self.n_theta)
    }

    pub fn concentration_certificate(&self) -> Certificate {
        Certificate::new("kernel_concentration", self.concentration >= 1.0 - self.epsilon, self.concentration).with_detail(
            format!("mass within |t|,|psi| <= {} is {:.6}; required >= {}", self.epsilon, self.concentration, 1.0 - self.epsilon),
        )
    }
}

pub fn make_kernel(epsilon: f64, dz: f64, n_theta: usize) -> Result<SmoothingKernel> {
    kernel_with_power(epsilon, 1.0, dz, n_theta)
}

fn kernel_with_power(epsilon: f64, power: f64, dz: f64, n_theta: usize) -> Result<SmoothingKernel> {
    if !(epsilon > 0.0 && epsilon <= 1.0) || !(power >= 1.0) || !(dz > 0.0) || n_theta < 8 {
        return Err(Error::Precondition(format!("kernel needs 0 < eps <= 1, power >= 1 (got {epsilon}, {power})")));
    }
    let e = epsilon / power;
    let half_window = (e * (1.0 / KERNEL_TAIL).ln()).sqrt().min(MAX_HALF_WINDOW);
    let m = (half_window / dz).floor() as usize;
    let a: Vec<f64> = (0..=2 * m)
        .map(|k| {
            let t = (k as f64 - m as f64) * dz;
            (-t * t / e).exp()
        })
        .collect();
    let dpsi = 2.0 * PI / n_theta as f64;
    let b: Vec<f64> = (0..n_theta).map(|j| (((j as f64 * dpsi).cos() - 1.0) / e).exp()).collect();
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let z_weights: Vec<f64> = a.iter().map(|v| v / sa).collect();
    let theta_weights: Vec<f64> = b.iter().map(|v| v / sb).collect();
    let near_t: f64 = (0..=2 * m).filter(|&k| (k as f64 - m as f64).abs() * dz <= epsilon).map(|k| z_weights[k]).sum();
    let near_psi: f64 = (0..n_theta)
        .filter(|&j| {
            let psi = j as f64 * dpsi;
            psi.min(2.0 * PI - psi) <= epsilon
        })
        .map(|j| theta_weights[j])
        .sum();
    Ok(SmoothingKernel {
        epsilon,
        power,
        half_window,
        dz,
        n_theta,
        z_weights,
        theta_weights,
        normalization: 1.0 / (sa * dz * sb * dpsi),
        concentration: near_t * near_psi,
    })
}

/// Circular convolution of every row with `w` via FFT.
fn convolve_theta(rows: &[f64], n: usize, w: &[f64]) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut kw: Vec<Complex<f64>> = w.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut kw);
    let scale = 1.0 / n as f64;
    let mut out = vec![0.0; rows.len()];
    out.par_chunks_mut(n).zip(rows.par_chunks(n)).for_each(|(o, r)| {
        let mut buf: Vec<Complex<f64>> = r.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kw) {
            *b *= k;
        }
        inv.process(&mut buf);
        for (x, b) in o.iter_mut().zip(&buf) {
            *x = b.re * scale;
        }
    });
    out
}

/// `F_D(z, φ) = Σ K(t, ψ) F_E(z − t, φ − ψ) Δt Δψ`. Rows past the ends of the
/// grid are continued linearly from the last two rows, so `E` must already be
/// affine in `z` over one kernel window at each end.
pub fn smooth(e: &SupportField<f64>, kernel: &SmoothingKernel) -> Result<SupportField<f64>> {
    let grid = e.grid;
    if (grid.dz() - kernel.dz).abs() > 1e-12 * kernel.dz || grid.n_theta != kernel.n_theta {
        return Err(Error::GridMismatch("kernel was discretised for another grid".into()));
    }
    let m = kernel.taps();
    let (nz, nt) = (grid.nz, grid.n_theta);
    if nz < m + 2 {
        return Err(Error::InsufficientMargin(format!("grid has {nz} rows, kernel needs more than {}", m + 2)));
    }
    for (base, next) in [(0usize, 1usize), (nz - 1, nz - 2)] {
        let (r0, r1) = (e.row(base), e.row(next));
        for k in 2..=m + 1 {
            let idx = if base == 0 { k } else { nz - 1 - k };
            let r = e.row(idx);
            for j in 0..nt {
                let pred = r0[j] + (r1[j] - r0[j]) * k as f64;
                if (r[j] - pred).abs() > AFFINE_TOL * r[j].abs().max(1.0) {
                    return Err(Error::InsufficientMargin(format!(
                        "field is not affine in z within one kernel window of z = {} (row {idx})",
                        grid.z(base)
                    )));
                }
            }
        }
    }
    let rows = convolve_theta(e.values(), nt, &kernel.theta_weights);
    let row_at = |k: isize, j: usize| -> f64 {
        if k < 0 {
            let (a, b) = (rows[j], rows[nt + j]);
            a + (a - b) * (-k) as f64
        } else if k as usize >= nz {
            let (a, b) = (rows[(nz - 1) * nt + j], rows[(nz - 2) * nt + j]);
            a + (a - b) * (k as usize - (nz - 1)) as f64
        } else {
            rows[k as usize * nt + j]
        }
    };
    let w = &kernel.z_weights;
    SupportField::from_rows(grid, Provenance::Smoothed, |i| {
        let mut out = vec![0.0; nt];
        for (k, &wk) in w.iter().enumerate() {
            let src = i as isize + m as isize - k as isize;
            for (j, o) in out.iter_mut().enumerate() {
                *o += wk * row_at(src, j);
            }
        }
        out
    })
}

/// Implicit description `P(p) = max_θ (⟨(x, y), θ̂⟩ − F(z, θ))` of a body with
/// smooth strictly convex sections; `∂D = {P = 0}` with outward gradient.
/// Derivatives of `F` are taken spectrally in `θ` and by central differences
/// in `z`, interpolated linearly between rows.
pub struct SupportBody {
    grid: FieldGrid,
    f: Vec<f64>,
    fz: Vec<f64>,
    fzz: Vec<f64>,
    fthth: Vec<f64>,
    fzth: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl SupportBody {
    pub fn new(field: &SupportField<f64>) -> Result<Self> {
        let grid = field.grid;
        let (nz, nt) = (grid.nz, grid.n_theta);
        let dz = grid.dz();
        let f = field.values().to_vec();
        let mut fz = vec![0.0; nz * nt];
        let mut fzz = vec![0.0; nz * nt];
        for i in 0..nz {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(nz - 1));
            let i_c = i.clamp(1, nz - 2);
            for j in 0..nt {
                fz[i * nt + j] = (f[hi * nt + j] - f[lo * nt + j]) / ((hi - lo) as f64 * dz);
                fzz[i * nt + j] = (f[(i_c - 1) * nt + j] - 2.0 * f[i_c * nt + j] + f[(i_c + 1) * nt + j]) / (dz * dz);
            }
        }
        let mut fthth = Vec::with_capacity(nz * nt);
        let mut fzth = Vec::with_capacity(nz * nt);
        for i in 0..nz {
            let d1 = theta_derivative(field.row(i));
            fthth.extend(theta_derivative(&d1));
            fzth.extend(theta_derivative(&fz[i * nt..(i + 1) * nt]));
        }
        let cos = (0..nt).map(|j| grid.theta(j).cos()).collect();
        let sin = (0..nt).map(|j| grid.theta(j).sin()).collect();
        Ok(Self { grid, f, fz, fzz, fthth, fzth, cos, sin })
    }

    fn row_weights(&self, z: f64) -> (usize, f64) {
        let t = ((z - self.grid.z_min) / self.grid.dz()).clamp(0.0, (self.grid.nz - 1) as f64);
        let i = (t.floor() as usize).min(self.grid.nz - 2);
        let w = t - i as f64;
        if w < 1e-9 {
            (i, 0.0)
        } else if w > 1.0 - 1e-9 {
            (i + 1, 0.0)
        } else {
            (i, w)
        }
    }

    fn lerp(&self, arr: &[f64], i: usize, w: f64, j: usize) -> f64 {
        let nt = self.grid.n_theta;
        if w == 0.0 {
            arr[i * nt + j]
        } else {
            (1.0 - w) * arr[i * nt + j] + w * arr[(i + 1) * nt + j]
        }
    }

    /// Best grid direction for `p` and the value there.
    fn argmax(&self, x: &[f64]) -> (usize, f64, usize, f64) {
        let (i, w) = self.row_weights(x[2]);
        let mut best = (0, f64::NEG_INFINITY);
        for j in 0..self.grid.n_theta {
            let v = x[0] * self.cos[j] + x[1] * self.sin[j] - self.lerp(&self.f, i, w, j);
            if v > best.1 {
                best = (j, v);
            }
        }
        (best.0, best.1, i, w)
    }
}

impl ScalarFieldOracle<f64> for SupportBody {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.argmax(x).1
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (j, _, i, w) = self.argmax(x);
        vec![self.cos[j], self.sin[j], -self.lerp(&self.fz, i, w, j)]
    }

    fn hessian(&self, x: &[f64]) -> Matrix<f64> {
        let (j, _, i, w) = self.argmax(x);
        let (c, s) = (self.cos[j], self.sin[j]);
        let radius = x[0] * c + x[1] * s + self.lerp(&self.fthth, i, w, j);
        let v = [-s, c, -self.lerp(&self.fzth, i, w, j)];
        let mut h = Matrix::zeros(3, 3);
        for r in 0..3 {
            for q in 0..3 {
                h[(r, q)] = v[r] * v[q] / radius;
            }
        }
        h[(2, 2)] -= self.lerp(&self.fzz, i, w, j);
        h
    }
}

/// Quad mesh of `∂D` over a `z` window; vertex `(r, j)` is the support point
/// of direction `θ_j` on row `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub rows: usize,
    pub n_theta: usize,
    pub z_rows: Vec<usize>,
    pub vertices: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
}

impl Mesh {
    pub fn vertex(&self, r: usize, j: usize) -> [f64; 3] {
        self.vertices[r * self.n_theta + j % self.n_theta]
    }

    /// Quads `(r, j), (r, j+1), (r+1, j+1), (r+1, j)` with the last column
    /// wrapping to the first; 0-based vertex indices.
    pub fn faces(&self) -> Vec<[usize; 4]> {
        let nt = self.n_theta;
        (0..self.rows.saturating_sub(1))
            .flat_map(|r| (0..nt).map(move |j| [r * nt + j, r * nt + (j + 1) % nt, (r + 1) * nt + (j + 1) % nt, (r + 1) * nt + j]))
            .collect()
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rows {} n_theta {}", self.rows, self.n_theta)?;
        for v in &self.vertices {
            writeln!(w, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        }
        for n in &self.normals {
            writeln!(w, "vn {:.17e} {:.17e} {:.17e}", n[0], n[1], n[2])?;
        }
        for f in self.faces() {
            writeln!(w, "f {0}//{0} {1}//{1} {2}//{2} {3}//{3}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1)?;
        }
        Ok(())
    }
}

/// Mesh of the boundary of a smoothed body for `z` in `[z_lo, z_hi]`.
pub fn export_mesh(d: &SupportField<f64>, z_lo: f64, z_hi: f64) -> Result<Mesh> {
    if matches!(d.provenance, Provenance::Strip | Provenance::Glued) {
        return Err(Error::InvalidSupport(format!("mesh export needs smooth sections, got {:?}", d.provenance)));
    }
    let grid = d.grid;
    let rows: Vec<usize> = grid.rows_in(z_lo, z_hi).collect();
    if rows.len() < 2 {
        return Err(Error::Precondition(format!("window [{z_lo}, {z_hi}] holds fewer than two grid rows")));
    }
    let nt = grid.n_theta;
    let body = SupportBody::new(d)?;
    let per_row: Vec<Result<(Vec<[f64; 3]>, Vec<[f64; 3]>)>> = rows
        .par_iter()
        .map(|&i| {
            let z = grid.z(i);
            let section = reconstruct_section(d.row(i))?;
            let verts = section.points.iter().map(|p| [p[0], p[1], z]).collect();
            let normals = (0..nt)
                .map(|j| {
                    let fz = body.fz[i * nt + j];
                    let len = (1.0 + fz * fz).sqrt();
                    [body.cos[j] / len, body.sin[j] / len, -fz / len]
                })
                .collect();
            Ok((verts, normals))
        })
        .collect();
    let mut vertices = Vec::with_capacity(rows.len() * nt);
    let mut normals = Vec::with_capacity(rows.len() * nt);
    for r in per_row {
        let (v, n) = r?;
        vertices.extend(v);
        normals.extend(n);
    }
    Ok(Mesh { rows: rows.len(), n_theta: nt, z_rows: rows, vertices, normals })
}

/// `z` window where every direction sees a strictly convex part of `E`
/// through the kernel: `|z| ≤ 1 + T_ε / 2`.
pub fn reachable_window(kernel: &SmoothingKernel) -> f64 {
    1.0 + 0.5 * kernel.half_window
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedCheckOptions {
    pub delta: f64,
    pub mesh_samples: usize,
    pub seed: u64,
}

impl Default for SmoothedCheckOptions {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, mesh_samples: 500, seed: 7 }
    }
}

/// Rows beyond `2 + T_ε`: `max_θ |F_D − F_K'|` must not increase with `|z|`
/// (up to a rounding floor).
pub fn cone_tail_certificate(d: &SupportField<f64>, kernel: &SmoothingKernel) -> Certificate {
    let grid = d.grid;
    let start = 2.0 + kernel.half_window;
    let dev = |i: usize| {
        let c = quasicone_value(grid.z(i)).unwrap_or(0.0);
        d.row(i).iter().fold(0.0_f64, |m, v| m.max((v - c).abs()))
    };
    let mut worst_increase = f64::NEG_INFINITY;
    let mut max_dev: f64 = 0.0;
    let mut at = f64::NAN;
    let mut rows = 0;
    for side in [1.0, -1.0] {
        let idx: Vec<usize> = (0..grid.nz).filter(|&i| grid.z(i) * side >= start).collect();
        let mut ordered = idx;
        if side < 0.0 {
            ordered.reverse();
        }
        rows += ordered.len();
        for w in ordered.windows(2) {
            let (a, b) = (dev(w[0]), dev(w[1]));
            max_dev = max_dev.max(a).max(b);
            if b - a > worst_increase {
                worst_increase = b - a;
                at = grid.z(w[1]);
            }
        }
    }
    if rows < 2 {
        return Certificate::not_applicable("cone_tail", "grid ends before 2 + T_eps");
    }
    Certificate::new("cone_tail", worst_increase <= TAIL_FLOOR, max_dev)
        .with_witness(vec![at])
        .with_detail(format!("max |F_D - F_K'| beyond |z| = {start:.4} is {max_dev:e}; largest increase {worst_increase:e}"))
}

/// Mesh nodes of `D` over the reachable window, drawn uniformly with a seed.
pub fn mesh_samples(d: &SupportField<f64>, kernel: &SmoothingKernel, n: usize, seed: u64) -> Result<SurfaceSampleSet<f64>> {
    let w = reachable_window(kernel);
    let mesh = export_mesh(d, -w, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let r = rng.gen_range(0..mesh.rows);
            let j = rng.gen_range(0..mesh.n_theta);
            let k = r * mesh.n_theta + j;
            SurfaceSample {
                point: mesh.vertices[k].to_vec(),
                normal: mesh.normals[k].to_vec(),
                signature: Signature::new(1, 1, 0),
            }
        })
        .collect();
    Ok(SurfaceSampleSet { samples, seed, requested: n, region: Region::new(vec![-f64::MAX, -f64::MAX, -w], vec![f64::MAX, f64::MAX, w]) })
}

/// Section curvature, z-convexity (tolerant on the whole grid, strict on the
/// reachable window), δ-closeness to `E` on `|z| ≤ 10`, the cone tail and the
/// second-form signature `(1,1)` at mesh nodes.
pub fn smoothed_certificates(
    d: &SupportField<f64>,
    e: &SupportField<f64>,
    kernel: &SmoothingKernel,
    opts: &SmoothedCheckOptions,
) -> Result<Vec<Certificate>> {
    let grid = d.grid;
    let w = reachable_window(kernel);
    let mut out = vec![curvature_positivity_certificate(d), z_convexity_certificate(d, TOL_CC)];
    let strict = z_convexity_on(d, 0.0, |i| grid.z(i).abs() <= w);
    out.push(
        Certificate::new("z_convexity_strict", strict.margin > 0.0, strict.margin)
            .with_witness(strict.witness.clone().unwrap_or_default())
            .with_detail(format!("min scaled D2_z F_D over |z| <= {w:.4}")),
    );
    let dist = field_sup_distance(d, e, -CLOSENESS_WINDOW, CLOSENESS_WINDOW)?;
    out.push(
        Certificate::new("delta_closeness", dist <= opts.delta, opts.delta - dist)
            .with_detail(format!("sup |F_D - F_E| over |z| <= {CLOSENESS_WINDOW} is {dist:e}; delta {}", opts.delta)),
    );
    out.push(cone_tail_certificate(d, kernel));
    let body = SupportBody::new(d)?;
    let samples = mesh_samples(d, kernel, opts.mesh_samples, opts.seed)?;
    let mut sig = signature_certificate(&body, &samples, Signature::new(1, 1, 0), true);
    sig.name = "hyperbolicity".into();
    out.push(sig);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FieldGrid {
        FieldGrid::symmetric(6.0, 1.0 / 64.0, 64).unwrap()
    }

    #[test]
    fn quasicone_examples() {
        assert_eq!(quasicone_value(2.0), Some(1.0));
        assert_eq!(quasicone_value(-1.0), Some(0.0));
        assert_eq!(quasicone_value(0.5), None);
        let c = quasicone_field(grid()).unwrap();
        let i = c.field.grid.nearest(0.5).unwrap();
        assert!(!c.defined[i]);
    }

    #[test]
    fn kernel_mass_and_evenness() {
        let k = make_kernel(0.05, 1.0 / 64.0, 64).unwrap();
        assert!((k.mass() - 1.0).abs() < 1e-12);
        let m = k.taps();
        for t in 0..m {
            assert_eq!(k.z_weights[t], k.z_weights[2 * m - t]);
        }
        assert!(k.z_weights.iter().chain(&k.theta_weights).all(|&v| v > 0.0));
        assert!((k.half_window - (0.05 * 1e14f64.ln()).sqrt()).abs() < 1e-12);
        assert!(k.sharpened(4.0).unwrap().concentration > k.concentration);
    }

    #[test]
    fn affine_fields_are_reproduced() {
        let g = grid();
        let k = make_kernel(0.05, g.dz(), g.n_theta).unwrap();
        let e = SupportField::from_fn(g, Provenance::Other, |z, _| 0.3 * z + 2.0).unwrap();
        let d = smooth(&e, &k).unwrap();
        let err = e.values().iter().zip(d.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12, "{err}");
        let bent = SupportField::from_fn(g, Provenance::Other, |z, _| (z - 5.9).max(0.0) + 1.0).unwrap();
        assert!(matches!(smooth(&bent, &k), Err(Error::InsufficientMargin(_))));
    }

    #[test]
    fn glue_takes_the_max() {
        let g = grid();
        let strip = SupportField::from_fn(g, Provenance::Strip, |z, t| 0.1 * (t.cos() * 1.0 + t.sin() * z).abs()).unwrap();
        let cone = quasicone_field(g).unwrap();
        let e = glue(&strip, &cone).unwrap();
        for i in 0..g.nz {
            for j in 0..g.n_theta {
                assert!(e.get(i, j) >= strip.get(i, j));
                if g.z(i).abs() < 1.0 {
                    assert_eq!(e.get(i, j), strip.get(i, j));
                }
            }
        }
        let bad = SupportField::from_fn(g, Provenance::Strip, |z, _| (-z * z).exp()).unwrap();
        assert!(matches!(glue(&bad, &cone), Err(Error::GlueConvexityFailure { .. })));
    }
}
