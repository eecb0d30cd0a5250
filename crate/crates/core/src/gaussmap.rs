//! Gauss maps and second fundamental forms of level hypersurfaces `{P = 0}`,
//! surface sampling, and the containment and radial-projection certificates.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::linalg::{householder_complement, symmetric_eigen, Matrix};
use crate::quadforms::{signature_of_eigenvalues, QuadraticForm, Signature, TOL_DEGENERATE};
use crate::scalar::{angle_between, dot, norm, Real};

pub const TOL_GRAD: f64 = 1e-12;
pub const TOL_ON_SURFACE: f64 = 1e-10;
pub const TOL_FOLD: f64 = 1e-6;

/// Value, gradient and Hessian of a defining function `P: ℝⁿ → ℝ`.
pub trait ScalarFieldOracle<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T]) -> Vec<T>;
    fn hessian(&self, x: &[T]) -> Matrix<T>;
}

/// `P(x) = q(x, x) − level`.
#[derive(Clone, Debug)]
pub struct QuadricField<T> {
    pub form: QuadraticForm<T>,
    pub level: T,
}

impl<T: Real> QuadricField<T> {
    pub fn new(form: QuadraticForm<T>, level: T) -> Self {
        Self { form, level }
    }
}

impl<T: Real> ScalarFieldOracle<T> for QuadricField<T> {
    fn dim(&self) -> usize {
        self.form.dim()
    }
    fn value(&self, x: &[T]) -> T {
        self.form.eval(x) - self.level
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        self.form.differential(x)
    }
    fn hessian(&self, _x: &[T]) -> Matrix<T> {
        self.form.matrix().scaled(T::lit(2.0))
    }
}

/// `P(x) = ⟨c, x⟩ − offset`.
#[derive(Clone, Debug)]
pub struct LinearField<T> {
    pub covector: Vec<T>,
    pub offset: T,
}

impl<T: Real> ScalarFieldOracle<T> for LinearField<T> {
    fn dim(&self) -> usize {
        self.covector.len()
    }
    fn value(&self, x: &[T]) -> T {
        dot(&self.covector, x) - self.offset
    }
    fn gradient(&self, _x: &[T]) -> Vec<T> {
        self.covector.clone()
    }
    fn hessian(&self, _x: &[T]) -> Matrix<T> {
        let n = self.dim();
        Matrix::zeros(n, n)
    }
}

/// Torus of revolution about the z-axis, centred at the origin:
/// `(√(x²+y²) − R)² + z² − r²`.
#[derive(Clone, Copy, Debug)]
pub struct TorusField<T> {
    pub major: T,
    pub minor: T,
}

impl<T: Real> ScalarFieldOracle<T> for TorusField<T> {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, x: &[T]) -> T {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        (rho - self.major).powi(2) + x[2] * x[2] - self.minor * self.minor
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let k = two * (rho - self.major) / rho;
        vec![k * x[0], k * x[1], two * x[2]]
    }
    fn hessian(&self, x: &[T]) -> Matrix<T> {
        let two = T::lit(2.0);
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let a = two * (rho - self.major) / rho;
        let b = two * self.major / (rho * rho * rho);
        let mut h = Matrix::zeros(3, 3);
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { a } else { T::zero() };
                h[(i, j)] = delta + b * x[i] * x[j];
            }
        }
        h[(2, 2)] = two;
        h
    }
}

/// `f(x) = √(a² + ε) − b` with `a = |x₁..x_k|`, `b = |x_{k+1}..x_n|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RolleField<T> {
    pub k: usize,
    pub l: usize,
    pub epsilon: T,
}

impl<T: Real> RolleField<T> {
    pub fn new(k: usize, l: usize, epsilon: T) -> Result<Self> {
        if k == 0 || l == 0 || !(epsilon > T::zero()) {
            return Err(Error::Precondition("Rolle field needs k, l >= 1 and epsilon > 0".into()));
        }
        Ok(Self { k, l, epsilon })
    }

    fn ab(&self, x: &[T]) -> (T, T) {
        (norm(&x[..self.k]), norm(&x[self.k..]))
    }

    /// The form `Q` of signature `(k, l)` this field is compared against.
    pub fn form(&self) -> QuadraticForm<T> {
        crate::quadforms::standard_form(self.k, self.l).expect("k, l >= 1")
    }
}

impl<T: Real> ScalarFieldOracle<T> for RolleField<T> {
    fn dim(&self) -> usize {
        self.k + self.l
    }
    fn value(&self, x: &[T]) -> T {
        rolle_value(self, x)
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        let (a, b) = self.ab(x);
        let s = (a * a + self.epsilon).sqrt();
        x.iter()
            .enumerate()
            .map(|(i, &xi)| if i < self.k { xi / s } else { -xi / b })
            .collect()
    }
    fn hessian(&self, x: &[T]) -> Matrix<T> {
        let (a, b) = self.ab(x);
        let s = (a * a + self.epsilon).sqrt();
        let n = self.dim();
        let mut h = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { T::one() } else { T::zero() };
                h[(i, j)] = match (i < self.k, j < self.k) {
                    (true, true) => delta / s - x[i] * x[j] / (s * s * s),
                    (false, false) => -(delta / b - x[i] * x[j] / (b * b * b)),
                    _ => T::zero(),
                };
            }
        }
        h
    }
}

/// Relative discrepancies of the oracle's gradient and Hessian against central
/// differences of its value and gradient with step `h`.
pub fn derivative_discrepancy<T: Real>(oracle: &dyn ScalarFieldOracle<T>, x: &[T], h: T) -> (T, T) {
    let n = oracle.dim();
    let g = oracle.gradient(x);
    let hess = oracle.hessian(x);
    let two = T::lit(2.0);
    let mut gerr = T::zero();
    let mut herr = T::zero();
    let gscale = norm(&g).max(T::one());
    let hscale = hess.max_abs().max(T::one());
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h;
        let vp = oracle.value(&xp);
        let gp = oracle.gradient(&xp);
        xp[i] = x[i] - h;
        let vm = oracle.value(&xp);
        let gm = oracle.gradient(&xp);
        xp[i] = x[i];
        gerr = gerr.max(((vp - vm) / (two * h) - g[i]).abs() / gscale);
        for j in 0..n {
            herr = herr.max(((gp[j] - gm[j]) / (two * h) - hess[(j, i)]).abs() / hscale);
        }
    }
    (gerr, herr)
}

fn checked_gradient<T: Real>(oracle: &dyn ScalarFieldOracle<T>, x: &[T]) -> Result<(Vec<T>, T)> {
    if x.len() != oracle.dim() {
        return Err(Error::DimensionMismatch { expected: oracle.dim(), got: x.len() });
    }
    let g = oracle.gradient(x);
    let len = norm(&g);
    if !(len > T::rel_tol(TOL_GRAD)) || !len.is_finite() {
        return Err(Error::SingularPoint { grad_norm: len.to_f64_lossy() });
    }
    Ok((g, len))
}

/// `∇P / ‖∇P‖`.
pub fn gauss_map<T: Real>(oracle: &dyn ScalarFieldOracle<T>, x: &[T]) -> Result<Vec<T>> {
    let (g, len) = checked_gradient(oracle, x)?;
    Ok(g.into_iter().map(|v| v / len).collect())
}

/// `(x₁, …, x_k, −x_{k+1}, …, −x_{k+l}) / ‖x‖`.
pub fn gauss_quadric_closed_form<T: Real>(k: usize, l: usize, x: &[T]) -> Result<Vec<T>> {
    if x.len() != k + l {
        return Err(Error::DimensionMismatch { expected: k + l, got: x.len() });
    }
    let len = norm(x);
    if len == T::zero() {
        return Err(Error::ZeroPoint);
    }
    Ok(x.iter().enumerate().map(|(i, &v)| if i < k { v / len } else { -v / len }).collect())
}

/// Hessian of `P` restricted to the tangent hyperplane (orthonormal Householder
/// basis) and divided by `‖∇P‖`; the normal is `+∇P/‖∇P‖`.
pub fn second_fundamental_form<T: Real>(oracle: &dyn ScalarFieldOracle<T>, x: &[T]) -> Result<QuadraticForm<T>> {
    let (g, len) = checked_gradient(oracle, x)?;
    let basis = householder_complement(&g).ok_or(Error::SingularPoint { grad_norm: 0.0 })?;
    let h = oracle.hessian(x);
    QuadraticForm::new(h.congruence(&basis).scaled(T::one() / len))
}

pub fn second_fundamental_signature<T: Real>(oracle: &dyn ScalarFieldOracle<T>, x: &[T]) -> Result<Signature> {
    let form = second_fundamental_form(oracle, x)?;
    Ok(crate::quadforms::signature_of(&form))
}

/// Smallest |principal curvature| over the largest; 0 for a degenerate form.
fn relative_gap<T: Real>(form: &QuadraticForm<T>) -> T {
    let ev = symmetric_eigen(form.matrix()).values;
    let big = ev.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let small = ev.iter().fold(T::infinity(), |m, &v| m.min(v.abs()));
    if big == T::zero() {
        T::zero()
    } else {
        small / big
    }
}

/// Newton projection `x ← x − P ∇P / ‖∇P‖²` onto `{P = 0}`.
pub fn project_to_surface<T: Real>(oracle: &dyn ScalarFieldOracle<T>, x0: &[T], tol: T, max_iter: usize) -> Option<Vec<T>> {
    let mut x = x0.to_vec();
    for _ in 0..max_iter {
        let p = oracle.value(&x);
        if !p.is_finite() {
            return None;
        }
        if p.abs() <= tol {
            return Some(x);
        }
        let g = oracle.gradient(&x);
        let g2 = dot(&g, &g);
        if !(g2 > T::zero()) || !g2.is_finite() {
            return None;
        }
        let step = p / g2;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * *gi;
        }
    }
    (oracle.value(&x).abs() <= tol).then_some(x)
}

/// Axis-aligned sampling box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> Region<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Self {
        Self { lo, hi }
    }

    pub fn cube(dim: usize, half: T) -> Self {
        Self { lo: vec![-half; dim], hi: vec![half; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| v >= a && v <= b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSample<T> {
    pub point: Vec<T>,
    pub normal: Vec<T>,
    pub signature: Signature,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSampleSet<T> {
    pub samples: Vec<SurfaceSample<T>>,
    pub seed: u64,
    pub requested: usize,
    pub region: Region<T>,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * inv;
        i /= b;
        inv /= base as f64;
    }
    out
}

/// Halton point `i` in the unit cube with a Cranley–Patterson shift.
fn halton(i: u64, shift: &[f64]) -> Vec<f64> {
    shift
        .iter()
        .enumerate()
        .map(|(d, &s)| (radical_inverse(i + 1, PRIMES[d % PRIMES.len()]) + s).fract())
        .collect()
}

/// Samples `n` points of `{P = 0} ∩ region` by Newton-projecting shifted Halton
/// points of the region. Points that leave the region, fail to converge or are
/// singular are discarded; at most `32 n` candidates are tried.
pub fn sample_surface<T: Real>(
    oracle: &dyn ScalarFieldOracle<T>,
    region: &Region<T>,
    n: usize,
    seed: u64,
) -> Result<SurfaceSampleSet<T>> {
    if region.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch { expected: oracle.dim(), got: region.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..region.dim()).map(|_| rng.gen::<f64>()).collect();
    let tol = T::rel_tol(TOL_ON_SURFACE);
    let batch = n.max(64);
    let mut samples = Vec::with_capacity(n);
    let mut next = 0u64;
    while samples.len() < n && next < 32 * n.max(1) as u64 {
        let found: Vec<SurfaceSample<T>> = (next..next + batch as u64)
            .into_par_iter()
            .filter_map(|i| {
                let u = halton(i, &shift);
                let x0: Vec<T> = u
                    .iter()
                    .zip(region.lo.iter().zip(&region.hi))
                    .map(|(&t, (&a, &b))| a + (b - a) * T::lit(t))
                    .collect();
                let x = project_to_surface(oracle, &x0, tol, 60)?;
                if !region.contains(&x) {
                    return None;
                }
                let normal = gauss_map(oracle, &x).ok()?;
                let signature = second_fundamental_signature(oracle, &x).ok()?;
                Some(SurfaceSample { point: x, normal, signature })
            })
            .collect();
        next += batch as u64;
        samples.extend(found);
    }
    samples.truncate(n);
    Ok(SurfaceSampleSet { samples, seed, requested: n, region: region.clone() })
}

/// Checks the second-form signature at every sample. With `pinned` the
/// orientation `+∇P` is enforced; otherwise `(p, m)` also matches `(m, p)`.
/// The margin is the smallest ratio |κ_min| / |κ_max| over passing samples.
pub fn signature_certificate<T: Real>(
    oracle: &dyn ScalarFieldOracle<T>,
    samples: &SurfaceSampleSet<T>,
    expected: Signature,
    pinned: bool,
) -> Certificate {
    let name = "second_form_signature";
    if samples.samples.is_empty() {
        return Certificate::new(name, false, 0.0).with_detail("no samples");
    }
    let results: Vec<(usize, Result<(Signature, T)>)> = samples
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let r = second_fundamental_form(oracle, &s.point).map(|f| {
                let ev = symmetric_eigen(f.matrix()).values;
                (signature_of_eigenvalues(&ev, T::rel_tol(TOL_DEGENERATE)), relative_gap(&f))
            });
            (i, r)
        })
        .collect();
    let mut margin = f64::INFINITY;
    let mut violations = 0usize;
    let mut witness = None;
    for (i, r) in results {
        let ok = match r {
            Ok((sig, gap)) => {
                margin = margin.min(gap.to_f64_lossy());
                if pinned {
                    sig == expected
                } else {
                    sig.matches_unordered(&expected)
                }
            }
            Err(_) => false,
        };
        if !ok {
            violations += 1;
            if witness.is_none() {
                witness = Some(samples.samples[i].point.iter().map(|v| v.to_f64_lossy()).collect());
            }
        }
    }
    let cert = Certificate::new(name, violations == 0, if violations == 0 { margin } else { 0.0 }).with_detail(format!(
        "{} samples, {} violations, expected {}{}",
        samples.samples.len(),
        violations,
        expected,
        if pinned { "" } else { " up to orientation" }
    ));
    match witness {
        Some(w) => cert.with_witness(w),
        None => cert,
    }
}

/// Samples the surface in `region` and checks the second-form signature up to
/// orientation.
pub fn hyperbolicity_certificate<T: Real>(
    oracle: &dyn ScalarFieldOracle<T>,
    region: &Region<T>,
    n_samples: usize,
    seed: u64,
    expected: Signature,
) -> Result<Certificate> {
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be >= 1".into()));
    }
    let samples = sample_surface(oracle, region, n_samples, seed)?;
    Ok(signature_certificate(oracle, &samples, expected, false))
}

pub fn rolle_value<T: Real>(field: &RolleField<T>, x: &[T]) -> T {
    let (a, b) = field.ab(x);
    (a * a + field.epsilon).sqrt() - b
}

/// At a point with `f < 0`, `df` must be proportional to `dQ` at the point whose
/// last `l` coordinates are scaled by `λ = (b + t)/b`, `t = f(x)`, and that point
/// must lie on `{Q = −ε}`.
pub fn rolle_gradient_identity_check<T: Real>(field: &RolleField<T>, x: &[T]) -> Result<Certificate> {
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: x.len() });
    }
    let (_, b) = field.ab(x);
    let t = rolle_value(field, x);
    if !(b > T::rel_tol(1e-12)) {
        return Err(Error::Precondition("Rolle identity needs b > 0".into()));
    }
    if !(t < T::zero()) {
        return Err(Error::Precondition(format!("Rolle identity needs f < 0 (f = {t})")));
    }
    let lambda = (b + t) / b;
    let scaled: Vec<T> = x.iter().enumerate().map(|(i, &v)| if i < field.k { v } else { lambda * v }).collect();
    let q = field.form();
    let df = field.gradient(x);
    let dq = q.differential(&scaled);
    let angle = angle_between(&df, &dq);
    let on_level = (q.eval(&scaled) + field.epsilon).abs();
    let passed = angle < T::rel_tol(1e-8) && on_level < T::rel_tol(1e-10);
    Ok(Certificate::new("rolle_gradient_identity", passed, angle.to_f64_lossy())
        .with_detail(format!("angle {:e} rad, |Q(scaled)+eps| {:e}", angle.to_f64_lossy(), on_level.to_f64_lossy()))
        .with_witness(scaled.iter().map(|v| v.to_f64_lossy()).collect()))
}

/// Gradient identity at `n` random points of `[−2, 2]^{k+l}` with `f < 0` and
/// `b > 0.1`; the margin is the largest angle found.
pub fn rolle_certificate<T: Real>(k: usize, l: usize, epsilon: T, n: usize, seed: u64) -> Result<Certificate> {
    let field = RolleField::new(k, l, epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut failures, mut tries) = (0usize, 0usize, 0usize);
    let mut worst = 0.0f64;
    while checked < n {
        tries += 1;
        if tries > 1000 * n.max(1) {
            return Err(Error::Precondition("too few points with f < 0".into()));
        }
        let x: Vec<T> = (0..k + l).map(|_| T::lit(rng.gen_range(-2.0..2.0))).collect();
        if rolle_value(&field, &x) >= T::zero() || norm(&x[k..]) <= T::lit(0.1) {
            continue;
        }
        checked += 1;
        let c = rolle_gradient_identity_check(&field, &x)?;
        worst = worst.max(c.margin);
        failures += usize::from(!c.passed());
    }
    Ok(Certificate::new("rolle_identity", failures == 0, worst)
        .with_detail(format!("{n} points, {failures} failures, largest angle {worst:e} rad")))
}

/// Minimum of the Rolle function over the samples; the surface avoids
/// `{Q < −ε}` iff it is nonnegative.
pub fn containment_certificate<T: Real>(samples: &SurfaceSampleSet<T>, k: usize, l: usize, epsilon: T) -> Result<Certificate> {
    let field = RolleField::new(k, l, epsilon)?;
    if samples.samples.is_empty() {
        return Err(Error::Precondition("empty sample set".into()));
    }
    let mut worst = T::infinity();
    let mut witness = &samples.samples[0].point;
    for s in &samples.samples {
        if s.point.len() != k + l {
            return Err(Error::DimensionMismatch { expected: k + l, got: s.point.len() });
        }
        let v = rolle_value(&field, &s.point);
        if v < worst {
            worst = v;
            witness = &s.point;
        }
    }
    let passed = worst >= -T::rel_tol(TOL_ON_SURFACE);
    Ok(Certificate::new("rolle_containment", passed, worst.to_f64_lossy())
        .with_witness(witness.iter().map(|v| v.to_f64_lossy()).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjectivityOptions {
    pub cell_degrees: f64,
    pub tol_fold: f64,
    /// Samples closer than this multiple of their nearest-neighbour spacing are
    /// treated as neighbours on one sheet.
    pub link_factor: f64,
}

impl Default for InjectivityOptions {
    fn default() -> Self {
        Self { cell_degrees: 1.0, tol_fold: TOL_FOLD, link_factor: 2.5 }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Radial projection `x ↦ x/‖x‖` restricted to the sampled surface is checked
/// for (i) folds: a tangent plane through the origin, and (ii) overlaps: a
/// spherical cell whose samples split into several sheets, where samples in the
/// surrounding 3×3 cell block are linked when closer than `link_factor` times
/// their nearest-neighbour spacing or when the chord between them is nearly
/// tangent at both ends.
pub fn radial_projection_injectivity<T: Real>(samples: &SurfaceSampleSet<T>, opts: InjectivityOptions) -> Result<Certificate> {
    let name = "radial_projection_injectivity";
    if samples.samples.iter().any(|s| s.point.len() != 3) {
        return Err(Error::Precondition("radial projection check needs ambient dimension 3".into()));
    }
    let pts: Vec<[f64; 3]> = samples
        .samples
        .iter()
        .map(|s| [s.point[0].to_f64_lossy(), s.point[1].to_f64_lossy(), s.point[2].to_f64_lossy()])
        .collect();
    if pts.is_empty() {
        return Ok(Certificate::new(name, false, 0.0).with_detail("no samples"));
    }

    let mut fold_margin = f64::INFINITY;
    for (s, p) in samples.samples.iter().zip(&pts) {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r == 0.0 {
            return Ok(Certificate::new(name, false, 0.0).with_witness(p.to_vec()).with_detail("sample at the origin"));
        }
        let np = s.normal.iter().zip(p).map(|(n, x)| n.to_f64_lossy() * x).sum::<f64>().abs() / r;
        if np <= opts.tol_fold {
            return Ok(Certificate::new(name, false, np)
                .with_witness(p.to_vec())
                .with_detail("fold: tangent plane passes through the origin"));
        }
        fold_margin = fold_margin.min(np);
    }

    let cell = opts.cell_degrees.to_radians();
    let n_lat = (std::f64::consts::PI / cell).ceil() as i64;
    let n_lon = (2.0 * std::f64::consts::PI / cell).ceil() as i64;
    let key = |p: &[f64; 3]| -> (i64, i64) {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let polar = (p[2] / r).clamp(-1.0, 1.0).acos();
        let lon = p[1].atan2(p[0]) + std::f64::consts::PI;
        (((polar / cell) as i64).min(n_lat - 1), ((lon / cell) as i64).rem_euclid(n_lon))
    };
    let mut cells: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }

    let nn: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            pts.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| dist3(&pts[i], q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let normals: Vec<[f64; 3]> = samples
        .samples
        .iter()
        .map(|s| [s.normal[0].to_f64_lossy(), s.normal[1].to_f64_lossy(), s.normal[2].to_f64_lossy()])
        .collect();
    let radial_slope = |i: usize| -> f64 {
        let p = &pts[i];
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        (normals[i][0] * p[0] + normals[i][1] * p[1] + normals[i][2] * p[2]).abs() / r
    };
    // a chord between two sheets stacked along a ray is close to radial, so its
    // normal component matches the radial one; a chord within one sheet is
    // nearly tangent at both ends
    let chord_is_tangent = |p: usize, q: usize| -> bool {
        let d = [pts[q][0] - pts[p][0], pts[q][1] - pts[p][1], pts[q][2] - pts[p][2]];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if len == 0.0 {
            return true;
        }
        let bound = 0.5 * radial_slope(p).min(radial_slope(q)) * len;
        [p, q].iter().all(|&i| (normals[i][0] * d[0] + normals[i][1] * d[1] + normals[i][2] * d[2]).abs() <= bound)
    };

    let mut keys: Vec<&(i64, i64)> = cells.keys().collect();
    keys.sort();
    let collision = keys.par_iter().find_map_first(|&&(a, b)| {
        let center = &cells[&(a, b)];
        if center.len() < 2 {
            return None;
        }
        let mut members: Vec<usize> = Vec::new();
        for da in -1..=1 {
            for db in -1..=1 {
                let k = (a + da, (b + db).rem_euclid(n_lon));
                if let Some(v) = cells.get(&k) {
                    members.extend(v);
                }
            }
        }
        let mut uf = UnionFind::new(members.len());
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let (p, q) = (members[i], members[j]);
                let d = dist3(&pts[p], &pts[q]);
                if d <= opts.link_factor * nn[p].max(nn[q]) || chord_is_tangent(p, q) {
                    uf.union(i, j);
                }
            }
        }
        let roots: std::collections::HashSet<usize> =
            (0..members.len()).filter(|&i| center.contains(&members[i])).map(|i| uf.find(i)).collect();
        (roots.len() > 1).then(|| center.clone())
    });
    Ok(match collision {
        Some(idx) => Certificate::new(name, false, 0.0)
            .with_witness(idx.iter().flat_map(|&i| pts[i]).collect())
            .with_detail(format!("{} samples from distinct sheets share one spherical cell", idx.len())),
        None => Certificate::new(name, true, fold_margin)
            .with_detail(format!("{} samples over {} cells", pts.len(), cells.len())),
    })
}

impl<T: Real> SurfaceSampleSet<T> {
    /// CSV with header `x0..,n0..,sig_plus,sig_minus,sig_zero`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dim = self.region.dim();
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        header.extend((0..dim).map(|i| format!("n{i}")));
        header.extend(["sig_plus", "sig_minus", "sig_zero"].map(String::from));
        wr.write_record(&header).map_err(csv_err)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.point.iter().chain(&s.normal).map(|v| format!("{:e}", v.to_f64_lossy())).collect();
            rec.extend([s.signature.plus, s.signature.minus, s.signature.zero].map(|v| v.to_string()));
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let cols = rd.headers().map_err(csv_err)?.len();
        if cols < 5 || (cols - 3) % 2 != 0 {
            return Err(Error::Format(format!("unexpected column count {cols}")));
        }
        let dim = (cols - 3) / 2;
        let mut samples = Vec::new();
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| Error::Format(format!("bad field {i}")))
            };
            let int = |i: usize| -> Result<usize> {
                rec.get(i).and_then(|s| s.trim().parse::<usize>().ok()).ok_or_else(|| Error::Format(format!("bad field {i}")))
            };
            let point: Vec<T> = (0..dim).map(|i| num(i).map(T::lit)).collect::<Result<_>>()?;
            let normal: Vec<T> = (dim..2 * dim).map(|i| num(i).map(T::lit)).collect::<Result<_>>()?;
            for (i, &v) in point.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
            let signature = Signature::new(int(2 * dim)?, int(2 * dim + 1)?, int(2 * dim + 2)?);
            samples.push(SurfaceSample { point, normal, signature });
        }
        let requested = samples.len();
        Ok(Self { samples, seed: 0, requested, region: Region::new(lo, hi) })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
