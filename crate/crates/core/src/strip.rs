//! Ruled convex-concave strips `(u₁ + t f₁, u₂ + t f₂, z)`, `|t| ≤ 1`, where
//! `f'' = g f` and the midpoint curve solves `u'' = ρ f` for a compactly
//! supported perturbation `ρ` with `|ρ| < g`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::linalg::{null_space, symmetric_eigen, Matrix};
use crate::ode::{integrate_linear, integrate_linear_refined, second_order};
use crate::supportgeo::{FieldGrid, Provenance, SupportField, TOL_CC};

pub const DEFAULT_Z_MAX: f64 = 4.0;
pub const DEFAULT_STEP: f64 = 1.0 / 1024.0;
pub const DEFAULT_BASIS_SIZE: usize = 8;
pub const TOL_ODE: f64 = 1e-8;
pub const TOL_SUPPORT: f64 = 1e-9;
const KERNEL_REL_TOL: f64 = 1e-8;
const TAIL_TOL: f64 = 1e-9;

/// Values and first derivatives of a function on a uniform grid. Evaluation
/// between nodes is cubic Hermite; outside the grid it extends linearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub z_min: f64,
    pub z_max: f64,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl SampledFunction {
    pub fn new(z_min: f64, z_max: f64, values: Vec<f64>, derivatives: Vec<f64>) -> Result<Self> {
        if !(z_min < z_max) || values.len() < 2 || values.len() != derivatives.len() {
            return Err(Error::Precondition(format!(
                "sampled function needs z_min < z_max and matching arrays of length >= 2 (got {}, {})",
                values.len(),
                derivatives.len()
            )));
        }
        Ok(Self { z_min, z_max, values, derivatives })
    }

    /// Samples `f(z) -> (value, derivative)` on `n` nodes.
    pub fn from_fn(z_min: f64, z_max: f64, n: usize, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let h = (z_max - z_min) / (n.max(2) - 1) as f64;
        let (values, derivatives) = (0..n).map(|i| f(z_min + i as f64 * h)).unzip();
        Self::new(z_min, z_max, values, derivatives)
    }

    /// Symmetric grid `[−z_max, z_max]` with `z = 0` on a node.
    pub fn symmetric(z_max: f64, step: f64, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let half = (z_max / step).round() as usize;
        let zm = half as f64 * step;
        Self::from_fn(-zm, zm, 2 * half + 1, f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.z_max - self.z_min) / (self.len() - 1) as f64
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.step()
    }

    /// Node index of `z` when `z` is (to rounding) a grid node.
    pub fn node(&self, z: f64) -> Option<usize> {
        let t = (z - self.z_min) / self.step();
        let i = t.round();
        ((t - i).abs() < 1e-6 && i >= 0.0 && i < self.len() as f64).then_some(i as usize)
    }

    fn locate(&self, z: f64) -> (usize, f64) {
        let t = (z - self.z_min) / self.step();
        let i = (t.floor().max(0.0) as usize).min(self.len() - 2);
        (i, t - i as f64)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.eval_both(z).0
    }

    pub fn eval_derivative(&self, z: f64) -> f64 {
        self.eval_both(z).1
    }

    /// Value and derivative at `z`.
    pub fn eval_both(&self, z: f64) -> (f64, f64) {
        let n = self.len();
        if z <= self.z_min {
            let d = self.derivatives[0];
            return (self.values[0] + d * (z - self.z_min), d);
        }
        if z >= self.z_max {
            let d = self.derivatives[n - 1];
            return (self.values[n - 1] + d * (z - self.z_max), d);
        }
        let h = self.step();
        let (i, t) = self.locate(z);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivatives[i], self.derivatives[i + 1]);
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1;
        let d = ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1;
        (v, d)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            z_min: self.z_min,
            z_max: self.z_max,
            values: self.values.iter().map(|v| v * s).collect(),
            derivatives: self.derivatives.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |f(z) ∓ f(−z)|` over the grid, which must be symmetric.
    pub fn asymmetry(&self, parity: Parity) -> f64 {
        let n = self.len();
        (0..n / 2 + 1)
            .map(|i| {
                let (a, b) = (self.values[i], self.values[n - 1 - i]);
                match parity {
                    Parity::Even => (a - b).abs(),
                    Parity::Odd => (a + b).abs(),
                }
            })
            .fold(0.0, f64::max)
    }

    /// Largest discrepancy between the stored derivatives and fourth-order
    /// central differences of the values, at interior nodes.
    pub fn derivative_consistency(&self) -> f64 {
        let h = self.step();
        (2..self.len().saturating_sub(2))
            .map(|i| {
                let v = &self.values;
                let fd = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
                (fd - self.derivatives[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |D⁴ f − c f|` over interior nodes with a five-point fourth-order
    /// second difference, for residuals of `f'' = c f`.
    pub fn second_order_residual(&self, c: impl Fn(f64) -> f64) -> f64 {
        let h2 = self.step() * self.step();
        let v = &self.values;
        (2..self.len().saturating_sub(2))
            .map(|i| {
                let d2 = (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2]) / (12.0 * h2);
                (d2 - c(self.z(i)) * v[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `g(z) = exp(−1/(1 − z²))` on `|z| < 1`, zero elsewhere, with its derivative.
pub fn bump(z: f64) -> (f64, f64) {
    if z.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let w = 1.0 - z * z;
    let v = (-1.0 / w).exp();
    (v, v * (-2.0 * z / (w * w)))
}

pub fn default_g(z_max: f64, step: f64) -> Result<SampledFunction> {
    SampledFunction::symmetric(z_max, step, bump)
}

pub fn zero_function(z_max: f64, step: f64) -> Result<SampledFunction> {
    SampledFunction::symmetric(z_max, step, |_| (0.0, 0.0))
}

fn require_symmetric(f: &SampledFunction) -> Result<()> {
    if (f.z_min + f.z_max).abs() > 1e-12 * f.z_max || f.len() % 2 == 0 {
        return Err(Error::Precondition("grid must be symmetric about z = 0 with a node at 0".into()));
    }
    Ok(())
}

/// Even `f₁` (`f₁(0) = 1, f₁'(0) = 0`) and odd `f₂` (`f₂(0) = 0, f₂'(0) = 1`)
/// solving `f'' = g f`, integrated outwards from 0 on the grid of `g`. A run
/// with ten substeps per node serves as reference; its discrepancy must stay
/// below `tol · max|f|`.
pub fn solve_even_odd(g: &SampledFunction, tol: f64) -> Result<(SampledFunction, SampledFunction)> {
    require_symmetric(g)?;
    if g.z_max < 2.0 {
        return Err(Error::Precondition(format!("z_max must be >= 2 (got {})", g.z_max)));
    }
    if g.asymmetry(Parity::Even) > 1e-12 * g.max_abs().max(1.0) {
        return Err(Error::Precondition("g must be even".into()));
    }
    let mid = (g.len() - 1) / 2;
    let h = g.step();
    let a = |z: f64| second_order(g.eval(z));
    let solve = |init: [f64; 2]| -> Result<SampledFunction> {
        let runs: Vec<Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)>> = [h, -h]
            .par_iter()
            .map(|&hh| {
                let coarse = integrate_linear(a, 0.0, &init, hh, mid)?;
                let fine = integrate_linear_refined(a, 0.0, &init, hh, mid, 10)?;
                Ok((coarse, fine))
            })
            .collect();
        let mut values = vec![0.0; g.len()];
        let mut derivs = vec![0.0; g.len()];
        let mut discrepancy: f64 = 0.0;
        for (dir, run) in runs.into_iter().enumerate() {
            let (coarse, fine) = run?;
            for s in 0..=mid {
                let idx = if dir == 0 { mid + s } else { mid - s };
                values[idx] = coarse[s][0];
                derivs[idx] = coarse[s][1];
                discrepancy = discrepancy.max((coarse[s][0] - fine[s][0]).abs());
            }
        }
        let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if discrepancy > tol * scale {
            return Err(Error::IntegratorFailure {
                z: g.z_max,
                reason: format!("reference run differs by {discrepancy:e}; refine the grid"),
            });
        }
        SampledFunction::new(g.z_min, g.z_max, values, derivs)
    };
    Ok((solve([1.0, 0.0])?, solve([0.0, 1.0])?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub f1: SampledFunction,
    pub f2: SampledFunction,
    pub scale: f64,
}

/// Uniform factor `s ≤ 1` making `f₁²(±2) + f₂²(±2) ≤ 1/4` and the squared
/// asymptotic slopes `f₁'² + f₂'² ≤ 1/2` at the grid ends.
pub fn rescale_for_cone(f1: &SampledFunction, f2: &SampledFunction) -> Rescaled {
    let at2 = [2.0, -2.0].iter().map(|&z| f1.eval(z).powi(2) + f2.eval(z).powi(2)).fold(0.0, f64::max);
    let slope = [f1.z_min, f1.z_max]
        .iter()
        .map(|&z| f1.eval_derivative(z).powi(2) + f2.eval_derivative(z).powi(2))
        .fold(0.0, f64::max);
    let mut s: f64 = 1.0;
    if at2 > 0.0 {
        s = s.min((0.25 / at2).sqrt());
    }
    if slope > 0.0 {
        s = s.min((0.5 / slope).sqrt());
    }
    Rescaled { f1: f1.scaled(s), f2: f2.scaled(s), scale: s }
}

/// `β_j(z) = cos(2jπz) exp(−1/(1 − 4z²))` on `|z| < 1/2` and its derivative.
pub fn bump_basis(j: usize, z: f64) -> (f64, f64) {
    let y = 2.0 * z;
    if y.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let w = 1.0 - y * y;
    let e = (-1.0 / w).exp();
    let de = e * (-8.0 * z / (w * w));
    let k = 2.0 * j as f64 * PI;
    let (s, c) = (k * z).sin_cos();
    (c * e, -k * s * e + c * de)
}

/// Joint state `(f, f', u, u')` for `u'' = c(z) f`, `f'' = g f`, integrated on
/// the grid of `f` from node `z_start` with `u = u' = 0`, for `steps` nodes.
fn integrate_midpoint(
    g: &SampledFunction,
    f: &SampledFunction,
    c: &(dyn Fn(f64) -> f64 + Sync),
    z_start: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let a = |z: f64| {
        let mut m = Matrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = g.eval(z);
        m[(2, 3)] = 1.0;
        m[(3, 0)] = c(z);
        m
    };
    let i0 = f.node(z_start).ok_or_else(|| Error::Precondition(format!("{z_start} is not a grid node")))?;
    integrate_linear(a, z_start, &[f.values[i0], f.derivatives[i0], 0.0, 0.0], f.step(), steps)
}

/// Result of the kernel construction for `ρ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoConstruction {
    pub rho: SampledFunction,
    /// Coefficients of `ρ` in the bump basis `β_0, β_2, …`.
    pub coefficients: Vec<f64>,
    /// Singular values of the 4×m obstruction matrix, largest first.
    pub singular_values: Vec<f64>,
    pub kernel_dim: usize,
    /// Predicted `∫ d²` of the perpendicular midpoint displacement per unit `∫ (ρ/g)²`.
    pub displacement_gain: f64,
}

/// Four tail functionals `(a₁₁, a₁₀, a₂₁, a₂₀)` of `u_i(z) = a_{i1} z + a_{i0}`
/// on `z ≥ 1/2` for `u_i'' = c f_i` started at `z = −1`, and the displacement
/// profiles on `[−1/2, 1/2]`.
fn tail_functionals(
    g: &SampledFunction,
    f1: &SampledFunction,
    f2: &SampledFunction,
    c: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<([f64; 4], Vec<[f64; 2]>)> {
    let h = f1.step();
    let steps = (1.5 / h).round() as usize;
    let half = (0.5 / h).round() as usize;
    let r1 = integrate_midpoint(g, f1, c, -1.0, steps)?;
    let r2 = integrate_midpoint(g, f2, c, -1.0, steps)?;
    let (y1, y2) = (&r1[steps], &r2[steps]);
    let tail = [y1[3], y1[2] - 0.5 * y1[3], y2[3], y2[2] - 0.5 * y2[3]];
    let profile = (half..=steps).map(|s| [r1[s][2], r2[s][2]]).collect();
    Ok((tail, profile))
}

/// Even `ρ` supported in `[−1/2, 1/2]` for which all four tail functionals of
/// `u_i'' = ρ f_i` vanish. Among kernel vectors of the obstruction matrix the
/// one maximising the perpendicular midpoint displacement `∫ d²` relative to
/// `∫ (ρ/g)²` is taken; it is then scaled to `max |ρ/g| = 1/2`.
pub fn build_rho(g: &SampledFunction, f1: &SampledFunction, f2: &SampledFunction, m: usize) -> Result<RhoConstruction> {
    if m < 6 {
        return Err(Error::Precondition(format!("basis size must be >= 6 (got {m})")));
    }
    require_symmetric(g)?;
    let h = g.step();
    let half = (0.5 / h).round() as usize;
    let zs: Vec<f64> = (0..=2 * half).map(|s| -0.5 + s as f64 * h).collect();

    let per_basis: Vec<Result<([f64; 4], Vec<[f64; 2]>)>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let j = 2 * k;
            let c = move |z: f64| bump_basis(j, z).0;
            tail_functionals(g, f1, f2, &c)
        })
        .collect();
    let mut obstruction = Matrix::zeros(4, m);
    let mut displacement = vec![vec![0.0; zs.len()]; m];
    for (k, r) in per_basis.into_iter().enumerate() {
        let (tail, profile) = r?;
        for (row, v) in tail.iter().enumerate() {
            obstruction[(row, k)] = *v;
        }
        for (s, (&z, u)) in zs.iter().zip(&profile).enumerate() {
            let (a, b) = (f1.eval(z), f2.eval(z));
            displacement[k][s] = (u[0] * b - u[1] * a) / (a * a + b * b).sqrt();
        }
    }

    let (kernel, singular_values) = null_space(&obstruction, KERNEL_REL_TOL);
    if kernel.is_empty() {
        return Err(Error::NoKernelVector(format!("singular values {singular_values:?}")));
    }
    let kd = kernel.len();

    // Gram matrices of displacement and of ρ/g in basis coordinates
    let interior: Vec<f64> = zs.iter().copied().filter(|z| z.abs() < 0.5 && g.eval(*z) > 1e-12).collect();
    let ratios: Vec<Vec<f64>> = (0..m)
        .map(|k| interior.iter().map(|&z| bump_basis(2 * k, z).0 / g.eval(z)).collect())
        .collect();
    let gram = |rows: &[Vec<f64>]| {
        let mut out = Matrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum::<f64>() * h;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        out
    };
    let (gd, gr) = (gram(&displacement), gram(&ratios));
    let kmat = Matrix::from_columns(&kernel);
    let a = gd.congruence(&kmat).symmetrized();
    let b = gr.congruence(&kmat).symmetrized();
    let l = b.cholesky().ok_or_else(|| Error::NoKernelVector("ratio Gram matrix not positive definite".into()))?;
    // C = L⁻¹ A L⁻ᵀ
    let solve_cols = |m: &Matrix<f64>| -> Result<Matrix<f64>> {
        let cols = (0..kd)
            .map(|c| l.solve(&m.column(c), 1e-300).ok_or_else(|| Error::NoKernelVector("singular Cholesky factor".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_columns(&cols))
    };
    let x = solve_cols(&a)?;
    let cmat = solve_cols(&x.transpose())?.symmetrized();
    let eig = symmetric_eigen(&cmat);
    let w = eig.vectors.column(kd - 1);
    let y = l.transpose().solve(&w, 1e-300).ok_or_else(|| Error::NoKernelVector("singular Cholesky factor".into()))?;
    let mut coefficients = kmat.matvec(&y);

    let rho_at = |c: &[f64], z: f64| -> (f64, f64) {
        c.iter().enumerate().fold((0.0, 0.0), |acc, (k, &ck)| {
            let (v, d) = bump_basis(2 * k, z);
            (acc.0 + ck * v, acc.1 + ck * d)
        })
    };
    if rho_at(&coefficients, 0.0).0 < 0.0 {
        coefficients.iter_mut().for_each(|c| *c = -*c);
    }
    let ratio = interior.iter().map(|&z| (rho_at(&coefficients, z).0 / g.eval(z)).abs()).fold(0.0, f64::max);
    if !(ratio > 0.0) {
        return Err(Error::NoKernelVector("kernel vector gives rho = 0".into()));
    }
    coefficients.iter_mut().for_each(|c| *c *= 0.5 / ratio);
    let rho = SampledFunction::from_fn(g.z_min, g.z_max, g.len(), |z| rho_at(&coefficients, z))?;
    Ok(RhoConstruction { rho, coefficients, singular_values, kernel_dim: kd, displacement_gain: eig.values[kd - 1] })
}

/// `u_i'' = ρ f_i`, integrated jointly with `f_i` from `z = −1` with zero
/// data; `u_i ≡ 0` below `−1`.
pub fn solve_u(
    g: &SampledFunction,
    rho: &SampledFunction,
    f1: &SampledFunction,
    f2: &SampledFunction,
) -> Result<(SampledFunction, SampledFunction)> {
    require_symmetric(rho)?;
    let outside = (0..rho.len()).filter(|&i| rho.z(i).abs() >= 0.5).map(|i| rho.values[i].abs()).fold(0.0, f64::max);
    if outside > 1e-300 {
        return Err(Error::Precondition(format!("rho must vanish on |z| >= 1/2 (found {outside:e})")));
    }
    let n = rho.len();
    let start = f1.node(-1.0).ok_or_else(|| Error::Precondition("z = -1 must be a grid node".into()))?;
    let steps = n - 1 - start;
    let c = |z: f64| rho.eval(z);
    let build = |f: &SampledFunction| -> Result<SampledFunction> {
        let run = integrate_midpoint(g, f, &c, -1.0, steps)?;
        let mut values = vec![0.0; n];
        let mut derivs = vec![0.0; n];
        for (s, y) in run.iter().enumerate() {
            values[start + s] = y[2];
            derivs[start + s] = y[3];
        }
        SampledFunction::new(rho.z_min, rho.z_max, values, derivs)
    };
    Ok((build(f1)?, build(f2)?))
}

/// Assembled strip: direction curve `(f₁, f₂)` (already rescaled) and midpoint
/// curve `(u₁, u₂)` on a common grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripModel {
    pub g: SampledFunction,
    pub rho: SampledFunction,
    pub f1: SampledFunction,
    pub f2: SampledFunction,
    pub u1: SampledFunction,
    pub u2: SampledFunction,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripOptions {
    pub z_max: f64,
    pub step: f64,
    pub basis_size: usize,
    pub tol_ode: f64,
    /// Multiplier applied to the constructed `ρ`; 0 gives the unperturbed strip.
    pub rho_scale: f64,
    /// Use `g ≡ 0`, the ruled-quadric strip.
    pub degenerate: bool,
}

impl Default for StripOptions {
    fn default() -> Self {
        Self {
            z_max: DEFAULT_Z_MAX,
            step: DEFAULT_STEP,
            basis_size: DEFAULT_BASIS_SIZE,
            tol_ode: TOL_ODE,
            rho_scale: 1.0,
            degenerate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripBuild {
    pub model: StripModel,
    pub rho: Option<RhoConstruction>,
}

/// Runs the whole construction: g, the even/odd solutions, rescaling, ρ and
/// the midpoint curve.
pub fn build_strip(opts: &StripOptions) -> Result<StripBuild> {
    let g = if opts.degenerate { zero_function(opts.z_max, opts.step)? } else { default_g(opts.z_max, opts.step)? };
    let (f1, f2) = solve_even_odd(&g, opts.tol_ode).map_err(|e| e.at_stage("solve_even_odd", "refine the grid step"))?;
    let Rescaled { f1, f2, scale } = rescale_for_cone(&f1, &f2);
    let (rho, construction) = if opts.degenerate || opts.rho_scale == 0.0 {
        (zero_function(opts.z_max, opts.step)?, None)
    } else {
        let c = build_rho(&g, &f1, &f2, opts.basis_size).map_err(|e| e.at_stage("build_rho", "increase the basis size"))?;
        (c.rho.scaled(opts.rho_scale), Some(c))
    };
    let (u1, u2) = solve_u(&g, &rho, &f1, &f2).map_err(|e| e.at_stage("solve_u", "refine the grid step"))?;
    Ok(StripBuild { model: StripModel { g, rho, f1, f2, u1, u2, scale }, rho: construction })
}

impl StripModel {
    pub fn z_range(&self) -> (f64, f64) {
        (self.f1.z_min, self.f1.z_max)
    }

    /// Midpoint and half-direction of the section at `z`. Beyond the grid the
    /// curves continue linearly, which is exact once `g` and `ρ` vanish.
    pub fn section(&self, z: f64) -> ([f64; 2], [f64; 2]) {
        ([self.u1.eval(z), self.u2.eval(z)], [self.f1.eval(z), self.f2.eval(z)])
    }

    /// Ends of the grid where the linear continuation is valid.
    pub fn extends_linearly(&self) -> bool {
        let n = self.g.len();
        self.g.values[0] == 0.0 && self.g.values[n - 1] == 0.0 && self.rho.values[0] == 0.0 && self.rho.values[n - 1] == 0.0
    }

    /// Distance from `(x, y)` to the segment section at `z`.
    pub fn segment_distance(&self, z: f64, p: [f64; 2]) -> f64 {
        let (c, d) = self.section(z);
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = if l2 > 0.0 { ((dx * d[0] + dy * d[1]) / l2).clamp(-1.0, 1.0) } else { 0.0 };
        (dx - t * d[0]).hypot(dy - t * d[1])
    }

    pub fn diagnostics(&self) -> StripDiagnostics {
        let g = &self.g;
        let scale_f = self.f1.max_abs().max(self.f2.max_abs());
        let ode_f = self.f1.second_order_residual(|z| g.eval(z)).max(self.f2.second_order_residual(|z| g.eval(z))) / scale_f;
        let ode_u = {
            let r1 = residual_u(&self.u1, &self.rho, &self.f1);
            let r2 = residual_u(&self.u2, &self.rho, &self.f2);
            r1.max(r2) / self.rho.max_abs().max(1e-300) / scale_f
        };
        let parity = self
            .f1
            .asymmetry(Parity::Even)
            .max(self.f2.asymmetry(Parity::Odd))
            .max(self.u1.asymmetry(Parity::Even))
            .max(self.u2.asymmetry(Parity::Odd));
        let tail = (0..self.u1.len())
            .filter(|&i| self.u1.z(i).abs() >= 0.5)
            .map(|i| {
                self.u1.values[i]
                    .abs()
                    .max(self.u2.values[i].abs())
                    .max(self.u1.derivatives[i].abs())
                    .max(self.u2.derivatives[i].abs())
            })
            .fold(0.0, f64::max);
        let dominance = (0..g.len())
            .filter(|&i| g.values[i] > 1e-12)
            .map(|i| self.rho.values[i].abs() / g.values[i])
            .fold(0.0, f64::max);
        let w0 = wronskian_at(self, (self.f1.len() - 1) / 2);
        let wronskian_drift = (0..self.f1.len()).map(|i| (wronskian_at(self, i) - w0).abs()).fold(0.0, f64::max) / w0.abs();
        StripDiagnostics {
            ode_residual_f: ode_f,
            ode_residual_u: ode_u,
            parity_asymmetry: parity,
            tail_max: tail,
            max_rho_over_g: dominance,
            wronskian_drift,
            nonproportionality: nonproportionality(&self.rho, g),
        }
    }
}

fn residual_u(u: &SampledFunction, rho: &SampledFunction, f: &SampledFunction) -> f64 {
    let h2 = u.step() * u.step();
    let v = &u.values;
    (2..u.len() - 2)
        .map(|i| {
            let d2 = (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2]) / (12.0 * h2);
            (d2 - rho.values[i] * f.values[i]).abs()
        })
        .fold(0.0, f64::max)
}

fn wronskian_at(s: &StripModel, i: usize) -> f64 {
    s.f1.values[i] * s.f2.derivatives[i] - s.f1.derivatives[i] * s.f2.values[i]
}

/// Relative least-squares residual `min_c ‖ρ − c g‖ / ‖ρ‖` on the grid.
pub fn nonproportionality(rho: &SampledFunction, g: &SampledFunction) -> f64 {
    let rr: f64 = rho.values.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return 0.0;
    }
    let gg: f64 = g.values.iter().map(|v| v * v).sum();
    let rg: f64 = rho.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    let c = if gg > 0.0 { rg / gg } else { 0.0 };
    let res: f64 = rho.values.iter().zip(&g.values).map(|(a, b)| (a - c * b).powi(2)).sum();
    (res / rr).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripDiagnostics {
    /// `max |f'' − g f| / max |f|` with fourth-order second differences.
    pub ode_residual_f: f64,
    /// `max |u'' − ρ f| / (max |ρ| max |f|)`.
    pub ode_residual_u: f64,
    pub parity_asymmetry: f64,
    /// `max(|u_i|, |u_i'|)` over `|z| ≥ 1/2`.
    pub tail_max: f64,
    pub max_rho_over_g: f64,
    pub wronskian_drift: f64,
    pub nonproportionality: f64,
}

/// Support value of the segment section: `ψ + |φ|` with `ψ = u·θ̂`, `φ = f·θ̂`.
pub fn strip_support(strip: &StripModel, z: f64, theta: f64) -> Result<f64> {
    let (lo, hi) = strip.z_range();
    if !(z >= lo && z <= hi) {
        return Err(Error::OutOfRange { z, lo, hi });
    }
    Ok(support_value(strip, z, theta))
}

fn support_value(strip: &StripModel, z: f64, theta: f64) -> f64 {
    let (c, d) = strip.section(z);
    let (s, co) = theta.sin_cos();
    c[0] * co + c[1] * s + (d[0] * co + d[1] * s).abs()
}

/// Support field of the strip on `grid`, continuing the curves linearly
/// beyond the model range.
pub fn strip_field(strip: &StripModel, grid: FieldGrid) -> Result<SupportField<f64>> {
    let (lo, hi) = strip.z_range();
    if (grid.z_min < lo || grid.z_max > hi) && !strip.extends_linearly() {
        return Err(Error::OutOfRange { z: grid.z_min.min(-grid.z_max), lo, hi });
    }
    SupportField::from_fn(grid, Provenance::Strip, |z, t| support_value(strip, z, t))
}

/// Checks `D²(ψ + φ)·sgn φ ≥ −tol` and `D²(ψ − φ)·sgn(−φ) ≥ −tol` on the model
/// grid for `n_theta` directions, skipping nodes next to a zero of `φ`, plus
/// the dominance `|ρ| ≤ g`.
pub fn strip_cc_certificate(strip: &StripModel, n_theta: usize) -> Result<Certificate> {
    if n_theta < 8 {
        return Err(Error::Precondition("n_theta must be >= 8".into()));
    }
    let n = strip.f1.len();
    let h2 = strip.f1.step().powi(2);
    let dominance = (0..n).map(|i| strip.rho.values[i].abs() - strip.g.values[i]).fold(f64::NEG_INFINITY, f64::max);
    let per_theta: Vec<(f64, usize, usize)> = (0..n_theta)
        .into_par_iter()
        .map(|j| {
            let (s, c) = (2.0 * PI * j as f64 / n_theta as f64).sin_cos();
            let phi: Vec<f64> = (0..n).map(|i| strip.f1.values[i] * c + strip.f2.values[i] * s).collect();
            let psi: Vec<f64> = (0..n).map(|i| strip.u1.values[i] * c + strip.u2.values[i] * s).collect();
            let mut near_zero = vec![false; n];
            for i in 0..n - 1 {
                if phi[i] == 0.0 || phi[i].signum() != phi[i + 1].signum() {
                    for k in i.saturating_sub(1)..(i + 3).min(n) {
                        near_zero[k] = true;
                    }
                }
            }
            let mut worst = (f64::INFINITY, 0, j);
            for i in 1..n - 1 {
                if near_zero[i] {
                    continue;
                }
                let d2 = |v: &dyn Fn(usize) -> f64| (v(i - 1) - 2.0 * v(i) + v(i + 1)) / h2;
                let plus = d2(&|k| psi[k] + phi[k]) * phi[i].signum();
                let minus = d2(&|k| psi[k] - phi[k]) * (-phi[i]).signum();
                let scale = (psi[i].abs() + phi[i].abs()).max(1.0);
                let v = plus.min(minus) / scale;
                if v < worst.0 {
                    worst = (v, i, j);
                }
            }
            worst
        })
        .collect();
    let (worst, i, j) = per_theta.into_iter().fold((f64::INFINITY, 0, 0), |a, b| if b.0 < a.0 { b } else { a });
    let passed = worst >= -TOL_CC && dominance <= 0.0;
    Ok(Certificate::new("strip_convex_concave", passed, worst)
        .with_witness(vec![strip.f1.z(i), 2.0 * PI * j as f64 / n_theta as f64])
        .with_detail(format!("min scaled one-sided D2 {worst:e}; max(|rho| - g) = {dominance:e}")))
}

/// `k = f₂/f₁` and `k' = W/f₁²` on the model grid.
pub fn quotient_slope(strip: &StripModel) -> Result<SampledFunction> {
    let f1 = &strip.f1;
    let mut values = Vec::with_capacity(f1.len());
    let mut derivs = Vec::with_capacity(f1.len());
    for i in 0..f1.len() {
        let a = f1.values[i];
        if a.abs() < 1e-12 {
            return Err(Error::DivisionNearZero { z: f1.z(i), value: a });
        }
        values.push(strip.f2.values[i] / a);
        derivs.push(wronskian_at(strip, i) / (a * a));
    }
    SampledFunction::new(f1.z_min, f1.z_max, values, derivs)
}

/// Spread of `k'` over `[−2, 2]`; a constant `k'` means the unperturbed strip
/// is ruled by a second family of lines.
pub fn quotient_slope_certificate(strip: &StripModel) -> Result<Certificate> {
    let k = quotient_slope(strip)?;
    let (lo, hi) = (0..k.len())
        .filter(|&i| k.z(i).abs() <= 2.0)
        .map(|i| k.derivatives[i])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let spread = hi - lo;
    Ok(Certificate::new("quotient_slope_nonconstant", spread > 1e-9 * hi.abs().max(lo.abs()).max(1e-300), spread)
        .with_detail(format!("k' ranges over [{lo:e}, {hi:e}]")))
}

/// Tail `max(|u_i|, |u_i'|) < 1e-9` on `|z| ≥ 1/2`, `|ρ| ≤ g/2`,
/// non-proportionality of `ρ` and `g` above 0.1 and Wronskian drift below 1e-8.
pub fn construction_certificates(d: &StripDiagnostics) -> Vec<Certificate> {
    vec![
        Certificate::new("strip_tail", d.tail_max < TAIL_TOL, TAIL_TOL - d.tail_max)
            .with_detail(format!("max(|u_i|, |u_i'|) on |z| >= 1/2 is {:e}", d.tail_max)),
        Certificate::new("rho_dominance", d.max_rho_over_g <= 0.5, 0.5 - d.max_rho_over_g)
            .with_detail(format!("max |rho|/g = {:e}", d.max_rho_over_g)),
        Certificate::new("rho_nonproportional", d.nonproportionality > 0.1, d.nonproportionality - 0.1)
            .with_detail(format!("min_c |rho - c g| / |rho| = {:e}", d.nonproportionality)),
        Certificate::new("wronskian_drift", d.wronskian_drift < 1e-8, 1e-8 - d.wronskian_drift)
            .with_detail(format!("relative Wronskian drift {:e}", d.wronskian_drift)),
    ]
}

impl StripModel {
    /// CSV dump `z,g,rho,f1,f1',f2,f2',u1,u1',u2,u2'` on the model grid.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Format(e.to_string());
        wr.write_record(["z", "g", "rho", "f1", "df1", "f2", "df2", "u1", "du1", "u2", "du2"]).map_err(err)?;
        for i in 0..self.f1.len() {
            let row = [
                self.f1.z(i),
                self.g.values[i],
                self.rho.values[i],
                self.f1.values[i],
                self.f1.derivatives[i],
                self.f2.values[i],
                self.f2.derivatives[i],
                self.u1.values[i],
                self.u1.derivatives[i],
                self.u2.values[i],
                self.u2.derivatives[i],
            ];
            wr.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(err)?;
        }
        wr.flush()?;
        Ok(())
    }
}
