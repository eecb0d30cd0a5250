//! Absence of lines in a body given by its sections: the minimax distance
//! `maxdist(ℓ, E) = max_{|z| ≤ 10} dist(ℓ(z), E_z)` minimised over all
//! non-horizontal lines `ℓ(z) = (a + b z, c + d z, z)`.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::strip::{Parity, StripModel};
use crate::supportgeo::SupportField;

pub const DEFAULT_WINDOW: (f64, f64) = (-10.0, 10.0);
pub const DEFAULT_STARTS: usize = 32;
/// Node spacing used for exact sections.
pub const DEFAULT_NODE_STEP: f64 = 1.0 / 256.0;
const POLISH_STEP: f64 = 1e-6;
const POLISH_FLOOR: f64 = 1e-12;
const POLISH_ROUNDS: usize = 400;
const NM_MAX_ITERS: u64 = 4000;
const GOLDEN_ITERS: usize = 60;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line3 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Line3 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn at(&self, z: f64) -> [f64; 2] {
        [self.a + self.b * z, self.c + self.d * z]
    }

    fn from_slice(p: &[f64]) -> Self {
        Self::new(p[0], p[1], p[2], p[3])
    }

    fn to_vec(self) -> Vec<f64> {
        vec![self.a, self.b, self.c, self.d]
    }

    /// Image under `(x, y, z) ↦ (x, −y, −z)`.
    pub fn rotated(&self) -> Self {
        Self::new(self.a, -self.b, -self.c, self.d)
    }
}

/// A body described by its horizontal sections over a `z` window.
pub trait SectionSet: Sync {
    /// Heights where `maxdist` is sampled, increasing.
    fn nodes(&self) -> &[f64];
    /// Distance to the section at node `k`. `hint` carries state between
    /// calls.
    fn node_distance(&self, k: usize, p: [f64; 2], hint: &mut usize) -> f64;
    /// Distance to the section at any `z` in the window.
    fn distance(&self, z: f64, p: [f64; 2]) -> f64;
    /// Largest distance from the `z`-axis of a section point.
    fn radius(&self) -> f64;
    /// Invariance under `(x, y, z) ↦ (x, −y, −z)`.
    fn symmetric(&self) -> bool;
}

/// Largest node distance along `line` and its node index.
pub fn grid_max(set: &dyn SectionSet, line: &Line3) -> (f64, usize) {
    let mut hint = 0;
    let mut best = (0.0, 0);
    for (k, &z) in set.nodes().iter().enumerate() {
        let d = set.node_distance(k, line.at(z), &mut hint);
        if d > best.0 {
            best = (d, k);
        }
    }
    best
}

/// Grid maximum refined by golden-section search on the cells next to the
/// best node; returns the value and the `z` where it is attained.
pub fn maxdist_on(set: &dyn SectionSet, line: &Line3) -> (f64, f64) {
    let nodes = set.nodes();
    let (v, k) = grid_max(set, line);
    if v == 0.0 {
        return (0.0, nodes[k]);
    }
    let lo = nodes[k.saturating_sub(1)];
    let hi = nodes[(k + 1).min(nodes.len() - 1)];
    let (z, r) = golden_max(|z| set.distance(z, line.at(z)), lo, hi);
    if r > v {
        (r, z)
    } else {
        (v, nodes[k])
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn check_window(window: (f64, f64), lo: f64, hi: f64) -> Result<()> {
    if !(window.0 < window.1) {
        return Err(Error::Precondition(format!("empty window {window:?}")));
    }
    if window.0 < lo - 1e-9 || window.1 > hi + 1e-9 {
        let z = if window.0 < lo - 1e-9 { window.0 } else { window.1 };
        return Err(Error::OutOfRange { z, lo, hi });
    }
    Ok(())
}

/// Sections given by a sampled support field: at a row the polygon
/// `{x : ⟨x, θ̂_j⟩ ≤ F(z, θ_j)}`, between rows the linear interpolation of the
/// neighbouring slices.
pub struct SampledSections<'a> {
    field: &'a SupportField<f64>,
    rows: Vec<usize>,
    nodes: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    discs: Vec<([f64; 2], f64)>,
    radius: f64,
    symmetric: bool,
}

impl<'a> SampledSections<'a> {
    pub fn new(field: &'a SupportField<f64>, window: (f64, f64)) -> Result<Self> {
        let g = field.grid;
        check_window(window, g.z_min, g.z_max)?;
        let rows: Vec<usize> = g.rows_in(window.0, window.1).collect();
        if rows.len() < 2 {
            return Err(Error::Precondition(format!("window {window:?} holds fewer than two rows")));
        }
        let nodes = rows.iter().map(|&i| g.z(i)).collect();
        let n = g.n_theta;
        let cos: Vec<f64> = (0..n).map(|j| g.theta(j).cos()).collect();
        let sin: Vec<f64> = (0..n).map(|j| g.theta(j).sin()).collect();
        // inscribed disc around the bounding-box centre, for early exits
        let discs = rows
            .iter()
            .map(|&i| {
                let h = field.row(i);
                let c = if n % 4 == 0 { [(h[0] - h[n / 2]) / 2.0, (h[n / 4] - h[3 * n / 4]) / 2.0] } else { [0.0, 0.0] };
                let r = (0..n).map(|j| h[j] - c[0] * cos[j] - c[1] * sin[j]).fold(f64::INFINITY, f64::min);
                (c, r)
            })
            .collect();
        let radius = field.max_section_radius(window.0, window.1);
        Ok(Self { field, rows, nodes, cos, sin, discs, radius, symmetric: has_rotation_symmetry(field) })
    }

    /// `max_j (⟨p, θ̂_j⟩ − h_j)` clipped at 0 with a parabolic refinement.
    /// The sets `{j : ⟨p, θ̂_j⟩ − h_j ≥ t}` with `t ≥ 0` are arcs, so a strict
    /// local maximum with positive value found by climbing from `hint` is
    /// global; otherwise every direction is scanned.
    fn slice_distance(&self, p: [f64; 2], h: impl Fn(usize) -> f64, hint: &mut usize) -> f64 {
        let n = self.cos.len();
        let s = |j: usize| p[0] * self.cos[j] + p[1] * self.sin[j] - h(j);
        let mut j = *hint % n;
        let mut v = s(j);
        for _ in 0..n {
            let (l, r) = ((j + n - 1) % n, (j + 1) % n);
            let (vl, vr) = (s(l), s(r));
            if vr > v && vr >= vl {
                (j, v) = (r, vr);
            } else if vl > v {
                (j, v) = (l, vl);
            } else {
                break;
            }
        }
        let (mut a, mut c) = (s((j + n - 1) % n), s((j + 1) % n));
        if !(v > 0.0 && a < v && c < v) {
            (j, v) = (0..n).map(|k| (k, s(k))).fold((0, f64::NEG_INFINITY), |m, x| if x.1 > m.1 { x } else { m });
            a = s((j + n - 1) % n);
            c = s((j + 1) % n);
        }
        *hint = j;
        if v <= 0.0 {
            return 0.0;
        }
        let curv = a + c - 2.0 * v;
        if curv < 0.0 {
            (v - (c - a) * (c - a) / (8.0 * curv)).max(v)
        } else {
            v
        }
    }
}

impl SectionSet for SampledSections<'_> {
    fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn node_distance(&self, k: usize, p: [f64; 2], hint: &mut usize) -> f64 {
        let (c, r) = self.discs[k];
        if r >= 0.0 && (p[0] - c[0]).hypot(p[1] - c[1]) <= r {
            return 0.0;
        }
        let h = self.field.row(self.rows[k]);
        self.slice_distance(p, |j| h[j], hint)
    }

    fn distance(&self, z: f64, p: [f64; 2]) -> f64 {
        let g = self.field.grid;
        let t = ((z - g.z_min) / g.dz()).clamp(0.0, (g.nz - 1) as f64);
        let i = (t.floor() as usize).min(g.nz - 2);
        let w = t - i as f64;
        let (h0, h1) = (self.field.row(i), self.field.row(i + 1));
        let mut hint = 0;
        self.slice_distance(p, |j| (1.0 - w) * h0[j] + w * h1[j], &mut hint)
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Whether `F(−z, θ) = F(z, −θ)`, the symmetry under `(x, y, z) ↦ (x, −y, −z)`.
pub fn has_rotation_symmetry(field: &SupportField<f64>) -> bool {
    let g = field.grid;
    if (g.z_min + g.z_max).abs() > 1e-12 * g.z_max.abs().max(1.0) {
        return false;
    }
    let n = g.n_theta;
    (0..g.nz).all(|i| {
        let (r, m) = (field.row(i), field.row(g.nz - 1 - i));
        (0..n).all(|j| (r[j] - m[(n - j) % n]).abs() <= SYMMETRY_TOL * r[j].abs().max(1.0))
    })
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Distance from `p` to the segment `[q1, q2]`.
fn segment_distance(p: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> f64 {
    let e = [q2[0] - q1[0], q2[1] - q1[1]];
    let w = [p[0] - q1[0], p[1] - q1[1]];
    let ee = dot(e, e);
    let t = if ee > 0.0 { (dot(w, e) / ee).clamp(0.0, 1.0) } else { 0.0 };
    (w[0] - t * e[0]).hypot(w[1] - t * e[1])
}

/// Distance from `p` to the convex hull of discs `(q_k, r_k)`:
/// `max(0, max_θ min_k (⟨p − q_k, θ̂⟩ − r_k))`. The inner maximum sits at the
/// peak of one term or where two terms cross.
fn hull_distance(p: [f64; 2], pieces: &[([f64; 2], f64)]) -> f64 {
    let mut w = [([0.0; 2], 0.0); 3];
    for (k, (q, r)) in pieces.iter().enumerate() {
        w[k] = ([p[0] - q[0], p[1] - q[1]], *r);
    }
    let w = &w[..pieces.len()];
    let value = |u: [f64; 2]| w.iter().map(|(v, r)| dot(*v, u) - r).fold(f64::INFINITY, f64::min);
    let mut best = f64::NEG_INFINITY;
    for (v, _) in w {
        let len = v[0].hypot(v[1]);
        if len > 0.0 {
            best = best.max(value([v[0] / len, v[1] / len]));
        }
    }
    for i in 0..w.len() {
        for k in i + 1..w.len() {
            // unit u with ⟨w_i − w_k, u⟩ = r_i − r_k
            let d = [w[i].0[0] - w[k].0[0], w[i].0[1] - w[k].0[1]];
            let len = d[0].hypot(d[1]);
            let rhs = w[i].1 - w[k].1;
            if len == 0.0 || rhs.abs() > len {
                continue;
            }
            let (n, t) = ([d[0] / len, d[1] / len], rhs / len);
            let s = (1.0 - t * t).max(0.0).sqrt();
            best = best.max(value([t * n[0] - s * n[1], t * n[1] + s * n[0]]));
            best = best.max(value([t * n[0] + s * n[1], t * n[1] - s * n[0]]));
        }
    }
    best.max(0.0)
}

/// Exact sections of the strip: segments `u(z) ± f(z)`, and with `glued` their
/// convex hull with the quasi-cone disc of radius `|z| − 1` for `|z| ≥ 1`.
pub struct ExactStripSections<'a> {
    model: &'a StripModel,
    glued: bool,
    nodes: Vec<f64>,
    sections: Vec<([f64; 2], [f64; 2])>,
    radius: f64,
    symmetric: bool,
}

impl<'a> ExactStripSections<'a> {
    pub fn new(model: &'a StripModel, glued: bool, window: (f64, f64), step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Precondition(format!("node step {step} must be positive")));
        }
        let (lo, hi) = model.z_range();
        if model.extends_linearly() {
            check_window(window, f64::NEG_INFINITY, f64::INFINITY)?;
        } else {
            check_window(window, lo, hi)?;
        }
        let k0 = (window.0 / step).ceil() as i64;
        let k1 = (window.1 / step).floor() as i64;
        let nodes: Vec<f64> = (k0..=k1).map(|k| k as f64 * step).collect();
        if nodes.len() < 2 {
            return Err(Error::Precondition(format!("window {window:?} holds fewer than two nodes")));
        }
        let sections: Vec<_> = nodes.iter().map(|&z| model.section(z)).collect();
        let radius = nodes
            .iter()
            .zip(&sections)
            .map(|(&z, &(c, f))| {
                let seg = c[0].hypot(c[1]) + f[0].hypot(f[1]);
                if glued {
                    seg.max(z.abs() - 1.0)
                } else {
                    seg
                }
            })
            .fold(0.0, f64::max);
        let symmetric = (window.0 + window.1).abs() < 1e-12
            && model.f1.asymmetry(Parity::Even) <= SYMMETRY_TOL
            && model.f2.asymmetry(Parity::Odd) <= SYMMETRY_TOL
            && model.u1.asymmetry(Parity::Even) <= SYMMETRY_TOL
            && model.u2.asymmetry(Parity::Odd) <= SYMMETRY_TOL;
        Ok(Self { model, glued, nodes, sections, radius, symmetric })
    }
}

impl ExactStripSections<'_> {
    fn section_distance(&self, z: f64, (c, f): ([f64; 2], [f64; 2]), p: [f64; 2]) -> f64 {
        let q1 = [c[0] + f[0], c[1] + f[1]];
        let q2 = [c[0] - f[0], c[1] - f[1]];
        if !(self.glued && z.abs() >= 1.0) {
            return segment_distance(p, q1, q2);
        }
        let r = z.abs() - 1.0;
        if p[0].hypot(p[1]) <= r {
            return 0.0;
        }
        hull_distance(p, &[(q1, 0.0), (q2, 0.0), ([0.0, 0.0], r)])
    }
}

impl SectionSet for ExactStripSections<'_> {
    fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn node_distance(&self, k: usize, p: [f64; 2], _hint: &mut usize) -> f64 {
        self.section_distance(self.nodes[k], self.sections[k], p)
    }

    fn distance(&self, z: f64, p: [f64; 2]) -> f64 {
        self.section_distance(z, self.model.section(z), p)
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn symmetric(&self) -> bool {
        self.symmetric
    }
}

/// `maxdist` of a line against a sampled support field.
pub fn maxdist(line: &Line3, field: &SupportField<f64>, window: (f64, f64)) -> Result<f64> {
    Ok(maxdist_on(&SampledSections::new(field, window)?, line).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchOptions {
    pub window: (f64, f64),
    /// Number of multistart runs, the origin included.
    pub starts: usize,
    pub seed: u64,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, starts: DEFAULT_STARTS, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearchReport {
    pub best_line: Line3,
    pub margin: f64,
    pub witness_z: f64,
    pub evaluations: usize,
    /// Starts actually run; fewer than requested after an early zero.
    pub restarts: usize,
    pub seed: u64,
    pub box_radius: f64,
    pub symmetric: bool,
}

struct Cost<'a> {
    set: &'a dyn SectionSet,
    fold: bool,
    evals: &'a AtomicUsize,
}

impl Cost<'_> {
    fn line(&self, p: &[f64]) -> Line3 {
        let l = Line3::from_slice(p);
        if self.fold && l.b < 0.0 {
            l.rotated()
        } else {
            l
        }
    }

    fn eval(&self, p: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        grid_max(self.set, &self.line(p)).0
    }
}

impl CostFunction for Cost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

fn polish(cost: &Cost, mut x: Vec<f64>, mut fx: f64) -> (Vec<f64>, f64) {
    let mut step = POLISH_STEP;
    let mut rounds = 0;
    while step >= POLISH_FLOOR && fx > 0.0 && rounds < POLISH_ROUNDS {
        rounds += 1;
        let mut improved = false;
        for k in 0..4 {
            for s in [step, -step] {
                let mut y = x.clone();
                y[k] += s;
                let fy = cost.eval(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        step = if improved { (2.0 * step).min(POLISH_STEP) } else { 0.5 * step };
    }
    (x, fx)
}

/// Multistart Nelder–Mead over `(a, b, c, d)` with starts in the box
/// `|a|, |b|, |c|, |d| ≤ 2R`, `R` the largest section radius in the window,
/// followed by a coordinate polish. On symmetric bodies only `b ≥ 0` is
/// searched. Starts not yet begun are skipped once a line with `maxdist = 0`
/// turns up.
pub fn line_search_on(set: &dyn SectionSet, opts: &LineSearchOptions) -> Result<LineSearchReport> {
    if opts.starts == 0 {
        return Err(Error::Precondition("budget must be >= 1".into()));
    }
    let radius = 2.0 * set.radius().max(1e-3);
    let symmetric = set.symmetric();
    let evals = AtomicUsize::new(0);
    let found = AtomicBool::new(false);
    let runs: Vec<(Vec<f64>, f64)> = (0..opts.starts)
        .into_par_iter()
        .filter_map(|k| {
            if found.load(Ordering::Relaxed) {
                return None;
            }
            let cost = Cost { set, fold: symmetric, evals: &evals };
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let x0: Vec<f64> = if k == 0 {
                vec![0.0; 4]
            } else {
                (0..4).map(|_| rng.gen_range(-radius..radius)).collect()
            };
            let x0 = if symmetric { cost.line(&x0).to_vec() } else { x0 };
            if cost.eval(&x0) == 0.0 {
                found.store(true, Ordering::Relaxed);
                return Some((x0, 0.0));
            }
            let scale = radius / 8.0;
            let mut simplex = vec![x0.clone()];
            for d in 0..4 {
                let mut v = x0.clone();
                v[d] += scale;
                simplex.push(v);
            }
            let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).expect("nonnegative tolerance");
            let (x, fx) = match Executor::new(cost, solver).configure(|s| s.max_iters(NM_MAX_ITERS)).run() {
                Ok(res) => {
                    let st = res.state();
                    (st.get_best_param().cloned().unwrap_or_else(|| x0.clone()), st.get_best_cost())
                }
                Err(_) => (x0.clone(), f64::INFINITY),
            };
            let cost = Cost { set, fold: symmetric, evals: &evals };
            let fx = if fx.is_finite() { fx } else { cost.eval(&x) };
            let out = polish(&cost, x, fx);
            if out.1 == 0.0 {
                found.store(true, Ordering::Relaxed);
            }
            Some(out)
        })
        .collect();
    let restarts = runs.len();
    let (x, _) = runs.into_iter().fold((vec![0.0; 4], f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let best_line = Cost { set, fold: symmetric, evals: &evals }.line(&x);
    let (margin, witness_z) = maxdist_on(set, &best_line);
    Ok(LineSearchReport {
        best_line,
        margin,
        witness_z,
        evaluations: evals.load(Ordering::Relaxed),
        restarts,
        seed: opts.seed,
        box_radius: radius,
        symmetric,
    })
}

pub fn line_search(field: &SupportField<f64>, opts: &LineSearchOptions) -> Result<LineSearchReport> {
    line_search_on(&SampledSections::new(field, opts.window)?, opts)
}

/// Passes iff the searched margin is at least `required`. The margin is an
/// empirical estimate of `min_ℓ maxdist`; perturbations of the body by less
/// than it in sup distance of support functions keep it line-free.
pub fn linefree_certificate_on(
    set: &dyn SectionSet,
    required: f64,
    opts: &LineSearchOptions,
) -> Result<(Certificate, LineSearchReport)> {
    let report = line_search_on(set, opts)?;
    let l = report.best_line;
    let cert = Certificate::new("line_free", report.margin >= required, report.margin)
        .with_witness(vec![l.a, l.b, l.c, l.d, report.witness_z])
        .with_detail(format!(
            "min maxdist {:e} over {} evaluations ({} starts); required {required:e}; admissible perturbation < {:e}",
            report.margin, report.evaluations, report.restarts, report.margin
        ));
    Ok((cert, report))
}

pub fn linefree_certificate(
    field: &SupportField<f64>,
    required: f64,
    opts: &LineSearchOptions,
) -> Result<(Certificate, LineSearchReport)> {
    linefree_certificate_on(&SampledSections::new(field, opts.window)?, required, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supportgeo::{section_distance, FieldGrid, Provenance};

    fn disc_field(r: f64) -> SupportField<f64> {
        let g = FieldGrid::symmetric(10.0, 1.0 / 16.0, 64).unwrap();
        SupportField::from_fn(g, Provenance::Other, |_, _| r).unwrap()
    }

    #[test]
    fn maxdist_examples() {
        let f = disc_field(1.0);
        assert!(maxdist(&Line3::new(0.0, 0.0, 0.0, 0.0), &f, DEFAULT_WINDOW).unwrap() == 0.0);
        let far = maxdist(&Line3::new(10.0, 0.0, 0.0, 0.0), &f, DEFAULT_WINDOW).unwrap();
        assert!((far - 9.0).abs() < 1e-3, "{far}");
        let tilted = maxdist(&Line3::new(0.0, 0.3, 0.0, 0.0), &f, DEFAULT_WINDOW).unwrap();
        assert!((tilted - 2.0).abs() < 1e-3, "{tilted}");
        assert!(matches!(maxdist(&Line3::new(0.0, 0.0, 0.0, 0.0), &f, (-11.0, 0.0)), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn climbing_matches_full_scan() {
        let g = FieldGrid::symmetric(2.0, 1.0 / 16.0, 128).unwrap();
        let f = SupportField::from_fn(g, Provenance::Other, |z, t| 0.3 + 0.2 * z * t.cos() + 0.1 * (t - z).sin().abs())
            .unwrap();
        let s = SampledSections::new(&f, (-2.0, 2.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let k = rng.gen_range(0..s.nodes().len());
            let mut hint = rng.gen_range(0..128);
            let fast = s.node_distance(k, p, &mut hint);
            let full = section_distance(p, f.row(s.rows[k]));
            assert!((fast - full).abs() < 1e-12, "{fast} {full}");
        }
    }

    #[test]
    fn hull_distance_examples() {
        let seg = [([1.0, 0.0], 0.0), ([-1.0, 0.0], 0.0)];
        assert!((hull_distance([0.0, 0.5], &seg) - 0.5).abs() < 1e-15);
        assert!((hull_distance([4.0, 4.0], &seg) - 5.0).abs() < 1e-14);
        assert_eq!(hull_distance([0.3, 0.0], &seg), 0.0);
        let kite = [([3.0, 0.0], 0.0), ([-3.0, 0.0], 0.0), ([0.0, 0.0], 1.0)];
        assert!((hull_distance([0.0, 2.0], &kite) - 1.0).abs() < 1e-14);
        // above the tangent x + 2√2 y = 3 from (3, 0)
        let p = [1.0, 2.0];
        let expected = (p[0] + 8f64.sqrt() * p[1] - 3.0) / 3.0;
        assert!((hull_distance(p, &kite) - expected).abs() < 1e-14);
    }

    #[test]
    fn disc_contains_lines() {
        let r = line_search(&disc_field(1.0), &LineSearchOptions { starts: 4, ..Default::default() }).unwrap();
        assert_eq!(r.margin, 0.0);
        assert!(r.symmetric);
    }

    #[test]
    fn wedge_margin_matches_half_gap() {
        // discs of radius 1/2 centred at (3 sgn z, 0): near z = 0 every line
        // is about 2.5 away from one side; on the grid a slope b <= 0.6 gains
        // at most b dz
        let g = FieldGrid::symmetric(10.0, 1.0 / 16.0, 64).unwrap();
        let f = SupportField::from_fn(g, Provenance::Other, |z, t| 0.5 + 3.0 * z.signum() * t.cos()).unwrap();
        let r = line_search(&f, &LineSearchOptions { starts: 8, ..Default::default() }).unwrap();
        let dz = g.dz();
        assert!(r.margin <= 2.5 && r.margin >= 2.5 - 0.6 * dz - 1e-6, "{r:?}");
    }
}
