//! Support functions of horizontal sections sampled on a `(z, θ)` grid.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const TOL_CC: f64 = 1e-7;
pub const TOL_SUPPORT_FN: f64 = 1e-9;

const MAGIC: &[u8; 4] = b"HSSF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 44;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Strip,
    Glued,
    Smoothed,
    Cone,
    Other,
}

impl Provenance {
    fn code(self) -> u32 {
        match self {
            Provenance::Strip => 0,
            Provenance::Glued => 1,
            Provenance::Smoothed => 2,
            Provenance::Cone => 3,
            Provenance::Other => 4,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        Ok(match c {
            0 => Provenance::Strip,
            1 => Provenance::Glued,
            2 => Provenance::Smoothed,
            3 => Provenance::Cone,
            4 => Provenance::Other,
            _ => return Err(Error::Format(format!("unknown provenance code {c}"))),
        })
    }
}

/// Uniform grid: `z_i = z_min + i·dz` for `i < nz`, `θ_j = 2πj / n_theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub nz: usize,
    pub n_theta: usize,
}

impl FieldGrid {
    pub fn new(z_min: f64, z_max: f64, nz: usize, n_theta: usize) -> Result<Self> {
        if !(z_min < z_max) || nz < 3 || n_theta < 8 {
            return Err(Error::Config(format!(
                "grid needs z_min < z_max, nz >= 3, n_theta >= 8 (got {z_min}, {z_max}, {nz}, {n_theta})"
            )));
        }
        Ok(Self { z_min, z_max, nz, n_theta })
    }

    /// Symmetric grid `[−z_max, z_max]` with the given step (rounded so that
    /// `z = 0` is a node).
    pub fn symmetric(z_max: f64, step: f64, n_theta: usize) -> Result<Self> {
        let half = (z_max / step).round() as usize;
        Self::new(-(half as f64) * step, half as f64 * step, 2 * half + 1, n_theta)
    }

    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / (self.nz - 1) as f64
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.dz()
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    /// Index of the node nearest to `z`, if `z` lies in the grid range.
    pub fn nearest(&self, z: f64) -> Option<usize> {
        let t = (z - self.z_min) / self.dz();
        (t >= -1e-9 && t <= (self.nz - 1) as f64 + 1e-9).then(|| (t.round() as usize).min(self.nz - 1))
    }

    /// Rows whose `z` lies in `[lo, hi]`.
    pub fn rows_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let eps = 1e-9 * self.dz();
        let a = ((lo - self.z_min - eps) / self.dz()).ceil().max(0.0) as usize;
        let b = (((hi - self.z_min + eps) / self.dz()).floor() + 1.0).clamp(0.0, self.nz as f64) as usize;
        a.min(b)..b
    }

    fn same_as(&self, other: &FieldGrid) -> bool {
        self.nz == other.nz
            && self.n_theta == other.n_theta
            && (self.z_min - other.z_min).abs() <= 1e-12 * self.z_min.abs().max(1.0)
            && (self.z_max - other.z_max).abs() <= 1e-12 * self.z_max.abs().max(1.0)
    }
}

/// `F(z_i, θ_j)` stored row-major (one row per `z`).
#[derive(Clone, Debug, PartialEq)]
pub struct SupportField<T> {
    pub grid: FieldGrid,
    pub provenance: Provenance,
    values: Vec<T>,
}

impl<T: Real> SupportField<T> {
    pub fn from_values(grid: FieldGrid, provenance: Provenance, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.nz * grid.n_theta {
            return Err(Error::DimensionMismatch { expected: grid.nz * grid.n_theta, got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSupport(format!(
                "non-finite value at z = {}, theta index {}",
                grid.z(k / grid.n_theta),
                k % grid.n_theta
            )));
        }
        Ok(Self { grid, provenance, values })
    }

    /// Evaluates `f(z, θ)` on every node, row-parallel.
    pub fn from_fn<F>(grid: FieldGrid, provenance: Provenance, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> T + Sync,
    {
        let values: Vec<T> = (0..grid.nz)
            .into_par_iter()
            .flat_map_iter(|i| {
                let z = grid.z(i);
                let f = &f;
                (0..grid.n_theta).map(move |j| f(z, grid.theta(j)))
            })
            .collect();
        Self::from_values(grid, provenance, values)
    }

    /// Builds row `i` from a function of the row index returning `n_theta` values.
    pub fn from_rows<F>(grid: FieldGrid, provenance: Provenance, f: F) -> Result<Self>
    where
        F: Fn(usize) -> Vec<T> + Sync,
    {
        let rows: Vec<Vec<T>> = (0..grid.nz).into_par_iter().map(&f).collect();
        if rows.iter().any(|r| r.len() != grid.n_theta) {
            return Err(Error::DimensionMismatch { expected: grid.n_theta, got: 0 });
        }
        Self::from_values(grid, provenance, rows.concat())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.grid.n_theta;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.grid.n_theta + j]
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    /// Slice at arbitrary `z` by linear interpolation between rows, itself a
    /// Minkowski combination of the two neighbouring sections.
    pub fn slice_at(&self, z: f64) -> Result<Vec<T>> {
        let g = &self.grid;
        let t = (z - g.z_min) / g.dz();
        if !(t >= -1e-9 && t <= (g.nz - 1) as f64 + 1e-9) {
            return Err(Error::OutOfRange { z, lo: g.z_min, hi: g.z_max });
        }
        let i = (t.floor().max(0.0) as usize).min(g.nz - 2);
        let w = T::lit((t - i as f64).clamp(0.0, 1.0));
        Ok(self.row(i).iter().zip(self.row(i + 1)).map(|(&a, &b)| a + w * (b - a)).collect())
    }

    /// Largest |F| over rows in the window: a bound on the distance from the
    /// z-axis to any section point.
    pub fn max_section_radius(&self, z_lo: f64, z_hi: f64) -> T {
        self.grid
            .rows_in(z_lo, z_hi)
            .flat_map(|i| self.row(i).iter().copied())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// CSV rows `z,theta,F`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["z", "theta", "F"]).map_err(csv_err)?;
        for i in 0..self.grid.nz {
            for j in 0..self.grid.n_theta {
                wr.write_record([
                    format!("{:e}", self.grid.z(i)),
                    format!("{:e}", self.grid.theta(j)),
                    format!("{:e}", self.get(i, j).to_f64_lossy()),
                ])
                .map_err(csv_err)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV layout; rows must be z-major with a full θ circle per z.
    pub fn read_csv<R: Read>(r: R, provenance: Provenance) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut zs: Vec<f64> = Vec::new();
        let mut n_theta = 0usize;
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| Error::Format(format!("bad field {i}")))
            };
            let (z, f) = (num(0)?, num(2)?);
            if zs.last() != Some(&z) {
                zs.push(z);
            }
            if zs.len() == 1 {
                n_theta += 1;
            }
            values.push(T::lit(f));
        }
        if zs.len() < 3 {
            return Err(Error::Format("need at least three z rows".into()));
        }
        let grid = FieldGrid::new(zs[0], *zs.last().expect("nonempty"), zs.len(), n_theta)?;
        Self::from_values(grid, provenance, values)
    }

    /// Little-endian binary layout: magic `HSSF`, `u32` version, `u32`
    /// provenance code, `u64` nz, `u64` n_theta, `f64` z_min, `f64` z_max, then
    /// `nz·n_theta` `f64` values in z-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.provenance.code().to_le_bytes())?;
        w.write_all(&(self.grid.nz as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n_theta as u64).to_le_bytes())?;
        w.write_all(&self.grid.z_min.to_le_bytes())?;
        w.write_all(&self.grid.z_max.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; HEADER_LEN];
        r.read_exact(&mut head)?;
        if &head[0..4] != MAGIC {
            return Err(Error::Format("not a support field file (bad magic)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
        if u32_at(4) != VERSION {
            return Err(Error::Format(format!("unsupported version {}", u32_at(4))));
        }
        let provenance = Provenance::from_code(u32_at(8))?;
        let grid = FieldGrid::new(f64_at(28), f64_at(36), u64_at(12) as usize, u64_at(20) as usize)?;
        let count = grid.nz.checked_mul(grid.n_theta).ok_or_else(|| Error::Format("grid too large".into()))?;
        let mut buf = vec![0u8; count * 8];
        r.read_exact(&mut buf)?;
        let values = buf.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes")))).collect();
        Self::from_values(grid, provenance, values)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Discrete radius of curvature `h + h''` of a periodic slice:
/// `κ_j = (h_{j+1} + h_{j−1} − 2 cos Δ h_j) / (2 (1 − cos Δ))`, exact on
/// circles and nonnegative on the sampled support function of any convex set.
pub fn discrete_curvature<T: Real>(h: &[T]) -> Vec<T> {
    let n = h.len();
    let delta = T::lit(2.0 * PI / n as f64);
    let c = delta.cos();
    let two = T::lit(2.0);
    let denom = two * (T::one() - c);
    (0..n)
        .map(|j| (h[(j + 1) % n] + h[(j + n - 1) % n] - two * c * h[j]) / denom)
        .collect()
}

/// Rounding floor of [`discrete_curvature`] for a slice of magnitude `scale`.
pub fn curvature_noise_floor<T: Real>(n_theta: usize, scale: T) -> T {
    let delta = 2.0 * PI / n_theta as f64;
    T::epsilon() * T::lit(64.0) * scale.max(T::one()) / T::lit(1.0 - delta.cos())
}

/// `h'(θ)`: spectral when `n` is a power of two, otherwise fourth-order
/// central differences.
pub fn theta_derivative<T: Real>(h: &[T]) -> Vec<T> {
    let n = h.len();
    if n.is_power_of_two() {
        let mut planner = FftPlanner::<T>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex<T>> = h.iter().map(|&v| Complex::new(v, T::zero())).collect();
        fwd.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            let kk = if k < n / 2 {
                k as f64
            } else if k == n / 2 {
                0.0
            } else {
                k as f64 - n as f64
            };
            *c = Complex::new(-c.im, c.re) * T::lit(kk);
        }
        inv.process(&mut buf);
        let scale = T::one() / T::from_usize_lossy(n);
        buf.iter().map(|c| c.re * scale).collect()
    } else {
        let d = T::lit(2.0 * PI / n as f64);
        let (eight, twelve) = (T::lit(8.0), T::lit(12.0));
        (0..n)
            .map(|j| {
                let f = |o: isize| h[((j as isize + o).rem_euclid(n as isize)) as usize];
                (f(-2) - eight * f(-1) + eight * f(1) - f(2)) / (twelve * d)
            })
            .collect()
    }
}

/// Boundary points `p(θ_j)` of a section.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSectionBoundary<T> {
    pub points: Vec<[T; 2]>,
}

impl<T: Real> ConvexSectionBoundary<T> {
    /// Support value recomputed as `max_k ⟨p_k, (cos θ, sin θ)⟩`.
    pub fn support(&self, theta: T) -> T {
        let (s, c) = theta.sin_cos();
        self.points.iter().fold(T::neg_infinity(), |m, p| m.max(p[0] * c + p[1] * s))
    }
}

/// Checks `h + h'' ≥ −tol` in the discrete sense.
pub fn validate_slice<T: Real>(h: &[T]) -> Result<()> {
    if h.len() < 8 {
        return Err(Error::InvalidSupport(format!("slice too short ({})", h.len())));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSupport("non-finite slice".into()));
    }
    let scale = h.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let floor = curvature_noise_floor(h.len(), scale).max(T::rel_tol(TOL_SUPPORT_FN) * scale);
    let kappa = discrete_curvature(h);
    if let Some((j, k)) = kappa.iter().enumerate().find(|(_, &k)| k < -floor) {
        return Err(Error::InvalidSupport(format!("h + h'' = {k} < 0 at theta index {j}")));
    }
    Ok(())
}

/// `p(θ) = h(θ)(cos θ, sin θ) + h'(θ)(−sin θ, cos θ)`.
pub fn reconstruct_section<T: Real>(h: &[T]) -> Result<ConvexSectionBoundary<T>> {
    validate_slice(h)?;
    let dh = theta_derivative(h);
    let n = h.len();
    let points = (0..n)
        .map(|j| {
            let (s, c) = T::lit(2.0 * PI * j as f64 / n as f64).sin_cos();
            [h[j] * c - dh[j] * s, h[j] * s + dh[j] * c]
        })
        .collect();
    Ok(ConvexSectionBoundary { points })
}

/// Pointwise weighted sum of support fields.
pub fn minkowski_combine<T: Real>(fields: &[&SupportField<T>], weights: &[T]) -> Result<SupportField<T>> {
    if fields.is_empty() || fields.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: fields.len(), got: weights.len() });
    }
    let total: T = weights.iter().copied().sum();
    if weights.iter().any(|&w| w < T::zero()) || (total - T::one()).abs() > T::rel_tol(1e-12) {
        return Err(Error::Precondition("weights must be nonnegative and sum to 1".into()));
    }
    let grid = fields[0].grid;
    if let Some(f) = fields.iter().find(|f| !f.grid.same_as(&grid)) {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", grid, f.grid)));
    }
    let n = fields[0].values.len();
    let values = (0..n).map(|k| fields.iter().zip(weights).map(|(f, &w)| w * f.values[k]).sum()).collect();
    SupportField::from_values(grid, fields[0].provenance, values)
}

/// `D²_z F` at interior rows `1..nz-1`, stored row-major with `nz − 2` rows.
pub fn z_second_differences<T: Real>(field: &SupportField<T>) -> Vec<T> {
    let g = &field.grid;
    let inv = T::lit(1.0 / (g.dz() * g.dz()));
    let two = T::lit(2.0);
    (1..g.nz - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (a, b, c) = (field.row(i - 1), field.row(i), field.row(i + 1));
            (0..g.n_theta).map(move |j| (a[j] - two * b[j] + c[j]) * inv)
        })
        .collect()
}

/// Passes iff `D²_z F ≥ −tol_cc · max(1, |F|)` at every interior node; the
/// margin is the smallest scaled second difference.
pub fn z_convexity_certificate<T: Real>(field: &SupportField<T>, tol_cc: T) -> Certificate {
    z_convexity_on(field, tol_cc, |_| true)
}

/// [`z_convexity_certificate`] restricted to interior rows selected by `rows`.
pub fn z_convexity_on<T: Real>(field: &SupportField<T>, tol_cc: T, rows: impl Fn(usize) -> bool) -> Certificate {
    let g = &field.grid;
    let d2 = z_second_differences(field);
    let mut worst = T::infinity();
    let mut at = (0, 0);
    for i in 1..g.nz - 1 {
        if !rows(i) {
            continue;
        }
        for j in 0..g.n_theta {
            let scaled = d2[(i - 1) * g.n_theta + j] / field.get(i, j).abs().max(T::one());
            if scaled < worst {
                worst = scaled;
                at = (i, j);
            }
        }
    }
    if worst == T::infinity() {
        return Certificate::not_applicable("z_convexity", "no interior rows selected");
    }
    Certificate::new("z_convexity", worst >= -tol_cc, worst.to_f64_lossy())
        .with_witness(vec![g.z(at.0), g.theta(at.1)])
        .with_detail(format!("min scaled D2_z F over {} directions", g.n_theta))
}

/// Passes iff the discrete `h + h''` exceeds its rounding floor on every
/// slice; the margin is the smallest value found. Segment-section fields are
/// not applicable.
pub fn curvature_positivity_certificate<T: Real>(field: &SupportField<T>) -> Certificate {
    curvature_positivity_on(field, 0..field.grid.nz)
}

pub fn curvature_positivity_on<T: Real>(field: &SupportField<T>, rows: std::ops::Range<usize>) -> Certificate {
    let name = "section_curvature";
    if field.provenance == Provenance::Strip {
        return Certificate::not_applicable(name, "strip sections are segments");
    }
    let g = &field.grid;
    let per_row: Vec<(T, T, usize)> = rows
        .into_par_iter()
        .map(|i| {
            let h = field.row(i);
            let scale = h.iter().fold(T::one(), |m, v| m.max(v.abs()));
            let floor = curvature_noise_floor(g.n_theta, scale);
            let kappa = discrete_curvature(h);
            let (j, k) = kappa
                .iter()
                .enumerate()
                .fold((0, T::infinity()), |best, (j, &k)| if k - floor < best.1 { (j, k - floor) } else { best });
            (k, kappa[j], i * g.n_theta + j)
        })
        .collect();
    let Some(&(excess, kappa, at)) = per_row.iter().min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
    else {
        return Certificate::not_applicable(name, "no rows");
    };
    let min_kappa = per_row.iter().fold(T::infinity(), |m, r| m.min(r.1));
    Certificate::new(name, excess > T::zero(), min_kappa.to_f64_lossy())
        .with_witness(vec![g.z(at / g.n_theta), g.theta(at % g.n_theta), kappa.to_f64_lossy()])
        .with_detail("min discrete h + h'' over all slices")
}

/// Distance from `p` to the convex set with support slice `h`:
/// `max(0, max_θ ⟨p, θ̂⟩ − h(θ))`, refined by a parabola through the best node.
pub fn section_distance<T: Real>(p: [T; 2], h: &[T]) -> T {
    let n = h.len();
    let d = 2.0 * PI / n as f64;
    let s = |j: usize| {
        let (sn, cs) = T::lit(d * j as f64).sin_cos();
        p[0] * cs + p[1] * sn - h[j]
    };
    let mut best = 0;
    let mut val = T::neg_infinity();
    for j in 0..n {
        let v = s(j);
        if v > val {
            val = v;
            best = j;
        }
    }
    if val <= T::zero() {
        return T::zero();
    }
    let (a, c) = (s((best + n - 1) % n), s((best + 1) % n));
    let curv = a + c - T::lit(2.0) * val;
    let refined = if curv < T::zero() { val - (c - a) * (c - a) / (T::lit(8.0) * curv) } else { val };
    refined.max(val)
}

/// `max |F_A − F_B|` over rows with `z` in the window.
pub fn field_sup_distance<T: Real>(a: &SupportField<T>, b: &SupportField<T>, z_lo: f64, z_hi: f64) -> Result<T> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.grid, b.grid)));
    }
    Ok(a.grid
        .rows_in(z_lo, z_hi)
        .flat_map(|i| a.row(i).iter().zip(b.row(i)).map(|(&x, &y)| (x - y).abs()))
        .fold(T::zero(), |m, v| m.max(v)))
}
