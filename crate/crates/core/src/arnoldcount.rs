//! Counting identity for lines and quadrics in `RP³`: for a smooth quadric of
//! signature (2,2), a generic line meets it in as many points as there are
//! tangent planes through the line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::linalg::{null_space, Matrix};
use crate::quadforms::{dual_form, signature_of, QuadraticForm, Signature};
use crate::scalar::{dot, norm, Real};

/// Relative discriminant below which a line counts as tangent.
pub const TOL_DISC: f64 = 1e-9;
/// Relative size below which a restricted form counts as identically zero.
pub const TOL_ZERO: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;
const MAX_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Count {
    Finite(u8),
    /// The restricted form vanishes identically.
    Infinite,
}

/// Real-root count of a binary quadratic form on `RP¹` with the normalised
/// discriminant `(β² − αγ) / max(|α|, |β|, |γ|)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootCount {
    pub count: Count,
    pub discriminant: f64,
}

impl RootCount {
    pub fn near_tangent(&self) -> bool {
        self.count == Count::Finite(1)
    }
}

/// Roots of `α t² + 2β ts + γ s²` on `RP¹`; `reference` is the scale below
/// which the form is treated as zero.
pub fn binary_form_roots<T: Real>(alpha: T, beta: T, gamma: T, reference: T) -> RootCount {
    let scale = alpha.abs().max(beta.abs()).max(gamma.abs());
    if scale <= T::rel_tol(TOL_ZERO) * reference {
        return RootCount { count: Count::Infinite, discriminant: 0.0 };
    }
    let disc = ((beta / scale) * (beta / scale) - (alpha / scale) * (gamma / scale)).to_f64_lossy();
    let tol = T::rel_tol(TOL_DISC).to_f64_lossy();
    let count = if disc > tol {
        2
    } else if disc < -tol {
        0
    } else {
        1
    };
    RootCount { count: Count::Finite(count), discriminant: disc }
}

/// Smooth quadric `{xᵀAx = 0}` in `RP³`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousQuadric<T> {
    form: QuadraticForm<T>,
}

impl<T: Real> HomogeneousQuadric<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        if matrix.rows() != 4 || matrix.cols() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: matrix.rows() });
        }
        let form = QuadraticForm::new(matrix)?;
        form.require_nondegenerate()?;
        Ok(Self { form })
    }

    pub fn diagonal(d: [T; 4]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&d))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        self.form.matrix()
    }

    pub fn signature(&self) -> Signature {
        signature_of(&self.form)
    }

    /// Quadric of the dual space with matrix `A⁻¹`: the covectors of tangent
    /// planes.
    pub fn dual(&self) -> Result<Self> {
        Ok(Self { form: dual_form(&self.form)? })
    }

    /// Image under `x ↦ M⁻¹x`, i.e. matrix `MᵀAM`.
    pub fn transformed(&self, m: &Matrix<T>) -> Result<Self> {
        Self::new(self.matrix().congruence(m).symmetrized())
    }

    fn restricted(&self, p: &[T], q: &[T]) -> RootCount {
        let a = self.matrix();
        binary_form_roots(a.bilinear(p, p), a.bilinear(p, q), a.bilinear(q, q), a.max_abs())
    }
}

/// Line of `RP³` spanned by two homogeneous vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveLine<T> {
    pub p: [T; 4],
    pub q: [T; 4],
}

impl<T: Real> ProjectiveLine<T> {
    pub fn new(p: [T; 4], q: [T; 4]) -> Result<Self> {
        let (np, nq) = (norm(&p), norm(&q));
        let pq = dot(&p, &q);
        let gram = np * np * nq * nq - pq * pq;
        if np == T::zero() || nq == T::zero() || gram <= T::rel_tol(RANK_TOL) * np * np * nq * nq {
            return Err(Error::Precondition("line needs two independent spanning vectors".into()));
        }
        Ok(Self { p, q })
    }

    /// Orthonormal basis of the span.
    pub fn orthonormal(&self) -> ([T; 4], [T; 4]) {
        let np = norm(&self.p);
        let e1 = self.p.map(|x| x / np);
        let d = dot(&self.q, &e1);
        let mut e2 = [T::zero(); 4];
        for k in 0..4 {
            e2[k] = self.q[k] - d * e1[k];
        }
        let n2 = norm(&e2);
        (e1, e2.map(|x| x / n2))
    }

    /// The covectors vanishing on the line; as a line of the dual space it is
    /// the pencil of planes through this line.
    pub fn annihilator(&self) -> Result<Self> {
        let m = Matrix::from_row_major(2, 4, self.p.iter().chain(&self.q).copied().collect());
        let (kernel, _) = null_space(&m, T::rel_tol(RANK_TOL));
        if kernel.len() != 2 {
            return Err(Error::Precondition(format!("annihilator has dimension {}", kernel.len())));
        }
        let arr = |v: &[T]| [v[0], v[1], v[2], v[3]];
        Self::new(arr(&kernel[0]), arr(&kernel[1]))
    }

    pub fn transformed(&self, m_inv: &Matrix<T>) -> Result<Self> {
        let arr = |v: Vec<T>| [v[0], v[1], v[2], v[3]];
        Self::new(arr(m_inv.matvec(&self.p)), arr(m_inv.matvec(&self.q)))
    }
}

/// Points of `S ∩ L`.
pub fn line_quadric_intersections<T: Real>(s: &HomogeneousQuadric<T>, l: &ProjectiveLine<T>) -> Count {
    intersection_roots(s, l).count
}

pub fn intersection_roots<T: Real>(s: &HomogeneousQuadric<T>, l: &ProjectiveLine<T>) -> RootCount {
    let (p, q) = l.orthonormal();
    s.restricted(&p, &q)
}

/// Planes through `L` tangent to `S`: a plane with covector `u` is tangent iff
/// `uᵀA⁻¹u = 0`, counted on the pencil of planes through `L`.
pub fn tangent_planes_through_line<T: Real>(s: &HomogeneousQuadric<T>, l: &ProjectiveLine<T>) -> Result<Count> {
    Ok(tangency_roots(s, l)?.count)
}

pub fn tangency_roots<T: Real>(s: &HomogeneousQuadric<T>, l: &ProjectiveLine<T>) -> Result<RootCount> {
    let pencil = l.annihilator()?;
    let (u, v) = pencil.orthonormal();
    Ok(s.dual()?.restricted(&u, &v))
}

/// The polar line `{x : xᵀAy = 0 for all y ∈ L}`. Its points on `S` are the
/// tangency points of the planes through `L`.
pub fn polar_line<T: Real>(s: &HomogeneousQuadric<T>, l: &ProjectiveLine<T>) -> Result<ProjectiveLine<T>> {
    let a = s.matrix();
    let arr = |v: Vec<T>| [v[0], v[1], v[2], v[3]];
    ProjectiveLine::new(arr(a.matvec(&l.p)), arr(a.matvec(&l.q)))?.annihilator()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArnoldOptions {
    pub lines: usize,
    pub seed: u64,
}

impl Default for ArnoldOptions {
    fn default() -> Self {
        Self { lines: 1000, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArnoldReport {
    pub lines: usize,
    pub violations: usize,
    pub skipped_near_tangent: usize,
    pub skipped_ruling: usize,
    /// Retained lines by intersection count: 0, 1, 2.
    pub histogram: [usize; 3],
    pub seed: u64,
}

enum Trial {
    Kept { n: u8, ok: bool },
    NearTangent,
    Ruling,
}

fn random_line<T: Real>(rng: &mut ChaCha8Rng) -> Option<ProjectiveLine<T>> {
    let mut v = || [0; 4].map(|_| T::lit(rng.gen_range(-1.0..1.0)));
    ProjectiveLine::new(v(), v()).ok()
}

fn trial<T: Real>(s: &HomogeneousQuadric<T>, l: &ProjectiveLine<T>) -> Result<Trial> {
    let i = intersection_roots(s, l);
    let t = tangency_roots(s, l)?;
    Ok(match (i.count, t.count) {
        (Count::Infinite, _) | (_, Count::Infinite) => Trial::Ruling,
        _ if i.near_tangent() || t.near_tangent() => Trial::NearTangent,
        (Count::Finite(a), Count::Finite(b)) => Trial::Kept { n: a, ok: a == b },
    })
}

/// Intersections against tangent planes for random lines, resampling lines
/// within tolerance of tangency and ruling lines. Requires signature (2,2).
pub fn arnold_identity_report<T: Real>(s: &HomogeneousQuadric<T>, opts: &ArnoldOptions) -> Result<ArnoldReport> {
    let sig = s.signature();
    if sig != Signature::new(2, 2, 0) {
        return Err(Error::Precondition(format!("identity needs signature (2,2,0), got {sig}")));
    }
    let trials: Vec<(u8, bool, usize, usize)> = (0..opts.lines)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            let (mut near, mut ruling) = (0, 0);
            for _ in 0..MAX_RESAMPLES {
                let Some(l) = random_line(&mut rng) else { continue };
                match trial(s, &l)? {
                    Trial::Kept { n, ok } => return Ok((n, ok, near, ruling)),
                    Trial::NearTangent => near += 1,
                    Trial::Ruling => ruling += 1,
                }
            }
            Err(Error::Precondition(format!("no generic line after {MAX_RESAMPLES} samples")))
        })
        .collect::<Result<_>>()?;
    let mut report = ArnoldReport {
        lines: opts.lines,
        violations: 0,
        skipped_near_tangent: 0,
        skipped_ruling: 0,
        histogram: [0; 3],
        seed: opts.seed,
    };
    for (n, ok, near, ruling) in trials {
        report.violations += usize::from(!ok);
        report.skipped_near_tangent += near;
        report.skipped_ruling += ruling;
        report.histogram[n as usize] += 1;
    }
    Ok(report)
}

pub fn arnold_identity_certificate<T: Real>(
    s: &HomogeneousQuadric<T>,
    opts: &ArnoldOptions,
) -> Result<(Certificate, ArnoldReport)> {
    let r = arnold_identity_report(s, opts)?;
    let cert = Certificate::new("arnold_identity", r.violations == 0, -(r.violations as f64)).with_detail(format!(
        "{} lines, {} violations, {} near-tangent and {} ruling samples skipped",
        r.lines, r.violations, r.skipped_near_tangent, r.skipped_ruling
    ));
    Ok((cert, r))
}
