//! Fixed-step two-stage Gauss–Legendre integration of linear systems
//! `y' = A(z) y`. The scheme is order 4, symmetric and symplectic, so for the
//! second-order equations used here the Wronskian is conserved to rounding.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

struct Tableau<T> {
    c: [T; 2],
    a: [[T; 2]; 2],
}

fn tableau<T: Real>() -> Tableau<T> {
    let r = T::lit(3.0).sqrt() / T::lit(6.0);
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    Tableau { c: [half - r, half + r], a: [[quarter, quarter - r], [quarter + r, quarter]] }
}

/// One step from `z` to `z + h`.
pub fn gl4_step<T, F>(a: &F, z: T, y: &[T], h: T) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(T) -> Matrix<T>,
{
    let n = y.len();
    let tab = tableau::<T>();
    let stages = [a(z + tab.c[0] * h), a(z + tab.c[1] * h)];
    // [I - h a_ij A_i] K = A_i y, unknowns K = (K1, K2)
    let mut sys = Matrix::zeros(2 * n, 2 * n);
    let mut rhs = vec![T::zero(); 2 * n];
    for i in 0..2 {
        let ai = &stages[i];
        let ay = ai.matvec(y);
        for r in 0..n {
            rhs[i * n + r] = ay[r];
            for j in 0..2 {
                for c in 0..n {
                    let id = if i == j && r == c { T::one() } else { T::zero() };
                    sys[(i * n + r, j * n + c)] = id - h * tab.a[i][j] * ai[(r, c)];
                }
            }
        }
    }
    let k = sys.solve(&rhs, T::epsilon()).ok_or_else(|| Error::IntegratorFailure {
        z: z.to_f64_lossy(),
        reason: "singular stage system".into(),
    })?;
    let half = T::lit(0.5);
    let out: Vec<T> = (0..n).map(|r| y[r] + h * half * (k[r] + k[n + r])).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegratorFailure { z: z.to_f64_lossy(), reason: "non-finite state".into() });
    }
    Ok(out)
}

/// States at `z0, z0 + h, …, z0 + steps·h` (`h` may be negative).
pub fn integrate_linear<T, F>(a: F, z0: T, y0: &[T], h: T, steps: usize) -> Result<Vec<Vec<T>>>
where
    T: Real,
    F: Fn(T) -> Matrix<T>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0.to_vec());
    let mut y = y0.to_vec();
    for s in 0..steps {
        let z = z0 + h * T::from_usize_lossy(s);
        y = gl4_step(&a, z, &y, h)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// Like [`integrate_linear`] with `refine` substeps per output node; used as a
/// finer reference run.
pub fn integrate_linear_refined<T, F>(a: F, z0: T, y0: &[T], h: T, steps: usize, refine: usize) -> Result<Vec<Vec<T>>>
where
    T: Real,
    F: Fn(T) -> Matrix<T>,
{
    let refine = refine.max(1);
    let hs = h / T::from_usize_lossy(refine);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0.to_vec());
    let mut y = y0.to_vec();
    for s in 0..steps {
        for r in 0..refine {
            let z = z0 + h * T::from_usize_lossy(s) + hs * T::from_usize_lossy(r);
            y = gl4_step(&a, z, &y, hs)?;
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// System matrix of `y'' = c(z) y` written as `(y, y')' = [[0, 1], [c, 0]] (y, y')`.
pub fn second_order<T: Real>(c: T) -> Matrix<T> {
    Matrix::from_row_major(2, 2, vec![T::zero(), T::one(), c, T::zero()])
}
