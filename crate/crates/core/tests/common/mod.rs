#![allow(dead_code)]

use hypsurf::strip::StripModel;

/// Distance from `p` to the segment `c ± f`, by minimising over `t ∈ [−1, 1]`.
pub fn point_segment(p: [f64; 2], c: [f64; 2], f: [f64; 2]) -> f64 {
    let ff = f[0] * f[0] + f[1] * f[1];
    let t = if ff == 0.0 { 0.0 } else { (((p[0] - c[0]) * f[0] + (p[1] - c[1]) * f[1]) / ff).clamp(-1.0, 1.0) };
    ((p[0] - c[0] - t * f[0]).powi(2) + (p[1] - c[1] - t * f[1]).powi(2)).sqrt()
}

/// `max_k dist(ℓ(z_k), S_{z_k})` over a fixed set of heights, with the strip
/// sections tabulated once.
pub struct StripScan {
    pub zs: Vec<f64>,
    sections: Vec<([f64; 2], [f64; 2])>,
}

impl StripScan {
    pub fn new(model: &StripModel, window: (f64, f64), step: f64) -> Self {
        let n = ((window.1 - window.0) / step).round() as usize;
        let zs: Vec<f64> = (0..=n).map(|k| window.0 + k as f64 * step).collect();
        let sections = zs.iter().map(|&z| model.section(z)).collect();
        Self { zs, sections }
    }

    pub fn maxdist(&self, l: [f64; 4]) -> f64 {
        self.zs
            .iter()
            .zip(&self.sections)
            .map(|(&z, &(c, f))| point_segment([l[0] + l[1] * z, l[2] + l[3] * z], c, f))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanResult {
    /// Smallest value found at a scan point.
    pub best: f64,
    pub best_line: [f64; 4],
    /// Lipschitz bound over one scan cell: no line in the box scores below
    /// `best − cell_bound`.
    pub cell_bound: f64,
    pub evaluations: usize,
}

/// Exhaustive 4-D scan of `maxdist` over the box `|a|, |b|, |c|, |d| ≤ radius`
/// at resolution `res`, by branch and bound. Over a box with half-widths `h`
/// the value moves by at most `hypot(h_a + Z h_b, h_c + Z h_d)` with
/// `Z = max |z|`, so boxes whose centre exceeds the incumbent by that much
/// cannot hold a better scan point.
pub fn grid_scan(f: impl Fn([f64; 4]) -> f64, radius: f64, z_abs: f64, res: f64) -> ScanResult {
    let lip = |h: [f64; 4]| (h[0] + z_abs * h[1]).hypot(h[2] + z_abs * h[3]);
    let leaf = [res / 2.0; 4];
    let mut best = (f64::INFINITY, [0.0; 4]);
    let mut evals = 0;
    let mut stack = vec![([0.0; 4], [radius; 4])];
    while let Some((c, h)) = stack.pop() {
        let v = f(c);
        evals += 1;
        if v < best.0 {
            best = (v, c);
        }
        let is_leaf = (0..4).all(|k| h[k] <= leaf[k] + 1e-15);
        if is_leaf || v - lip(h) >= best.0 {
            continue;
        }
        // split the coordinate with the largest effect on the bound
        let k = (0..4)
            .filter(|&k| h[k] > leaf[k] + 1e-15)
            .max_by(|&i, &j| {
                let w = |k: usize| h[k] * if k % 2 == 1 { z_abs } else { 1.0 };
                w(i).total_cmp(&w(j))
            })
            .unwrap();
        for s in [-0.5, 0.5] {
            let mut c2 = c;
            let mut h2 = h;
            h2[k] = h[k] / 2.0;
            c2[k] = c[k] + s * h[k];
            stack.push((c2, h2));
        }
    }
    ScanResult { best: best.0, best_line: best.1, cell_bound: lip(leaf), evaluations: evals }
}
