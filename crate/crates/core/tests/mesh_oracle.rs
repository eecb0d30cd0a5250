use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypsurf::glue_smooth::{export_mesh, glue, make_kernel, quasicone_field, smooth, Mesh};
use hypsurf::linalg::{symmetric_eigen, Matrix};
use hypsurf::strip::{build_strip, strip_field, StripOptions};
use hypsurf::supportgeo::{FieldGrid, SupportField};

fn smoothed() -> SupportField<f64> {
    let model = build_strip(&StripOptions::default()).unwrap().model;
    let grid = FieldGrid::symmetric(12.0, 1.0 / 64.0, 128).unwrap();
    let e = glue(&strip_field(&model, grid).unwrap(), &quasicone_field(grid).unwrap()).unwrap();
    smooth(&e, &make_kernel(0.05, grid.dz(), grid.n_theta).unwrap()).unwrap()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    a.map(|v| v / n)
}

/// Normal at vertex `(r, j)` from a least-squares quadric height function
/// `w = αu² + βuv + γv² + δu + εv + ζ` over the 5×5 patch, in the frame of
/// the patch's principal axes.
fn fitted_normal(mesh: &Mesh, r: usize, j: usize) -> [f64; 3] {
    let nt = mesh.n_theta;
    let mut pts = Vec::new();
    for dr in -2i64..=2 {
        for dj in -2i64..=2 {
            let jj = (j as i64 + dj).rem_euclid(nt as i64) as usize;
            pts.push(mesh.vertex((r as i64 + dr) as usize, jj));
        }
    }
    let o = mesh.vertex(r, j);
    // unit-sized patch; a uniform scale leaves the normal unchanged
    let size = pts.iter().map(|&p| dot(sub(p, o), sub(p, o)).sqrt()).fold(0.0, f64::max);
    let local: Vec<[f64; 3]> = pts.iter().map(|&p| sub(p, o).map(|x| x / size)).collect();
    let mut cov = Matrix::zeros(3, 3);
    for p in &local {
        for a in 0..3 {
            for b in 0..3 {
                cov[(a, b)] += p[a] * p[b];
            }
        }
    }
    let eig = symmetric_eigen(&cov);
    // ascending eigenvalues: the smallest spans the normal direction
    let v = &eig.vectors;
    let axis = |k: usize| [v[(0, k)], v[(1, k)], v[(2, k)]];
    let (n0, e1, e2) = (axis(0), axis(2), axis(1));
    let mut ata = Matrix::zeros(6, 6);
    let mut atb = vec![0.0; 6];
    for p in &local {
        let (u, v, w) = (dot(*p, e1), dot(*p, e2), dot(*p, n0));
        let row = [u * u, u * v, v * v, u, v, 1.0];
        for a in 0..6 {
            atb[a] += row[a] * w;
            for b in 0..6 {
                ata[(a, b)] += row[a] * row[b];
            }
        }
    }
    let c = ata.solve(&atb, 1e-12).expect("well-posed fit");
    // gradient of w − (δu + εv + ...) at the origin
    let n = [n0[0] - c[3] * e1[0] - c[4] * e2[0], n0[1] - c[3] * e1[1] - c[4] * e2[1], n0[2] - c[3] * e1[2] - c[4] * e2[2]];
    unit(n)
}

/// Where the sections are round the patch is two-dimensional and the fit is
/// well posed; near `|z| < 1` the sections are thin and neighbouring
/// directions share almost the same support point.
#[test]
fn mesh_normals_match_local_fit() {
    let d = smoothed();
    let mesh = export_mesh(&d, -3.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut fitted) = (0.0_f64, 0);
    while fitted < 200 {
        let r = rng.gen_range(2..mesh.rows - 2);
        if mesh.vertex(r, 0)[2].abs() < 1.25 {
            continue;
        }
        fitted += 1;
        let j = rng.gen_range(0..mesh.n_theta);
        let fit = fitted_normal(&mesh, r, j);
        let n = mesh.normals[r * mesh.n_theta + j];
        worst = worst.max(dot(fit, n).abs().min(1.0).acos());
    }
    assert!(worst < 2e-2, "worst normal angle {worst}");
}

/// Support points of one direction at neighbouring heights trace a curve on
/// the surface, so the normal is orthogonal to its chord; the normal's
/// horizontal part points along the direction.
#[test]
fn mesh_normals_are_orthogonal_to_height_curves() {
    let d = smoothed();
    let mesh = export_mesh(&d, -3.0, 3.0).unwrap();
    let mut worst: f64 = 0.0;
    for r in 1..mesh.rows - 1 {
        for j in 0..mesh.n_theta {
            let n = mesh.normals[r * mesh.n_theta + j];
            assert_unit(n);
            let t = unit(sub(mesh.vertex(r + 1, j), mesh.vertex(r - 1, j)));
            worst = worst.max(dot(t, n).abs());
            let theta = d.grid.theta(j);
            let h = [theta.cos(), theta.sin(), 0.0];
            assert!(dot(n, h) > 0.0);
            assert!(cross(h, [n[0], n[1], 0.0])[2].abs() < 1e-12);
        }
    }
    assert!(worst < 1e-2, "worst |n·t| {worst}");
}

fn assert_unit(n: [f64; 3]) {
    assert!((dot(n, n) - 1.0).abs() < 1e-12);
}

#[test]
fn mesh_vertices_are_support_points() {
    let d = smoothed();
    let mesh = export_mesh(&d, -3.0, 3.0).unwrap();
    let grid = d.grid;
    for (r, &i) in mesh.z_rows.iter().enumerate().step_by(7) {
        let h = d.row(i);
        let scale = h.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for j in 0..mesh.n_theta {
            let v = mesh.vertex(r, j);
            assert_eq!(v[2], grid.z(i));
            for (k, &hk) in h.iter().enumerate() {
                let t = grid.theta(k);
                let s = v[0] * t.cos() + v[1] * t.sin();
                assert!(s <= hk + 1e-9 * scale, "row {i} vertex {j} direction {k}: {s} > {hk}");
                if k == j {
                    assert!((s - hk).abs() < 1e-9 * scale);
                }
            }
        }
    }
    // consecutive rows share the quad structure with a wrapped seam
    let faces = mesh.faces();
    assert_eq!(faces.len(), (mesh.rows - 1) * mesh.n_theta);
    let last = faces[mesh.n_theta - 1];
    assert_eq!(last[1], 0);
    let n = mesh.normals[5 * mesh.n_theta + 3];
    let a = sub(mesh.vertex(5, 4), mesh.vertex(5, 2));
    let b = sub(mesh.vertex(6, 3), mesh.vertex(4, 3));
    assert!(dot(unit(cross(a, b)), n).abs() > 0.99);
}

