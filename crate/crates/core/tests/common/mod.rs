//! Independent oracles shared by the integration suites. None of these reuse
//! the library's element kernels or solver.

#![allow(dead_code)]

use snowflake_fem::geometry::Point2;
use snowflake_fem::mesh::{polygon_base_mesh, uniform_refine};
use snowflake_fem::{SourceField, TriMesh};

/// Gradients of the three hat functions on a triangle, from the inverse of
/// the 3×3 matrix [1 x y] (Cramer's rule), plus the area.
pub fn hat_gradients(p: &[Point2; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1].x1 - p[0].x1) * (p[2].x2 - p[0].x2) - (p[2].x1 - p[0].x1) * (p[1].x2 - p[0].x2);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j].x2 - p[k].x2) / det, (p[k].x1 - p[j].x1) / det];
    }
    (g, 0.5 * det.abs())
}

/// Full dense stiffness matrix over all vertices, scaled by 1/μ.
pub fn dense_stiffness(mesh: &TriMesh, mu: f64) -> Vec<Vec<f64>> {
    let n = mesh.num_vertices();
    let mut a = vec![vec![0.0; n]; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (g, area) = hat_gradients(&mesh.corners(t));
        for i in 0..3 {
            for j in 0..3 {
                a[tri[i]][tri[j]] += area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]) / mu;
            }
        }
    }
    a
}

/// Gauss-Legendre nodes and weights on [0, 1], by Newton iteration on P_n.
pub fn gauss_legendre01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

/// ∫_T f·φ_i for each vertex i, by a collapsed (Duffy) tensor Gauss rule.
pub fn duffy_load(p: &[Point2; 3], source: &SourceField, n: usize) -> [f64; 3] {
    let gl = gauss_legendre01(n);
    let area = {
        let d = (p[1] - p[0]).cross(p[2] - p[0]);
        0.5 * d.abs()
    };
    let mut out = [0.0; 3];
    for &(s, ws) in &gl {
        for &(t, wt) in &gl {
            // (s, t) in the unit square → (l1, l2) = (s(1−t), st) in the reference triangle.
            let l1 = s * (1.0 - t);
            let l2 = s * t;
            let l0 = 1.0 - l1 - l2;
            let x = p[0] * l0 + p[1] * l1 + p[2] * l2;
            let w = ws * wt * s * 2.0 * area;
            let f = source.eval(x);
            out[0] += w * f * l0;
            out[1] += w * f * l1;
            out[2] += w * f * l2;
        }
    }
    out
}

/// Solves a dense system by Gaussian elimination with partial pivoting.
pub fn dense_lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            if m != 0.0 {
                for j in k..n {
                    a[i][j] -= m * a[k][j];
                }
                b[i] -= m * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Unit square split into two triangles and refined `k` times.
pub fn square_mesh(k: usize) -> TriMesh {
    let mut m = polygon_base_mesh(&snowflake_fem::geometry::unit_square()).unwrap();
    for _ in 0..k {
        m = uniform_refine(&m);
    }
    m
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
