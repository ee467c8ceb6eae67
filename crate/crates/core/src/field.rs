//! Post-processing: the induction B = (∂u/∂x2, −∂u/∂x1), norms, errors
//! against nested references, and observed convergence orders.

use thiserror::Error;

use crate::fem::{FemSolution, ProblemSolution};
use crate::geometry::{boundary_length, DomainSpec, Point2};
use crate::mesh::{ancestors, TriMesh};
use crate::quadrature::{degree2, degree5, map_point};

/// Vacuum permeability expressed in mT·m/A. Multiplying |∇u| (A/m for a
/// current density in A/m²) by this gives |B| in millitesla.
pub const B_SCALE_MILLITESLA: f64 = 4.0e-7 * std::f64::consts::PI * 1e3;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("meshes are not nested: parent chain broken")]
    NotNested,
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("convergence record invalid: {0}")]
    InvalidRecord(String),
    #[error("point {0} lies outside the sampled mesh")]
    PointOutside(Point2),
}

/// Gradient of the P1 interpolant on triangle `t` (constant on `t`).
pub fn element_gradient(sol: &FemSolution, t: usize) -> Point2 {
    mesh_gradient(&sol.mesh, &sol.u, t)
}

pub(crate) fn mesh_gradient(mesh: &TriMesh, u: &[f64], t: usize) -> Point2 {
    let tri = mesh.triangles[t];
    let p = mesh.corners(t);
    let twice_area = (p[1] - p[0]).cross(p[2] - p[0]);
    let mut g = Point2::default();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let grad_lambda = Point2::new(p[j].x2 - p[k].x2, p[k].x1 - p[j].x1);
        g = g + grad_lambda * (u[tri[i]] / twice_area);
    }
    g
}

/// Per-triangle B = (∂u/∂x2, −∂u/∂x1); the third component vanishes.
pub fn b_field(sol: &FemSolution) -> Vec<[f64; 2]> {
    (0..sol.mesh.num_triangles())
        .map(|t| {
            let g = element_gradient(sol, t);
            [g.x2, -g.x1]
        })
        .collect()
}

/// max_T |B| together with the triangle attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfB {
    pub value: f64,
    pub triangle: usize,
}

pub fn linf_b(sol: &FemSolution) -> LinfB {
    b_field(sol)
        .iter()
        .enumerate()
        .map(|(t, b)| LinfB { value: b[0].hypot(b[1]), triangle: t })
        .fold(LinfB { value: 0.0, triangle: 0 }, |acc, x| if x.value > acc.value { x } else { acc })
}

/// ‖u_h‖_{L²}, exact for P1 via the edge-midpoint rule.
pub fn l2_norm(mesh: &TriMesh, u: &[f64]) -> f64 {
    (0..mesh.num_triangles())
        .map(|t| {
            let tri = mesh.triangles[t];
            let area = mesh.triangle_area(t);
            degree2()
                .iter()
                .map(|q| {
                    let v: f64 = (0..3).map(|i| q.bary[i] * u[tri[i]]).sum();
                    q.weight * v * v
                })
                .sum::<f64>()
                * area
        })
        .sum::<f64>()
        .sqrt()
}

/// |u_h|_{H¹} = ‖∇u_h‖_{L²}.
pub fn h1_seminorm(mesh: &TriMesh, u: &[f64]) -> f64 {
    (0..mesh.num_triangles())
        .map(|t| {
            let g = mesh_gradient(mesh, u, t);
            mesh.triangle_area(t) * g.dot(g)
        })
        .sum::<f64>()
        .sqrt()
}

/// Interpolates nodal values on `chain[0]` onto the vertices of `chain.last()`.
/// Each mesh in `chain` must be refined from its predecessor.
pub fn prolong(chain: &[&TriMesh], coarse_u: &[f64]) -> Result<Vec<f64>, FieldError> {
    let coarse = chain.first().ok_or(FieldError::NotNested)?;
    let fine = chain.last().ok_or(FieldError::NotNested)?;
    if coarse_u.len() != coarse.num_vertices() {
        return Err(FieldError::NotNested);
    }
    let anc = ancestors(chain).ok_or(FieldError::NotNested)?;
    let mut out = vec![f64::NAN; fine.num_vertices()];
    for (t, tri) in fine.triangles.iter().enumerate() {
        let a = anc[t];
        let ctri = coarse.triangles[a];
        for &v in tri {
            if out[v].is_nan() {
                let l = coarse.barycentric(a, fine.vertices[v]);
                if l.iter().any(|&x| x < -1e-8) {
                    return Err(FieldError::NotNested);
                }
                out[v] = l[0] * coarse_u[ctri[0]] + l[1] * coarse_u[ctri[1]] + l[2] * coarse_u[ctri[2]];
            }
        }
    }
    if out.iter().any(|x| x.is_nan()) {
        return Err(FieldError::NotNested);
    }
    Ok(out)
}

/// (|e|_{H¹}, ‖e‖_{L²}) for e = prolong(coarse) − reference, computed on the
/// reference mesh. `chain` runs from the coarse mesh to the reference mesh.
pub fn h1_l2_error(coarse: &FemSolution, reference: &FemSolution, chain: &[&TriMesh]) -> Result<(f64, f64), FieldError> {
    let (first, last) = (chain.first().ok_or(FieldError::NotNested)?, chain.last().ok_or(FieldError::NotNested)?);
    if first.num_triangles() != coarse.mesh.num_triangles() || last.num_triangles() != reference.mesh.num_triangles() {
        return Err(FieldError::NotNested);
    }
    let up = prolong(chain, &coarse.u)?;
    let diff: Vec<f64> = up.iter().zip(&reference.u).map(|(a, b)| a - b).collect();
    Ok((h1_seminorm(&reference.mesh, &diff), l2_norm(&reference.mesh, &diff)))
}

/// (|u − u_h|_{H¹}, ‖u − u_h‖_{L²}) against a closed-form solution, by the
/// degree-5 rule on every triangle.
pub fn error_vs_exact(sol: &FemSolution, exact: impl Fn(Point2) -> f64, exact_grad: impl Fn(Point2) -> Point2) -> (f64, f64) {
    let mesh = &sol.mesh;
    let (mut h1, mut l2) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles[t];
        let p = mesh.corners(t);
        let area = mesh.triangle_area(t);
        let g = element_gradient(sol, t);
        for q in degree5() {
            let x = map_point(&p, &q.bary);
            let uh: f64 = (0..3).map(|i| q.bary[i] * sol.u[tri[i]]).sum();
            let e = exact(x) - uh;
            let ge = exact_grad(x) - g;
            l2 += q.weight * area * e * e;
            h1 += q.weight * area * ge.dot(ge);
        }
    }
    (h1.sqrt(), l2.sqrt())
}

/// One row of a convergence ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub h: f64,
    pub err_h1: f64,
    pub err_l2: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceRecord {
    pub points: Vec<ConvergencePoint>,
}

/// Least-squares slopes of log(error) against log(h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedOrders {
    pub h1: f64,
    pub l2: f64,
}

impl ConvergenceRecord {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.points.windows(2).any(|w| !(w[1].h < w[0].h)) {
            return Err(FieldError::InvalidRecord("h must be strictly decreasing".into()));
        }
        if self.points.iter().any(|p| !(p.err_h1 > 0.0 && p.err_l2 > 0.0 && p.h > 0.0)) {
            return Err(FieldError::InvalidRecord("errors and h must be positive".into()));
        }
        Ok(())
    }
}

pub fn log_log_slope(h: &[f64], e: &[f64]) -> Result<f64, FieldError> {
    if h.len() < 3 || e.len() != h.len() {
        return Err(FieldError::TooFewPoints { needed: 3, got: h.len().min(e.len()) });
    }
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|x| x.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

pub fn observed_order(rec: &ConvergenceRecord) -> Result<ObservedOrders, FieldError> {
    if rec.points.len() < 3 {
        return Err(FieldError::TooFewPoints { needed: 3, got: rec.points.len() });
    }
    rec.validate()?;
    let h: Vec<f64> = rec.points.iter().map(|p| p.h).collect();
    let e1: Vec<f64> = rec.points.iter().map(|p| p.err_h1).collect();
    let e2: Vec<f64> = rec.points.iter().map(|p| p.err_l2).collect();
    Ok(ObservedOrders {
        h1: log_log_slope(&h, &e1)?,
        l2: log_log_slope(&h, &e2)?,
    })
}

/// Point location in a triangulation via a uniform background grid.
#[derive(Debug, Clone)]
pub struct PointLocator<'a> {
    mesh: &'a TriMesh,
    origin: Point2,
    cell: f64,
    dims: (usize, usize),
    cells: Vec<Vec<u32>>,
}

const LOCATE_TOL: f64 = 1e-10;

impl<'a> PointLocator<'a> {
    /// Cell size is the median triangle diameter.
    pub fn new(mesh: &'a TriMesh) -> Self {
        let mut diam: Vec<f64> = (0..mesh.num_triangles()).map(|t| mesh.diameter(t)).collect();
        diam.sort_by(f64::total_cmp);
        let cell = diam.get(diam.len() / 2).copied().unwrap_or(1.0).max(1e-300);
        let (lo, hi) = crate::geometry::bounding_box(&mesh.vertices);
        let dims = (
            ((hi.x1 - lo.x1) / cell).floor() as usize + 1,
            ((hi.x2 - lo.x2) / cell).floor() as usize + 1,
        );
        let mut cells = vec![Vec::new(); dims.0 * dims.1];
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        for t in 0..mesh.num_triangles() {
            let (a, b) = crate::geometry::bounding_box(&mesh.corners(t));
            for j in clamp((a.x2 - lo.x2) / cell, dims.1)..=clamp((b.x2 - lo.x2) / cell, dims.1) {
                for i in clamp((a.x1 - lo.x1) / cell, dims.0)..=clamp((b.x1 - lo.x1) / cell, dims.0) {
                    cells[j * dims.0 + i].push(t as u32);
                }
            }
        }
        Self {
            mesh,
            origin: lo,
            cell,
            dims,
            cells,
        }
    }

    fn inside(&self, t: usize, x: Point2) -> Option<[f64; 3]> {
        let l = self.mesh.barycentric(t, x);
        l.iter().all(|&v| v >= -LOCATE_TOL).then_some(l)
    }

    /// Triangle containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: Point2) -> Option<(usize, [f64; 3])> {
        let fi = (x.x1 - self.origin.x1) / self.cell;
        let fj = (x.x2 - self.origin.x2) / self.cell;
        if fi >= 0.0 && fj >= 0.0 && (fi as usize) < self.dims.0 && (fj as usize) < self.dims.1 {
            for &t in &self.cells[fj as usize * self.dims.0 + fi as usize] {
                if let Some(l) = self.inside(t as usize, x) {
                    return Some((t as usize, l));
                }
            }
        }
        // exhaustive fallback
        (0..self.mesh.num_triangles()).find_map(|t| self.inside(t, x).map(|l| (t, l)))
    }

    /// Value of the P1 function `u` at `x`.
    pub fn eval(&self, u: &[f64], x: Point2) -> Result<f64, FieldError> {
        let (t, l) = self.locate(x).ok_or(FieldError::PointOutside(x))?;
        let tri = self.mesh.triangles[t];
        Ok(l[0] * u[tri[0]] + l[1] * u[tri[1]] + l[2] * u[tri[2]])
    }
}

/// ‖u_a − u_b‖_{L²(Ω_a)} where `a` lives on the smaller domain. Both
/// functions are sampled at the degree-5 points of `a`'s mesh.
pub fn l2_difference_on(a: &FemSolution, b: &FemSolution) -> Result<f64, FieldError> {
    let loc = PointLocator::new(&b.mesh);
    let mut acc = 0.0;
    for t in 0..a.mesh.num_triangles() {
        let tri = a.mesh.triangles[t];
        let p = a.mesh.corners(t);
        let area = a.mesh.triangle_area(t);
        for q in degree5() {
            let x = map_point(&p, &q.bary);
            let ua: f64 = (0..3).map(|i| q.bary[i] * a.u[tri[i]]).sum();
            let ub = loc.eval(&b.u, x)?;
            acc += q.weight * area * (ua - ub) * (ua - ub);
        }
    }
    Ok(acc.sqrt())
}

/// Per-run summary of the induction and the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldReport {
    pub domain: String,
    pub level: u32,
    /// Global mesh-size parameter the mesh was graded with.
    pub h: f64,
    /// Per-triangle (B1, B2), unscaled.
    pub b: Vec<[f64; 2]>,
    /// max_T |∇u_h|, unscaled.
    pub linf_b: LinfB,
    /// `linf_b` multiplied by the reporting scale (millitesla by default).
    pub linf_b_scaled: f64,
    pub l2_u: f64,
    pub h1_semi_u: f64,
    pub boundary_length: f64,
    pub num_vertices: usize,
    pub num_triangles: usize,
    pub cg_iterations: usize,
    pub relative_residual: f64,
}

pub fn field_report(spec: &DomainSpec, problem: &ProblemSolution, h: f64, b_scale: f64) -> FieldReport {
    let sol = &problem.solution;
    let linf = linf_b(sol);
    FieldReport {
        domain: spec.label(),
        level: spec.level(),
        h,
        b: b_field(sol),
        linf_b: linf,
        linf_b_scaled: linf.value * b_scale,
        l2_u: l2_norm(&sol.mesh, &sol.u),
        h1_semi_u: h1_seminorm(&sol.mesh, &sol.u),
        boundary_length: boundary_length(&problem.boundary),
        num_vertices: sol.mesh.num_vertices(),
        num_triangles: sol.mesh.num_triangles(),
        cg_iterations: sol.iterations,
        relative_residual: sol.relative_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unit_square;
    use crate::mesh::{polygon_base_mesh, uniform_refine};
    use approx::assert_relative_eq;

    fn square(levels: usize) -> TriMesh {
        let mut m = polygon_base_mesh(&unit_square()).unwrap();
        for _ in 0..levels {
            m = uniform_refine(&m);
        }
        m
    }

    fn with_values(mesh: TriMesh, f: impl Fn(Point2) -> f64) -> FemSolution {
        let u = mesh.vertices.iter().map(|&p| f(p)).collect();
        FemSolution { mesh, u, iterations: 0, relative_residual: 0.0, mu: 1.0 }
    }

    #[test]
    fn gradient_of_linear_data() {
        let s = with_values(square(2), |p| p.x1);
        for t in 0..s.mesh.num_triangles() {
            let g = element_gradient(&s, t);
            assert!((g.x1 - 1.0).abs() < 1e-13 && g.x2.abs() < 1e-13);
        }
        let s = with_values(square(2), |_| 3.0);
        assert!(b_field(&s).iter().all(|b| b[0].abs() < 1e-12 && b[1].abs() < 1e-12));
    }

    #[test]
    fn b_field_rotates_gradient() {
        let s = with_values(square(1), |p| p.x1);
        for b in b_field(&s) {
            assert!((b[0]).abs() < 1e-13 && (b[1] + 1.0).abs() < 1e-13);
        }
        let s = with_values(square(1), |p| p.x2);
        for b in b_field(&s) {
            assert!((b[0] - 1.0).abs() < 1e-13 && b[1].abs() < 1e-13);
        }
        let s = with_values(square(2), |p| 2.0 * p.x1 - 0.5 * p.x2);
        assert_relative_eq!(linf_b(&s).value, 4.25f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = square(3);
        let mut state = 12345u64;
        let u: Vec<f64> = (0..mesh.num_vertices())
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let s = FemSolution { mesh, u, iterations: 0, relative_residual: 0.0, mu: 1.0 };
        for t in 0..s.mesh.num_triangles() {
            let tri = s.mesh.triangles[t];
            let c = s.mesh.centroid(t);
            let step = 1e-6 * s.mesh.diameter(t);
            let interp = |x: Point2| {
                let l = s.mesh.barycentric(t, x);
                (0..3).map(|i| l[i] * s.u[tri[i]]).sum::<f64>()
            };
            let fd = Point2::new(
                (interp(c + Point2::new(step, 0.0)) - interp(c - Point2::new(step, 0.0))) / (2.0 * step),
                (interp(c + Point2::new(0.0, step)) - interp(c - Point2::new(0.0, step))) / (2.0 * step),
            );
            let g = element_gradient(&s, t);
            assert!((g - fd).norm() <= 1e-5 * g.norm().max(1e-3));
        }
    }

    #[test]
    fn prolong_is_exact_on_coarse_space() {
        let coarse = square(1);
        let mid = uniform_refine(&coarse);
        let fine = uniform_refine(&mid);
        let s = with_values(coarse.clone(), |p| (3.0 * p.x1).sin() + p.x2 * p.x2);
        let chain = [&coarse, &mid, &fine];
        let up = prolong(&chain, &s.u).unwrap();
        assert_eq!(&up[..coarse.num_vertices()], &s.u[..]);
        let lin = with_values(coarse.clone(), |p| 1.0 + 2.0 * p.x1 - p.x2);
        let up_lin = prolong(&chain, &lin.u).unwrap();
        for (v, p) in fine.vertices.iter().enumerate() {
            assert!((up_lin[v] - (1.0 + 2.0 * p.x1 - p.x2)).abs() < 1e-13);
        }
        let e_coarse = h1_seminorm(&coarse, &s.u);
        let e_fine = h1_seminorm(&fine, &up);
        assert_relative_eq!(e_coarse, e_fine, max_relative = 1e-12);
        assert_relative_eq!(l2_norm(&coarse, &s.u), l2_norm(&fine, &up), max_relative = 1e-12);
    }

    #[test]
    fn prolong_rejects_unrelated_meshes() {
        let a = square(1);
        let b = square(1);
        let vals = vec![0.0; a.num_vertices()];
        assert_eq!(prolong(&[&a, &b], &vals), Err(FieldError::NotNested));
    }

    #[test]
    fn self_error_is_zero() {
        let m = square(2);
        let s = with_values(m.clone(), |p| p.x1 * p.x2);
        assert_eq!(h1_l2_error(&s, &s, &[&m]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn slopes_of_synthetic_data() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let rec = ConvergenceRecord {
            points: h.iter().map(|&h| ConvergencePoint { h, err_h1: 3.0 * h, err_l2: 0.5 * h * h }).collect(),
        };
        let o = observed_order(&rec).unwrap();
        assert!((o.h1 - 1.0).abs() < 1e-12);
        assert!((o.l2 - 2.0).abs() < 1e-12);
        let short = ConvergenceRecord { points: rec.points[..2].to_vec() };
        assert!(matches!(observed_order(&short), Err(FieldError::TooFewPoints { .. })));
        let mut bad = rec.clone();
        bad.points.swap(0, 1);
        assert!(observed_order(&bad).is_err());
    }

    #[test]
    fn difference_of_identical_solutions() {
        let s = with_values(square(2), |p| p.x1 * (1.0 - p.x1) * p.x2);
        assert!(l2_difference_on(&s, &s).unwrap() < 1e-15);
    }

    #[test]
    fn locator_finds_every_centroid() {
        let m = square(3);
        let loc = PointLocator::new(&m);
        for t in 0..m.num_triangles() {
            assert_eq!(loc.locate(m.centroid(t)).unwrap().0, t);
        }
        assert!(loc.locate(Point2::new(2.0, 2.0)).is_none());
    }
}
