//! P1 Galerkin discretization of −div((1/μ)∇u) = J with homogeneous
//! Dirichlet data, and a Jacobi-preconditioned conjugate gradient solver.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{DomainSpec, Point2, PrefractalBoundary};
use crate::mesh::{base_mesh, refine_to_size, GradingParams, MeshError, MeshHierarchy, TriMesh};
use crate::quadrature::{degree5, map_point};

pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Vector length handled per task in reductions; fixing it makes sums
/// independent of the number of worker threads.
const REDUCTION_CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("degenerate triangle (area {0:e})")]
    DegenerateTriangle(f64),
    #[error("mesh has no interior vertices")]
    NoInteriorDofs,
    #[error("permeability must be positive and finite, got {0}")]
    InvalidPermeability(f64),
    #[error("CG did not converge in {iterations} iterations (relative residual {:e})", history.last().copied().unwrap_or(f64::NAN))]
    MaxIterations { iterations: usize, history: Vec<f64> },
    #[error("non-positive curvature p·Ap = {curvature:e} at iteration {iteration}")]
    NonPositiveCurvature { iteration: usize, curvature: f64 },
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    Dimension { matrix: usize, vector: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Current density J(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceField {
    /// amplitude · exp(−width · |x − center|²)
    Gaussian { amplitude: f64, width: f64, center: Point2 },
    Constant(f64),
    /// c0 + c1·x1 + c2·x2
    Affine { c0: f64, c1: f64, c2: f64 },
    /// amplitude · 2π² sin(πx1) sin(πx2); the exact solution on the unit
    /// square is amplitude · sin(πx1) sin(πx2).
    SineProduct { amplitude: f64 },
}

impl SourceField {
    pub const DEFAULT_AMPLITUDE: f64 = 1e5;
    pub const DEFAULT_WIDTH: f64 = 5.0;

    /// J(x) = 10^5 exp(−5|x − center|²).
    pub fn gaussian(center: Point2) -> Self {
        SourceField::Gaussian {
            amplitude: Self::DEFAULT_AMPLITUDE,
            width: Self::DEFAULT_WIDTH,
            center,
        }
    }

    pub fn eval(&self, x: Point2) -> f64 {
        match *self {
            SourceField::Gaussian { amplitude, width, center } => {
                let d = x - center;
                amplitude * (-width * d.dot(d)).exp()
            }
            SourceField::Constant(c) => c,
            SourceField::Affine { c0, c1, c2 } => c0 + c1 * x.x1 + c2 * x.x2,
            SourceField::SineProduct { amplitude } => {
                let pi = std::f64::consts::PI;
                amplitude * 2.0 * pi * pi * (pi * x.x1).sin() * (pi * x.x2).sin()
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            SourceField::Gaussian { amplitude, width, center } => SourceField::Gaussian {
                amplitude: amplitude * factor,
                width,
                center,
            },
            SourceField::Constant(c) => SourceField::Constant(c * factor),
            SourceField::Affine { c0, c1, c2 } => SourceField::Affine {
                c0: c0 * factor,
                c1: c1 * factor,
                c2: c2 * factor,
            },
            SourceField::SineProduct { amplitude } => SourceField::SineProduct { amplitude: amplitude * factor },
        }
    }
}

fn signed_area(p: &[Point2; 3]) -> f64 {
    0.5 * (p[1] - p[0]).cross(p[2] - p[0])
}

/// Element stiffness ∫_T ∇φ_i·∇φ_j by the cotangent formula.
pub fn local_stiffness(p: &[Point2; 3]) -> Result<[[f64; 3]; 3], FemError> {
    let area = signed_area(p);
    if !(area > 0.0) {
        return Err(FemError::DegenerateTriangle(area));
    }
    let mut k = [[0.0; 3]; 3];
    for v in 0..3 {
        let (i, j) = ((v + 1) % 3, (v + 2) % 3);
        let u = p[i] - p[v];
        let w = p[j] - p[v];
        // cot of the angle at v couples the two other vertices
        let cot = u.dot(w) / (2.0 * area);
        k[i][j] = -0.5 * cot;
        k[j][i] = -0.5 * cot;
    }
    for i in 0..3 {
        k[i][i] = -(k[i][(i + 1) % 3] + k[i][(i + 2) % 3]);
    }
    Ok(k)
}

/// Element load ∫_T J φ_i by the degree-5 seven-point rule.
pub fn local_load(p: &[Point2; 3], source: &SourceField) -> [f64; 3] {
    let area = signed_area(p).abs();
    let mut f = [0.0; 3];
    for q in degree5() {
        let j = source.eval(map_point(p, &q.bary)) * q.weight * area;
        for (fi, li) in f.iter_mut().zip(q.bary) {
            *fi += j * li;
        }
    }
    f
}

/// Symmetric positive definite matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Builds from (row, col, value) triplets; duplicates are summed in input order.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; dim + 1];
        let mut col_indices = Vec::with_capacity(triplets.len() / 2);
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self {
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|r| self.get(r, r)).collect()
    }

    /// y = A x, row-parallel.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            let mut s = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *yr = s;
        });
    }

    /// Removes stored entries that are roundoff residue of an exact cancellation.
    fn drop_cancellations(&mut self) {
        let diag = self.diagonal();
        let mut offsets = vec![0usize; self.dim() + 1];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                let floor = 4.0 * f64::EPSILON * (diag[r].abs() + diag[c].abs());
                if r == c || v.abs() > floor {
                    cols.push(c);
                    vals.push(v);
                }
            }
            offsets[r + 1] = cols.len();
        }
        self.row_offsets = offsets;
        self.col_indices = cols;
        self.values = vals;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(REDUCTION_CHUNK)
        .zip(b.par_chunks(REDUCTION_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Assembled system over the interior vertices.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: SparseSystem,
    pub rhs: Vec<f64>,
    /// `dof_of_vertex[v]` is the unknown index of interior vertex `v`.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub interior: Vec<usize>,
}

/// Assembles stiffness (scaled by 1/μ) and load over interior vertices.
/// Boundary values are zero, so eliminating them needs no lifting term.
pub fn assemble(mesh: &TriMesh, source: &SourceField, mu: f64) -> Result<AssembledSystem, FemError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(FemError::InvalidPermeability(mu));
    }
    let interior = mesh.interior_vertices();
    if interior.is_empty() {
        return Err(FemError::NoInteriorDofs);
    }
    let mut dof_of_vertex = vec![None; mesh.num_vertices()];
    for (k, &v) in interior.iter().enumerate() {
        dof_of_vertex[v] = Some(k);
    }
    let scale = 1.0 / mu;
    let locals: Vec<([[f64; 3]; 3], [f64; 3])> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let p = mesh.corners(t);
            Ok((local_stiffness(&p)?, local_load(&p, source)))
        })
        .collect::<Result<_, FemError>>()?;
    let mut rhs = vec![0.0; interior.len()];
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, (k, f)) in locals.iter().enumerate() {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let Some(gi) = dof_of_vertex[tri[i]] else { continue };
            rhs[gi] += f[i];
            for j in 0..3 {
                if let Some(gj) = dof_of_vertex[tri[j]] {
                    triplets.push((gi, gj, scale * k[i][j]));
                }
            }
        }
    }
    let mut matrix = SparseSystem::from_triplets(interior.len(), triplets);
    matrix.drop_cancellations();
    Ok(AssembledSystem {
        matrix,
        rhs,
        dof_of_vertex,
        interior,
    })
}

/// CG stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    /// Defaults to max(50·√dim, 10000).
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_CG_TOL,
            max_iter: None,
        }
    }
}

impl CgOptions {
    pub fn max_iter_for(&self, dim: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((50.0 * (dim as f64).sqrt()).ceil() as usize).max(10_000))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn cg_solve(a: &SparseSystem, b: &[f64], opts: &CgOptions) -> Result<CgResult, FemError> {
    let n = a.dim();
    if b.len() != n {
        return Err(FemError::Dimension { matrix: n, vector: b.len() });
    }
    let max_iter = opts.max_iter_for(n);
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| 1.0 / d).collect();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgResult { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(FemError::NonPositiveCurvature { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rel = dot(&r, &r).sqrt() / b_norm;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(CgResult {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        z.par_iter_mut()
            .zip(&r)
            .zip(&inv_diag)
            .for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(FemError::MaxIterations {
        iterations: max_iter,
        history,
    })
}

/// Discrete solution u_h with its mesh.
#[derive(Debug, Clone)]
pub struct FemSolution {
    pub mesh: TriMesh,
    /// Nodal values; exactly zero on boundary vertices.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub mu: f64,
}

impl FemSolution {
    /// Energy a(u_h, u_h) = (1/μ)∫|∇u_h|².
    pub fn energy(&self) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|t| {
                let g = crate::field::element_gradient(self, t);
                self.mesh.triangle_area(t) * g.dot(g)
            })
            .sum::<f64>()
            / self.mu
    }
}

pub fn solve_on_mesh(mesh: &TriMesh, source: &SourceField, mu: f64, opts: &CgOptions) -> Result<FemSolution, FemError> {
    let sys = assemble(mesh, source, mu)?;
    let res = cg_solve(&sys.matrix, &sys.rhs, opts)?;
    let mut u = vec![0.0; mesh.num_vertices()];
    for (k, &v) in sys.interior.iter().enumerate() {
        u[v] = res.x[k];
    }
    Ok(FemSolution {
        mesh: mesh.clone(),
        u,
        iterations: res.iterations,
        relative_residual: res.relative_residual,
        mu,
    })
}

/// Everything produced by [`solve_problem`].
#[derive(Debug, Clone)]
pub struct ProblemSolution {
    pub boundary: PrefractalBoundary,
    /// Base mesh followed by the graded mesh.
    pub hierarchy: MeshHierarchy,
    pub solution: FemSolution,
}

/// Geometry → base mesh → graded refinement → assembly → CG.
pub fn solve_problem(
    spec: &DomainSpec,
    source: &SourceField,
    grading: &GradingParams,
    mu: f64,
    opts: &CgOptions,
) -> Result<ProblemSolution, FemError> {
    let boundary = spec.boundary()?;
    let base = base_mesh(spec, &boundary)?;
    let graded = refine_to_size(&base, &boundary, grading)?;
    let mut hierarchy = MeshHierarchy::new(base);
    hierarchy.push(graded);
    let solution = solve_on_mesh(hierarchy.finest(), source, mu, opts)?;
    Ok(ProblemSolution {
        boundary,
        hierarchy,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{polygon_base_mesh, uniform_refine};
    use approx::assert_relative_eq;

    #[test]
    fn right_triangle_stiffness() {
        let p = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let k = local_stiffness(&p).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn equilateral_stiffness_off_diagonals() {
        let s = 0.37;
        let p = [Point2::new(0.0, 0.0), Point2::new(s, 0.0), Point2::new(0.5 * s, s * 3f64.sqrt() / 2.0)];
        let k = local_stiffness(&p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_relative_eq!(k[i][j], -1.0 / (2.0 * 3f64.sqrt()), max_relative = 1e-13);
                }
            }
            assert!(k[i].iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_stiffness() {
        let p = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        assert!(matches!(local_stiffness(&p), Err(FemError::DegenerateTriangle(_))));
    }

    #[test]
    fn constant_load_is_a_third_of_area() {
        let p = [Point2::new(0.1, 0.2), Point2::new(0.9, 0.3), Point2::new(0.4, 0.8)];
        let area = signed_area(&p);
        for fi in local_load(&p, &SourceField::Constant(1.0)) {
            assert_relative_eq!(fi, area / 3.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn affine_load_matches_closed_form() {
        // ∫_T (c0 + c·x) φ_i = |T|/3·c0 + |T|/12·c·(x_0 + x_1 + x_2 + x_i)
        let p = [Point2::new(0.1, 0.2), Point2::new(0.9, 0.3), Point2::new(0.4, 0.8)];
        let (c0, c1, c2) = (0.7, -1.3, 2.1);
        let area = signed_area(&p);
        let f = local_load(&p, &SourceField::Affine { c0, c1, c2 });
        let lin = |x: Point2| c1 * x.x1 + c2 * x.x2;
        let sum: f64 = p.iter().map(|&x| lin(x)).sum();
        for i in 0..3 {
            let exact = area / 3.0 * c0 + area / 12.0 * (sum + lin(p[i]));
            assert_relative_eq!(f[i], exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn assemble_rejects_single_triangle() {
        let m = TriMesh::from_triangles(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(assemble(&m, &SourceField::Constant(1.0), 1.0), Err(FemError::NoInteriorDofs)));
        let sq = uniform_refine(&polygon_base_mesh(&crate::geometry::unit_square()).unwrap());
        assert!(matches!(assemble(&sq, &SourceField::Constant(1.0), 0.0), Err(FemError::InvalidPermeability(_))));
    }

    #[test]
    fn mu_scaling() {
        let m = uniform_refine(&uniform_refine(&polygon_base_mesh(&crate::geometry::unit_square()).unwrap()));
        let j = SourceField::Constant(1.0);
        let a1 = assemble(&m, &j, 1.0).unwrap();
        let a2 = assemble(&m, &j, 2.0).unwrap();
        assert_eq!(a1.rhs, a2.rhs);
        for (x, y) in a1.matrix.values.iter().zip(&a2.matrix.values) {
            assert_eq!(*y, 0.5 * x);
        }
    }

    #[test]
    fn cg_identity_one_step() {
        let a = SparseSystem::from_triplets(3, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let r = cg_solve(&a, &[1.5, -2.0, 0.25], &CgOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn cg_two_by_two() {
        let a = SparseSystem::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let r = cg_solve(&a, &[3.0, 3.0], &CgOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_reports_indefinite() {
        let a = SparseSystem::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        let err = cg_solve(&a, &[0.0, 1.0], &CgOptions::default()).unwrap_err();
        assert!(matches!(err, FemError::NonPositiveCurvature { .. }));
    }

    #[test]
    fn cg_iteration_cap() {
        let m = uniform_refine(&uniform_refine(&uniform_refine(&polygon_base_mesh(&crate::geometry::unit_square()).unwrap())));
        let sys = assemble(&m, &SourceField::Constant(1.0), 1.0).unwrap();
        let opts = CgOptions { tol: 1e-14, max_iter: Some(2) };
        match cg_solve(&sys.matrix, &sys.rhs, &opts) {
            Err(FemError::MaxIterations { iterations, history }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(CgOptions::default().max_iter_for(100), 10_000);
        assert_eq!(CgOptions::default().max_iter_for(1_000_000), 50_000);
    }
}
