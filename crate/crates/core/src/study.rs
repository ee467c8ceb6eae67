//! The reproducible experiments: the ‖B‖∞ table over Ω_0..Ω_n, H¹
//! convergence ladders against nested references, the manufactured-solution
//! check on the unit square, and the Ω_n → Ω_{n+1} difference sequence.

use std::f64::consts::PI;

use thiserror::Error;

use crate::fem::{solve_on_mesh, solve_problem, CgOptions, FemError, FemSolution, SourceField};
use crate::field::{
    error_vs_exact, field_report, h1_l2_error, l2_difference_on, observed_order, ConvergencePoint, ConvergenceRecord,
    FieldError, FieldReport, ObservedOrders, B_SCALE_MILLITESLA,
};
use crate::geometry::{point_in_polygon, DomainShape, DomainSpec, GeometryError, Point2, PolygonLocator};
use crate::mesh::{
    base_mesh, check_grisvard, pinned_h, polygon_base_mesh, refine_to_size, uniform_refine, GradingParams, MeshError,
    TriMesh,
};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("solver: {0}")]
    Fem(#[from] FemError),
    #[error("post-processing: {0}")]
    Field(#[from] FieldError),
    #[error("{0}")]
    Invalid(String),
}

/// Reference ‖B‖∞ in millitesla for Ω_0..Ω_5.
pub const REFERENCE_LINF_B_MT: [f64; 6] = [17.946, 26.688, 35.575, 47.124, 63.504, 85.43];

/// Number of segments of the polygon standing in for the circle Ω_0.
pub const DEFAULT_CIRCLE_SEGMENTS: usize = 256;

/// Radius of Ω_0.
pub const CIRCLE_RADIUS: f64 = 0.5;

/// Length of ∂Ω: 2πr for the circle (not its polygonal stand-in),
/// 3·(4/3)^n for the level-n snowflake, 4 for the unit square.
pub fn domain_boundary_length(spec: &DomainSpec) -> f64 {
    match spec.shape {
        DomainShape::CirclePolygon { radius, .. } => 2.0 * PI * radius,
        DomainShape::Snowflake { level } => 3.0 * (4.0f64 / 3.0).powi(level as i32),
        DomainShape::UnitSquare => 4.0,
    }
}

/// The domain of table row `n`: the circle for 0, the snowflake otherwise.
pub fn table_domain(n: u32, circle_segments: usize) -> DomainSpec {
    if n == 0 {
        DomainSpec::circle(CIRCLE_RADIUS, circle_segments)
    } else {
        DomainSpec::snowflake(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Options {
    pub max_n: u32,
    pub circle_segments: usize,
    /// η, σ and R; `h` is replaced per level by `h_override` or the pinned rule.
    pub grading: GradingParams,
    pub h_override: Option<f64>,
    pub source_amplitude: f64,
    pub source_width: f64,
    pub mu: f64,
    pub cg: CgOptions,
    pub b_scale: f64,
}

impl Default for Table1Options {
    fn default() -> Self {
        Self {
            max_n: 4,
            circle_segments: DEFAULT_CIRCLE_SEGMENTS,
            grading: GradingParams::pinned(0),
            h_override: None,
            source_amplitude: SourceField::DEFAULT_AMPLITUDE,
            source_width: SourceField::DEFAULT_WIDTH,
            mu: 1.0,
            cg: CgOptions::default(),
            b_scale: B_SCALE_MILLITESLA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub report: FieldReport,
    /// Exact ℓ(n).
    pub ell: f64,
    pub reference: Option<f64>,
    /// (computed − reference) / reference.
    pub deviation: Option<f64>,
}

/// Solves one table row.
pub fn run_table_row(n: u32, opts: &Table1Options) -> Result<Table1Row, StudyError> {
    let spec = table_domain(n, opts.circle_segments);
    let grading = opts.grading.with_h(opts.h_override.unwrap_or_else(|| pinned_h(n)));
    let source = SourceField::Gaussian {
        amplitude: opts.source_amplitude,
        width: opts.source_width,
        center: spec.center,
    };
    let problem = solve_problem(&spec, &source, &grading, opts.mu, &opts.cg)?;
    let report = field_report(&spec, &problem, grading.h, opts.b_scale);
    let reference = REFERENCE_LINF_B_MT.get(n as usize).copied();
    Ok(Table1Row {
        ell: domain_boundary_length(&spec),
        deviation: reference.map(|r| (report.linf_b_scaled - r) / r),
        reference,
        report,
    })
}

/// Ω_0 (circle) and Ω_1..Ω_max_n at the pinned discretization.
pub fn run_table1(opts: &Table1Options) -> Result<Vec<Table1Row>, StudyError> {
    (0..=opts.max_n).map(|n| run_table_row(n, opts)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    pub domain: DomainSpec,
    /// Number of study meshes, at least 4.
    pub levels: usize,
    /// Grisvard-graded ladder; otherwise uniform refinement.
    pub graded: bool,
    /// Mesh-size parameter of the coarsest study mesh; halved per level.
    pub h0: f64,
    pub grading: GradingParams,
    /// Uniform refinements of the finest study mesh forming the reference.
    pub reference_refinements: usize,
    pub source: SourceField,
    pub cg: CgOptions,
}

impl ConvergenceOptions {
    pub fn new(domain: DomainSpec, graded: bool) -> Self {
        let h0 = 3f64.powi(-(domain.level() as i32));
        Self {
            source: SourceField::gaussian(domain.center),
            domain,
            levels: 4,
            graded,
            h0,
            grading: GradingParams::new(h0),
            reference_refinements: 2,
            cg: CgOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub h_param: f64,
    pub max_diameter: f64,
    pub num_triangles: usize,
    pub grisvard_pass: bool,
}

#[derive(Debug, Clone)]
pub struct ConvergenceOutcome {
    /// `h` is the largest triangle diameter of each study mesh.
    pub record: ConvergenceRecord,
    pub orders: ObservedOrders,
    pub levels: Vec<LevelSummary>,
    pub reference_triangles: usize,
    pub solutions: Vec<FemSolution>,
    pub reference: FemSolution,
    pub meshes: Vec<TriMesh>,
}

/// Builds the nested study ladder plus reference meshes.
pub fn convergence_meshes(opts: &ConvergenceOptions) -> Result<(Vec<TriMesh>, Vec<LevelSummary>), StudyError> {
    if opts.levels < 4 {
        return Err(StudyError::Invalid(format!("need at least 4 levels, got {}", opts.levels)));
    }
    let boundary = opts.domain.boundary()?;
    let base = base_mesh(&opts.domain, &boundary)?;
    let mut meshes: Vec<TriMesh> = Vec::new();
    let mut summary = Vec::new();
    let mut h = opts.h0;
    let mut current = base;
    for k in 0..opts.levels {
        let g = opts.grading.with_h(h);
        let next = if opts.graded {
            refine_to_size(&current, &boundary, &g)?
        } else if k == 0 {
            let target = g.sigma * g.h * g.cutoff.powf(g.eta);
            let mut m = current.clone();
            while m.max_diameter() > target {
                m = uniform_refine(&m);
            }
            m
        } else {
            uniform_refine(&current)
        };
        summary.push(LevelSummary {
            h_param: h,
            max_diameter: next.max_diameter(),
            num_triangles: next.num_triangles(),
            grisvard_pass: check_grisvard(&next, &boundary, &g).pass,
        });
        meshes.push(next.clone());
        current = next;
        h *= 0.5;
    }
    for _ in 0..opts.reference_refinements {
        current = uniform_refine(&current);
        meshes.push(current.clone());
    }
    Ok((meshes, summary))
}

/// H¹/L² errors of each study level against the nested reference.
pub fn convergence_study(opts: &ConvergenceOptions) -> Result<ConvergenceOutcome, StudyError> {
    let (meshes, levels) = convergence_meshes(opts)?;
    let solve = |m: &TriMesh| solve_on_mesh(m, &opts.source, 1.0, &opts.cg);
    let reference = solve(meshes.last().unwrap())?;
    let mut record = ConvergenceRecord::default();
    let mut solutions = Vec::new();
    for (k, summary) in levels.iter().enumerate() {
        let sol = solve(&meshes[k])?;
        let chain: Vec<&TriMesh> = meshes[k..].iter().collect();
        let (err_h1, err_l2) = h1_l2_error(&sol, &reference, &chain)?;
        record.points.push(ConvergencePoint {
            h: summary.max_diameter,
            err_h1,
            err_l2,
        });
        solutions.push(sol);
    }
    let orders = observed_order(&record)?;
    Ok(ConvergenceOutcome {
        record,
        orders,
        reference_triangles: reference.mesh.num_triangles(),
        levels,
        solutions,
        reference,
        meshes,
    })
}

/// Manufactured solution u = sin(πx1) sin(πx2) on the unit square, over
/// `levels` uniform refinements starting from `first` refinements of the
/// two-triangle base mesh. Errors are measured against the exact solution.
pub fn manufactured_square(first: usize, levels: usize, cg: &CgOptions) -> Result<(ConvergenceRecord, ObservedOrders), StudyError> {
    let mut mesh = polygon_base_mesh(&crate::geometry::unit_square())?;
    for _ in 0..first {
        mesh = uniform_refine(&mesh);
    }
    let source = SourceField::SineProduct { amplitude: 1.0 };
    let mut record = ConvergenceRecord::default();
    for k in 0..levels {
        if k > 0 {
            mesh = uniform_refine(&mesh);
        }
        let sol = solve_on_mesh(&mesh, &source, 1.0, cg)?;
        let (err_h1, err_l2) = error_vs_exact(&sol, manufactured_u, manufactured_grad);
        record.points.push(ConvergencePoint {
            h: mesh.max_diameter(),
            err_h1,
            err_l2,
        });
    }
    let orders = observed_order(&record)?;
    Ok((record, orders))
}

pub fn manufactured_u(x: Point2) -> f64 {
    (PI * x.x1).sin() * (PI * x.x2).sin()
}

pub fn manufactured_grad(x: Point2) -> Point2 {
    Point2::new(
        PI * (PI * x.x1).cos() * (PI * x.x2).sin(),
        PI * (PI * x.x1).sin() * (PI * x.x2).cos(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoStep {
    pub from_level: u32,
    pub to_level: u32,
    /// ‖u_from − u_to‖_{L²(Ω_from)}
    pub l2_difference: f64,
    /// Every boundary vertex of Ω_from lies in the closure of Ω_to.
    pub contained: bool,
}

/// Solves on each snowflake level with the same grading parameters and
/// returns ‖u_n − u_{n+1}‖_{L²(Ω_n)} for consecutive entries of `levels`.
pub fn mosco_proxy(
    levels: &[u32],
    grading: &GradingParams,
    source_amplitude: f64,
    cg: &CgOptions,
) -> Result<Vec<MoscoStep>, StudyError> {
    if levels.len() < 3 {
        return Err(StudyError::Invalid(format!("need at least 3 levels, got {}", levels.len())));
    }
    let mut solved: Vec<(u32, crate::geometry::PrefractalBoundary, FemSolution)> = Vec::new();
    for &n in levels {
        if let Some((_, b, s)) = solved.iter().find(|(m, _, _)| *m == n) {
            let entry = (n, b.clone(), s.clone());
            solved.push(entry);
            continue;
        }
        let spec = DomainSpec::snowflake(n);
        let source = SourceField::Gaussian {
            amplitude: source_amplitude,
            width: SourceField::DEFAULT_WIDTH,
            center: spec.center,
        };
        let p = solve_problem(&spec, &source, grading, 1.0, cg)?;
        solved.push((n, p.boundary, p.solution));
    }
    let mut steps = Vec::new();
    for w in solved.windows(2) {
        let (n0, b0, s0) = &w[0];
        let (n1, b1, s1) = &w[1];
        let locator = PolygonLocator::new(b1);
        let contained = b0.vertices.iter().all(|&v| locator.contains(v) || point_in_polygon(v, b1));
        if !contained {
            return Err(StudyError::Invalid(format!("omega_{n0} is not contained in omega_{n1}")));
        }
        let l2_difference = l2_difference_on(s0, s1)?;
        steps.push(MoscoStep {
            from_level: *n0,
            to_level: *n1,
            l2_difference,
            contained,
        });
    }
    Ok(steps)
}

/// Fixed grading used by the difference sequence.
pub fn default_mosco_grading() -> GradingParams {
    GradingParams::new(0.02)
}
