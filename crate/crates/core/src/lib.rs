//! Finite elements for the 2D magnetostatic problem −Δu = J on pre-fractal
//! Koch snowflake domains, with meshes graded toward the reentrant corners.
//!
//! The pipeline is [`geometry`] → [`mesh`] → [`fem`] → [`field`]; [`study`]
//! strings the stages together into the reproducible experiments and
//! [`export`] writes CSV and legacy VTK files.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod export;
pub mod fem;
pub mod field;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod study;

pub use fem::{cg_solve, solve_problem, CgOptions, FemError, FemSolution, SourceField, SparseSystem};
pub use field::{b_field, linf_b, observed_order, ConvergenceRecord, FieldError, B_SCALE_MILLITESLA};
pub use geometry::{build_snowflake, DomainShape, DomainSpec, GeometryError, Point2, PrefractalBoundary};
pub use mesh::{check_grisvard, refine_to_size, uniform_refine, GradingParams, MeshError, TriMesh};
