mod common;

use common::square_mesh;
use snowflake_fem::field::{element_gradient, error_vs_exact, l2_difference_on, prolong};
use snowflake_fem::fem::solve_on_mesh;
use snowflake_fem::geometry::{build_snowflake, DomainSpec, Point2};
use snowflake_fem::mesh::{base_lattice_mesh, base_mesh, uniform_refine};
use snowflake_fem::study::{convergence_study, ConvergenceOptions};
use snowflake_fem::{b_field, linf_b, refine_to_size, CgOptions, FemSolution, GradingParams, SourceField, TriMesh};

fn graded(spec: &DomainSpec, h: f64) -> TriMesh {
    let b = spec.boundary().unwrap();
    refine_to_size(&base_mesh(spec, &b).unwrap(), &b, &GradingParams::new(h)).unwrap()
}

#[test]
fn induction_norm_equals_gradient_norm() {
    let spec = DomainSpec::snowflake(2);
    let sol = solve_on_mesh(&graded(&spec, 0.1), &SourceField::gaussian(spec.center), 1.0, &CgOptions::default()).unwrap();
    let b = b_field(&sol);
    for (t, bt) in b.iter().enumerate() {
        let g = element_gradient(&sol, t);
        assert_eq!(bt[0], g.x2);
        assert_eq!(bt[1], -g.x1);
        assert_eq!(bt[0].hypot(bt[1]), g.norm());
    }
    let m = linf_b(&sol);
    assert_eq!(m.value, element_gradient(&sol, m.triangle).norm());
    assert!(b.iter().all(|v| v[0].hypot(v[1]) <= m.value));
}

#[test]
fn prolongation_reproduces_coarse_functions() {
    let spec = DomainSpec::snowflake(2);
    let coarse = graded(&spec, 0.2);
    let mid = uniform_refine(&coarse);
    let b = spec.boundary().unwrap();
    let fine = refine_to_size(&mid, &b, &GradingParams::new(0.05)).unwrap();
    let chain = [&coarse, &mid, &fine];

    // Affine data is reproduced exactly at every fine vertex.
    let f = |p: Point2| 0.3 - 1.7 * p.x1 + 2.9 * p.x2;
    let cu: Vec<f64> = coarse.vertices.iter().map(|&p| f(p)).collect();
    let fu = prolong(&chain, &cu).unwrap();
    for (v, &p) in fine.vertices.iter().enumerate() {
        assert!((fu[v] - f(p)).abs() < 1e-13, "vertex {v}");
    }

    // A coarse discrete solution and its prolongation are the same function.
    let sol = solve_on_mesh(&coarse, &SourceField::gaussian(spec.center), 1.0, &CgOptions::default()).unwrap();
    let up = FemSolution {
        mesh: fine.clone(),
        u: prolong(&chain, &sol.u).unwrap(),
        iterations: 0,
        relative_residual: 0.0,
        mu: 1.0,
    };
    let d = l2_difference_on(&up, &sol).unwrap();
    let norm = snowflake_fem::field::l2_norm(&coarse, &sol.u);
    assert!(d <= 1e-12 * norm, "{d} vs {norm}");
}

#[test]
fn peak_induction_is_rotation_invariant() {
    let g = GradingParams::new(0.08);
    let reference = {
        let b = build_snowflake(2).unwrap();
        let mesh = refine_to_size(&base_lattice_mesh(&b).unwrap(), &b, &g).unwrap();
        linf_b(&solve_on_mesh(&mesh, &SourceField::gaussian(b.center), 1.0, &CgOptions::default()).unwrap())
    };
    for angle in [0.3, 1.0, 2.5, -0.7] {
        let b0 = build_snowflake(2).unwrap();
        let b = b0.rotated(b0.center, angle).translated(Point2::new(0.4, -1.1));
        let mesh = refine_to_size(&base_lattice_mesh(&b).unwrap(), &b, &g).unwrap();
        let sol = solve_on_mesh(&mesh, &SourceField::gaussian(b.center), 1.0, &CgOptions::default()).unwrap();
        let got = linf_b(&sol).value;
        assert!((got - reference.value).abs() <= 1e-9 * reference.value, "angle {angle}: {got} vs {}", reference.value);
    }
}

#[test]
fn disk_with_uniform_current_matches_closed_form() {
    // −Δu = J on the disk of radius R: u = J(R² − r²)/4, max |∇u| = JR/2.
    let r = 0.5;
    let spec = DomainSpec::circle(r, 256);
    let sol = solve_on_mesh(&graded(&spec, 0.05), &SourceField::Constant(1.0), 1.0, &CgOptions::default()).unwrap();
    let peak = linf_b(&sol).value;
    assert!((peak - r / 2.0).abs() < 0.05 * r / 2.0, "{peak}");
    let c = spec.center;
    let (eh1, el2) = error_vs_exact(
        &sol,
        |x| 0.25 * (r * r - (x - c).dot(x - c)),
        |x| (x - c) * -0.5,
    );
    // |u|_{H¹} = (πR⁴/8)^{1/2}
    let semi = (std::f64::consts::PI * r.powi(4) / 8.0).sqrt();
    assert!(eh1 < 0.05 * semi, "{eh1} vs {semi}");
    assert!(el2 < 1e-3, "{el2}");
}

#[test]
fn square_errors_decrease_monotonically() {
    let sine = SourceField::SineProduct { amplitude: 1.0 };
    let u = |p: Point2| (std::f64::consts::PI * p.x1).sin() * (std::f64::consts::PI * p.x2).sin();
    let pi = std::f64::consts::PI;
    let gu = |p: Point2| {
        Point2::new(
            pi * (pi * p.x1).cos() * (pi * p.x2).sin(),
            pi * (pi * p.x1).sin() * (pi * p.x2).cos(),
        )
    };
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for k in 2..6 {
        let sol = solve_on_mesh(&square_mesh(k), &sine, 1.0, &CgOptions::default()).unwrap();
        let e = error_vs_exact(&sol, u, gu);
        assert!(e.0 < prev.0 && e.1 < prev.1, "level {k}: {e:?} after {prev:?}");
        prev = e;
    }
}

#[test]
fn nested_reference_is_adequate() {
    // A two-level reference is within 15% of a three-level one on every rung.
    let mut opts = ConvergenceOptions::new(DomainSpec::snowflake(1), true);
    opts.h0 = 0.2;
    opts.grading = opts.grading.with_h(opts.h0);
    opts.reference_refinements = 3;
    let three = convergence_study(&opts).unwrap();
    opts.reference_refinements = 2;
    let two = convergence_study(&opts).unwrap();
    for (a, b) in three.record.points.iter().zip(&two.record.points) {
        assert!((a.err_h1 - b.err_h1).abs() < 0.15 * b.err_h1, "{} vs {}", a.err_h1, b.err_h1);
    }
    let e: Vec<f64> = two.record.points.iter().map(|p| p.err_h1).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
}
