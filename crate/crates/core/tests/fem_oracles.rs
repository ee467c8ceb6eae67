mod common;

use common::{dense_lu_solve, dense_stiffness, duffy_load, hat_gradients, max_abs, square_mesh};
use proptest::prelude::*;
use snowflake_fem::fem::{assemble, local_load, local_stiffness, solve_on_mesh};
use snowflake_fem::geometry::{DomainSpec, Point2};
use snowflake_fem::mesh::{base_mesh, uniform_refine};
use snowflake_fem::{refine_to_size, CgOptions, GradingParams, SourceField, TriMesh};

fn snowflake_mesh(n: u32, h: f64) -> TriMesh {
    let spec = DomainSpec::snowflake(n);
    let b = spec.boundary().unwrap();
    refine_to_size(&base_mesh(&spec, &b).unwrap(), &b, &GradingParams::new(h)).unwrap()
}

fn gaussian(n: u32) -> SourceField {
    SourceField::gaussian(DomainSpec::snowflake(n).center)
}

proptest! {
    #[test]
    fn local_stiffness_symmetric_with_zero_row_sums(
        ax in -2.0f64..2.0, ay in -2.0f64..2.0,
        bx in -2.0f64..2.0, by in -2.0f64..2.0,
        cx in -2.0f64..2.0, cy in -2.0f64..2.0,
    ) {
        let p = [Point2::new(ax, ay), Point2::new(bx, by), Point2::new(cx, cy)];
        let twice_area = (p[1] - p[0]).cross(p[2] - p[0]);
        // Mesh triangles are counter-clockwise.
        prop_assume!(twice_area > 1e-2);
        let k = local_stiffness(&p).unwrap();
        let (g, area) = hat_gradients(&p);
        let scale = k.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..3 {
            prop_assert!(k[i].iter().sum::<f64>().abs() <= 1e-13 * scale);
            for j in 0..3 {
                prop_assert_eq!(k[i][j], k[j][i]);
                let oracle = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                prop_assert!((k[i][j] - oracle).abs() <= 1e-13 * scale, "{} vs {}", k[i][j], oracle);
            }
        }
    }
}

fn assert_matches_dense(mesh: &TriMesh, mu: f64) {
    let sys = assemble(mesh, &SourceField::Constant(1.0), mu).unwrap();
    let dense = dense_stiffness(mesh, mu);
    let scale = dense.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for (i, &vi) in sys.interior.iter().enumerate() {
        for (j, &vj) in sys.interior.iter().enumerate() {
            let got = sys.matrix.get(i, j);
            assert!((got - dense[vi][vj]).abs() <= 1e-14 * scale, "({i},{j}) {got} vs {}", dense[vi][vj]);
        }
    }
}

#[test]
fn nine_vertex_square_matches_dense_assembly() {
    let mesh = square_mesh(1);
    assert_eq!(mesh.num_vertices(), 9);
    assert_matches_dense(&mesh, 1.0);
    // Only the center is free: K_cc = 4 on this criss-cross pattern.
    let sys = assemble(&mesh, &SourceField::Constant(1.0), 1.0).unwrap();
    assert_eq!(sys.interior.len(), 1);
    assert!((sys.matrix.get(0, 0) - 4.0).abs() < 1e-14);
}

#[test]
fn graded_snowflake_matches_dense_assembly() {
    assert_matches_dense(&snowflake_mesh(2, 0.15), 1.0);
    assert_matches_dense(&snowflake_mesh(1, 0.1), 2.5);
}

#[test]
fn gaussian_load_matches_high_order_oracle() {
    let mesh = snowflake_mesh(2, 0.1);
    let source = gaussian(2);
    let mut oracle = vec![0.0; mesh.num_vertices()];
    let mut ours = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.corners(t);
        let d = duffy_load(&p, &source, 24);
        let l = local_load(&p, &source);
        for i in 0..3 {
            oracle[tri[i]] += d[i];
            ours[tri[i]] += l[i];
        }
    }
    let diff: Vec<f64> = ours.iter().zip(&oracle).map(|(a, b)| a - b).collect();
    assert!(max_abs(&diff) <= 1e-8 * max_abs(&oracle), "{}", max_abs(&diff) / max_abs(&oracle));
}

#[test]
fn cg_matches_dense_lu() {
    let mesh = snowflake_mesh(1, 0.1);
    let source = gaussian(1);
    let sys = assemble(&mesh, &source, 1.0).unwrap();
    let n = sys.interior.len();
    assert!(n > 100, "{n}");
    let dense: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| sys.matrix.get(i, j)).collect()).collect();
    let exact = dense_lu_solve(dense, sys.rhs.clone());
    let sol = solve_on_mesh(&mesh, &source, 1.0, &CgOptions::default()).unwrap();
    let cg: Vec<f64> = sys.interior.iter().map(|&v| sol.u[v]).collect();
    let diff: Vec<f64> = cg.iter().zip(&exact).map(|(a, b)| a - b).collect();
    assert!(max_abs(&diff) <= 1e-9 * max_abs(&exact), "{}", max_abs(&diff) / max_abs(&exact));
}

#[test]
fn discrete_maximum_principle() {
    for (n, h) in [(1, 0.1), (2, 0.08), (3, 0.06)] {
        let sol = solve_on_mesh(&snowflake_mesh(n, h), &gaussian(n), 1.0, &CgOptions::default()).unwrap();
        let min = sol.u.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12, "level {n}: min u = {min}");
    }
}

#[test]
fn linear_in_current_density_and_permeability() {
    let mesh = snowflake_mesh(2, 0.1);
    let cg = CgOptions::default();
    let base = solve_on_mesh(&mesh, &gaussian(2), 1.0, &cg).unwrap();
    let doubled_j = solve_on_mesh(&mesh, &gaussian(2).scaled(2.0), 1.0, &cg).unwrap();
    let doubled_mu = solve_on_mesh(&mesh, &gaussian(2), 2.0, &cg).unwrap();
    for v in 0..mesh.num_vertices() {
        assert_eq!(doubled_j.u[v], 2.0 * base.u[v], "J, vertex {v}");
        assert_eq!(doubled_mu.u[v], 2.0 * base.u[v], "mu, vertex {v}");
    }
}

#[test]
fn energy_grows_along_nested_spaces() {
    let mut mesh = snowflake_mesh(2, 0.2);
    let cg = CgOptions { tol: 1e-12, max_iter: None };
    let mut prev = 0.0;
    for _ in 0..4 {
        let e = solve_on_mesh(&mesh, &gaussian(2), 1.0, &cg).unwrap().energy();
        assert!(e > prev, "{e} <= {prev}");
        prev = e;
        mesh = uniform_refine(&mesh);
    }
}

#[test]
fn reruns_are_bitwise_identical_and_thread_count_independent() {
    let mesh = snowflake_mesh(3, 0.04);
    let source = gaussian(3);
    let cg = CgOptions::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve_on_mesh(&mesh, &source, 1.0, &cg).unwrap().u)
    };
    let one = run(1);
    assert_eq!(one, run(1));
    let four = run(4);
    assert_eq!(four, run(4));
    let scale = max_abs(&one);
    for (a, b) in one.iter().zip(&four) {
        assert!((a - b).abs() <= 1e-13 * scale);
    }
}

#[test]
fn fixtures_solve() {
    let sq = solve_on_mesh(&square_mesh(4), &SourceField::Constant(1.0), 1.0, &CgOptions::default()).unwrap();
    // -Δu = 1 on the unit square: u(1/2, 1/2) ≈ 0.0736713.
    let center = sq.mesh.vertices.iter().position(|p| p.dist(Point2::new(0.5, 0.5)) < 1e-12).unwrap();
    assert!((sq.u[center] - 0.073_671_3).abs() < 2e-3, "{}", sq.u[center]);
}
