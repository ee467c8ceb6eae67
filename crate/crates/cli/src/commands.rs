use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use snowflake_fem::export::{
    fmt_f64, write_atomic, write_boundary_csv, write_convergence_csv, write_report_csv, write_solution_csv,
    write_triangles_csv, write_vertices_csv, write_vtk,
};
use snowflake_fem::field::{field_report, B_SCALE_MILLITESLA};
use snowflake_fem::geometry::boundary_length;
use snowflake_fem::mesh::base_mesh;
use snowflake_fem::study::{
    convergence_study, domain_boundary_length, mosco_proxy, run_table1, ConvergenceOptions, StudyError,
    Table1Options,
};
use snowflake_fem::{check_grisvard, refine_to_size, solve_problem, FemError, GeometryError, MeshError};

use crate::config::{DomainKind, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Mesh(#[from] MeshError),
    #[error("{0}")]
    Solve(FemError),
    #[error("{0}")]
    Study(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        match e {
            FemError::Geometry(g) => CliError::Geometry(g),
            FemError::Mesh(m) => CliError::Mesh(m),
            other => CliError::Solve(other),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Geometry(g) => CliError::Geometry(g),
            StudyError::Mesh(m) => CliError::Mesh(m),
            StudyError::Fem(f) => f.into(),
            other => CliError::Study(other.to_string()),
        }
    }
}

impl CliError {
    pub fn stage(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Geometry(_) => "geometry",
            CliError::Mesh(_) => "mesh",
            CliError::Solve(_) => "solve",
            CliError::Study(_) => "study",
            CliError::Io { .. } => "output",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn write_file<F>(dir: &Path, name: &str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let path = dir.join(name);
    write_atomic(&path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn geometry(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.domain_spec();
    let b = spec.boundary()?;
    if cfg.csv {
        write_file(&cfg.out, "boundary.csv", |w| write_boundary_csv(w, &b))?;
    }
    let ell = match cfg.domain {
        DomainKind::Circle => boundary_length(&b),
        _ => domain_boundary_length(&spec),
    };
    println!("domain      {}", spec.label());
    println!("vertices    {}", b.vertices.len());
    println!("ell         {ell}");
    println!("reentrant   {}", b.reentrant.len());
    Ok(())
}

pub fn mesh(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.domain_spec();
    let grading = cfg.grading();
    let b = spec.boundary()?;
    let base = base_mesh(&spec, &b)?;
    let mesh = refine_to_size(&base, &b, &grading)?;
    mesh.validate()?;
    let report = check_grisvard(&mesh, &b, &grading);
    if cfg.csv {
        write_file(&cfg.out, "boundary.csv", |w| write_boundary_csv(w, &b))?;
        write_file(&cfg.out, "vertices.csv", |w| write_vertices_csv(w, &mesh))?;
        write_file(&cfg.out, "triangles.csv", |w| write_triangles_csv(w, &mesh))?;
    }
    if cfg.vtk {
        write_file(&cfg.out, "mesh.vtk", |w| write_vtk(w, &mesh, None, None))?;
    }
    println!("domain      {}", spec.label());
    println!("h           {}", grading.h);
    println!("vertices    {}", mesh.num_vertices());
    println!("triangles   {}", mesh.num_triangles());
    println!("angles      {:.4} .. {:.4} deg", report.min_angle_deg, report.max_angle_deg);
    println!("diameter    {:.4e} .. {:.4e}", report.min_diameter, report.max_diameter);
    println!("grisvard    {} (max h_T/tau = {:.4})", if report.pass { "pass" } else { "FAIL" }, report.max_ratio);
    Ok(())
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.domain_spec();
    let grading = cfg.grading();
    let start = Instant::now();
    let problem = solve_problem(&spec, &cfg.source(&spec), &grading, cfg.mu, &cfg.cg())?;
    let report = field_report(&spec, &problem, grading.h, B_SCALE_MILLITESLA);
    let sol = &problem.solution;
    if cfg.csv {
        write_file(&cfg.out, "vertices.csv", |w| write_vertices_csv(w, &sol.mesh))?;
        write_file(&cfg.out, "triangles.csv", |w| write_triangles_csv(w, &sol.mesh))?;
        write_file(&cfg.out, "solution.csv", |w| write_solution_csv(w, sol))?;
        write_file(&cfg.out, "report.csv", |w| write_report_csv(w, std::slice::from_ref(&report)))?;
    }
    if cfg.vtk {
        write_file(&cfg.out, "mesh.vtk", |w| write_vtk(w, &sol.mesh, Some(&sol.u), Some(&report.b)))?;
    }
    println!("domain      {}", report.domain);
    println!("h           {}", report.h);
    println!("vertices    {}", report.num_vertices);
    println!("triangles   {}", report.num_triangles);
    println!("cg          {} iterations, residual {:.3e}", report.cg_iterations, report.relative_residual);
    println!("linf_B      {:.6} mT (triangle {})", report.linf_b_scaled, report.linf_b.triangle);
    println!("l2_u        {:.6e}", report.l2_u);
    println!("h1_semi_u   {:.6e}", report.h1_semi_u);
    println!("elapsed     {:.2?}", start.elapsed());
    Ok(())
}

pub fn table1(cfg: &RunConfig) -> Result<(), CliError> {
    let opts = Table1Options {
        max_n: cfg.max_n,
        circle_segments: cfg.segments,
        grading: cfg.grading(),
        h_override: cfg.h,
        source_amplitude: cfg.amplitude,
        source_width: cfg.width,
        mu: cfg.mu,
        cg: cfg.cg(),
        b_scale: B_SCALE_MILLITESLA,
    };
    let rows = run_table1(&opts)?;
    println!("{:<8} {:>12} {:>20} {:>12} {:>10}", "domain", "linf_B [mT]", "ell", "reference", "deviation");
    for r in &rows {
        let reference = r.reference.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let dev = r.deviation.map_or_else(|| "-".to_string(), |d| format!("{:+.2}%", 100.0 * d));
        println!(
            "{:<8} {:>12.3} {:>20} {:>12} {:>10}",
            r.report.domain, r.report.linf_b_scaled, r.ell, reference, dev
        );
    }
    if cfg.csv {
        let reports: Vec<_> = rows.iter().map(|r| r.report.clone()).collect();
        write_file(&cfg.out, "report.csv", |w| write_report_csv(w, &reports))?;
        write_file(&cfg.out, "table1.csv", |w| {
            writeln!(w, "domain,linf_B,ell,reference,deviation")?;
            for r in &rows {
                let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.report.domain,
                    fmt_f64(r.report.linf_b_scaled),
                    fmt_f64(r.ell),
                    opt(r.reference),
                    opt(r.deviation)
                )?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub fn convergence(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.domain_spec();
    let mut opts = ConvergenceOptions::new(spec, cfg.conv_graded);
    opts.levels = cfg.conv_levels;
    if let Some(h0) = cfg.conv_h0 {
        opts.h0 = h0;
    }
    opts.grading = cfg.grading().with_h(opts.h0);
    opts.reference_refinements = cfg.conv_reference_refinements;
    opts.source = cfg.source(&spec);
    opts.cg = cfg.cg();
    let out = convergence_study(&opts)?;
    println!(
        "{} {} ladder, reference {} triangles",
        spec.label(),
        if opts.graded { "graded" } else { "uniform" },
        out.reference_triangles
    );
    println!("{:>5} {:>12} {:>10} {:>14} {:>14} {:>8}", "level", "h", "triangles", "err_h1", "err_l2", "grisvard");
    for (k, (p, l)) in out.record.points.iter().zip(&out.levels).enumerate() {
        println!(
            "{k:>5} {:>12.4e} {:>10} {:>14.6e} {:>14.6e} {:>8}",
            p.h,
            l.num_triangles,
            p.err_h1,
            p.err_l2,
            if l.grisvard_pass { "pass" } else { "-" }
        );
    }
    println!("order h1 {:.4}", out.orders.h1);
    println!("order l2 {:.4}", out.orders.l2);
    if cfg.csv {
        write_file(&cfg.out, "convergence.csv", |w| write_convergence_csv(w, &out.record))?;
    }
    Ok(())
}

pub fn mosco(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.max_n < 3 {
        return Err(CliError::Config(format!("mosco needs max_n >= 3, got {}", cfg.max_n)));
    }
    let levels: Vec<u32> = (1..=cfg.max_n + 1).collect();
    let grading = cfg.grading().with_h(cfg.mosco_h);
    let steps = mosco_proxy(&levels, &grading, cfg.amplitude, &cfg.cg())?;
    println!("{:>4} {:>4} {:>16}", "n", "n+1", "l2_difference");
    for s in &steps {
        println!("{:>4} {:>4} {:>16.6e}", s.from_level, s.to_level, s.l2_difference);
    }
    let decreasing = steps.windows(2).all(|w| w[1].l2_difference < w[0].l2_difference);
    println!("strictly decreasing: {decreasing}");
    if cfg.csv {
        write_file(&cfg.out, "mosco.csv", |w| {
            writeln!(w, "from_level,to_level,l2_difference,contained")?;
            for s in &steps {
                writeln!(w, "{},{},{},{}", s.from_level, s.to_level, fmt_f64(s.l2_difference), u8::from(s.contained))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
