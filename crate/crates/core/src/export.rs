//! CSV and legacy ASCII VTK writers. Floats are written with 17 significant
//! digits in `{:e}` notation, which is locale independent.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::fem::FemSolution;
use crate::field::{ConvergenceRecord, FieldReport};
use crate::geometry::PrefractalBoundary;
use crate::mesh::TriMesh;

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `path` through a temporary sibling file and a rename, so a failed
/// write never leaves a partial file behind.
pub fn write_atomic<F>(path: &Path, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        let file = w.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// `index,x1,x2,reentrant`
pub fn write_boundary_csv(w: &mut dyn Write, b: &PrefractalBoundary) -> io::Result<()> {
    writeln!(w, "index,x1,x2,reentrant")?;
    for (i, p) in b.vertices.iter().enumerate() {
        let flag = u8::from(b.reentrant.contains(&i));
        writeln!(w, "{i},{},{},{flag}", fmt_f64(p.x1), fmt_f64(p.x2))?;
    }
    Ok(())
}

/// `index,x1,x2,boundary`
pub fn write_vertices_csv(w: &mut dyn Write, mesh: &TriMesh) -> io::Result<()> {
    writeln!(w, "index,x1,x2,boundary")?;
    for (i, p) in mesh.vertices.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", fmt_f64(p.x1), fmt_f64(p.x2), u8::from(mesh.boundary_vertex[i]))?;
    }
    Ok(())
}

/// `v0,v1,v2,parent`; parent is -1 for base-mesh triangles.
pub fn write_triangles_csv(w: &mut dyn Write, mesh: &TriMesh) -> io::Result<()> {
    writeln!(w, "v0,v1,v2,parent")?;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let parent = mesh.parent_triangle[t].map_or(-1, |p| p as i64);
        writeln!(w, "{},{},{},{parent}", tri[0], tri[1], tri[2])?;
    }
    Ok(())
}

/// Legacy ASCII VTK unstructured grid of triangles, optionally with point
/// data `u` and cell data `B` (plus its magnitude `B_magnitude`).
pub fn write_vtk(w: &mut dyn Write, mesh: &TriMesh, u: Option<&[f64]>, b: Option<&[[f64; 2]]>) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "snowflake-fem")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for p in &mesh.vertices {
        writeln!(w, "{} {} 0", fmt_f64(p.x1), fmt_f64(p.x2))?;
    }
    let nt = mesh.num_triangles();
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    if let Some(u) = u {
        writeln!(w, "POINT_DATA {}", mesh.num_vertices())?;
        writeln!(w, "SCALARS u double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for x in u {
            writeln!(w, "{}", fmt_f64(*x))?;
        }
    }
    if let Some(b) = b {
        writeln!(w, "CELL_DATA {nt}")?;
        writeln!(w, "VECTORS B double")?;
        for v in b {
            writeln!(w, "{} {} 0", fmt_f64(v[0]), fmt_f64(v[1]))?;
        }
        writeln!(w, "SCALARS B_magnitude double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in b {
            writeln!(w, "{}", fmt_f64(v[0].hypot(v[1])))?;
        }
    }
    Ok(())
}

/// `vertex,u`
pub fn write_solution_csv(w: &mut dyn Write, sol: &FemSolution) -> io::Result<()> {
    writeln!(w, "vertex,u")?;
    for (i, x) in sol.u.iter().enumerate() {
        writeln!(w, "{i},{}", fmt_f64(*x))?;
    }
    Ok(())
}

pub const REPORT_HEADER: &str = "domain,n,h,num_vertices,num_triangles,linf_B,ell_n,l2_u,h1_semi_u,cg_iters";

/// One row per run; `linf_B` is the scaled value.
pub fn write_report_csv(w: &mut dyn Write, rows: &[FieldReport]) -> io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.domain,
            r.level,
            fmt_f64(r.h),
            r.num_vertices,
            r.num_triangles,
            fmt_f64(r.linf_b_scaled),
            fmt_f64(r.boundary_length),
            fmt_f64(r.l2_u),
            fmt_f64(r.h1_semi_u),
            r.cg_iterations
        )?;
    }
    Ok(())
}

/// `level,h,err_h1,err_l2`
pub fn write_convergence_csv(w: &mut dyn Write, rec: &ConvergenceRecord) -> io::Result<()> {
    writeln!(w, "level,h,err_h1,err_l2")?;
    for (k, p) in rec.points.iter().enumerate() {
        writeln!(w, "{k},{},{},{}", fmt_f64(p.h), fmt_f64(p.err_h1), fmt_f64(p.err_l2))?;
    }
    Ok(())
}
