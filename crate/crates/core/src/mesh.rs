//! Conforming triangulations of the domains, graded toward reentrant corners
//! by newest-vertex bisection.
//!
//! Triangles are stored counterclockwise as `[v0, v1, v2]`. Local edge `i` is
//! the edge opposite vertex `i`; `refinement_edge[t]` names the local edge that
//! the next bisection of `t` splits. A bisection puts the new vertex at the
//! midpoint of that edge and gives both children the edge opposite the new
//! vertex as their refinement edge.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    circle_vertex, polygon_area, CornerIndex, DomainShape, DomainSpec, GeometryError, Point2, PolygonLocator,
    PrefractalBoundary,
};

/// Sweeps allowed in [`refine_to_size`] before giving up.
pub const MAX_REFINEMENT_SWEEPS: usize = 60;

/// Smallest triangle area accepted as non-degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-16;

/// Minimum-angle bound (degrees) every produced mesh must satisfy.
pub const MIN_ANGLE_DEG: f64 = 20.0;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("lattice tiling area {tiled} does not match polygon area {polygon}")]
    TilingMismatch { tiled: f64, polygon: f64 },
    #[error("base lattice mesh requires a snowflake boundary")]
    NotASnowflake,
    #[error("ear clipping failed with {remaining} vertices left")]
    EarClipping { remaining: usize },
    #[error("triangle {0} is degenerate or clockwise (area {1:e})")]
    Degenerate(usize, f64),
    #[error("edge ({0}, {1}) is shared by {2} triangles")]
    NonConforming(usize, usize, usize),
    #[error("minimum angle {0:.3} deg is below the {MIN_ANGLE_DEG} deg bound")]
    PoorQuality(f64),
    #[error("refinement did not reach the size field within {0} sweeps")]
    SweepLimit(usize),
    #[error("invalid grading parameters: {0}")]
    InvalidGrading(String),
}

/// A conforming triangulation with bisection bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
    /// Index of the containing triangle in the mesh this one was refined from.
    pub parent_triangle: Vec<Option<usize>>,
    pub refinement_edge: Vec<u8>,
}

type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Vertices of local edge `e` (the edge opposite vertex `e`).
fn local_edge(t: &[usize; 3], e: usize) -> (usize, usize) {
    (t[(e + 1) % 3], t[(e + 2) % 3])
}

impl TriMesh {
    /// Builds a mesh from raw connectivity, deriving boundary flags and the
    /// initial refinement edges (longest edge, ties to the lowest opposite
    /// vertex index).
    pub fn from_triangles(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let refinement_edge = triangles
            .iter()
            .map(|t| initial_refinement_edge(&vertices, t))
            .collect();
        let n_tri = triangles.len();
        let mut mesh = TriMesh {
            boundary_vertex: vec![false; vertices.len()],
            vertices,
            triangles,
            parent_triangle: vec![None; n_tri],
            refinement_edge,
        };
        for (i, _) in mesh.triangles.iter().enumerate() {
            let a = mesh.triangle_area(i);
            if !(a > MIN_TRIANGLE_AREA) {
                return Err(MeshError::Degenerate(i, a));
            }
        }
        mesh.boundary_vertex = mesh.topological_boundary()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area; positive for counterclockwise triangles.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(c - a)
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.corners(t);
        Point2::new((a.x1 + b.x1 + c.x1) / 3.0, (a.x2 + b.x2 + c.x2) / 3.0)
    }

    /// Longest edge length.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Interior angles in radians.
    pub fn angles(&self, t: usize) -> [f64; 3] {
        let p = self.corners(t);
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let u = p[(i + 1) % 3] - p[i];
            let v = p[(i + 2) % 3] - p[i];
            *o = u.cross(v).abs().atan2(u.dot(v));
        }
        out
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.num_triangles())
            .flat_map(|t| self.angles(t))
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    pub fn max_angle_deg(&self) -> f64 {
        (0..self.num_triangles())
            .flat_map(|t| self.angles(t))
            .fold(0.0, f64::max)
            .to_degrees()
    }

    /// Edge → incident triangles.
    pub fn edge_map(&self) -> HashMap<EdgeKey, Vec<usize>> {
        let mut map: HashMap<EdgeKey, Vec<usize>> = HashMap::with_capacity(self.triangles.len() * 2);
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = local_edge(tri, e);
                map.entry(edge_key(a, b)).or_default().push(t);
            }
        }
        map
    }

    fn topological_boundary(&self) -> Result<Vec<bool>, MeshError> {
        let mut flags = vec![false; self.vertices.len()];
        let mut edges: Vec<_> = self.edge_map().into_iter().collect();
        edges.sort_unstable_by_key(|(k, _)| *k);
        for ((a, b), ts) in edges {
            match ts.len() {
                1 => {
                    flags[a] = true;
                    flags[b] = true;
                }
                2 => {}
                k => return Err(MeshError::NonConforming(a, b, k)),
            }
        }
        Ok(flags)
    }

    /// Checks orientation, conformity and boundary flags.
    pub fn validate(&self) -> Result<(), MeshError> {
        for t in 0..self.num_triangles() {
            let a = self.triangle_area(t);
            if !(a > MIN_TRIANGLE_AREA) {
                return Err(MeshError::Degenerate(t, a));
            }
        }
        // every edge must also be traversed once in each direction when interior
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                *directed.entry(local_edge(tri, e)).or_default() += 1;
            }
        }
        for (&(a, b), &k) in &directed {
            if k != 1 {
                return Err(MeshError::NonConforming(a, b, k));
            }
        }
        let flags = self.topological_boundary()?;
        if let Some(v) = (0..flags.len()).find(|&v| flags[v] != self.boundary_vertex[v]) {
            return Err(MeshError::NonConforming(v, v, 0));
        }
        Ok(())
    }

    /// Indices of the interior (unknown) vertices, in vertex order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary_vertex[v]).collect()
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: Point2) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        let det = (b - a).cross(c - a);
        let l1 = (x - a).cross(c - a) / det;
        let l2 = (b - a).cross(x - a) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}

fn initial_refinement_edge(vertices: &[Point2], t: &[usize; 3]) -> u8 {
    let len = |e: usize| {
        let (a, b) = local_edge(t, e);
        vertices[a].dist(vertices[b])
    };
    let longest = (0..3).map(len).fold(0.0, f64::max);
    (0..3)
        .filter(|&e| len(e) >= longest * (1.0 - 1e-12))
        .min_by_key(|&e| t[e])
        .unwrap_or(0) as u8
}

/// Grisvard size-field parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingParams {
    /// Global mesh size.
    pub h: f64,
    /// Weight exponent, in (1/4, 1).
    pub eta: f64,
    /// Grading constant, at least 1.
    pub sigma: f64,
    /// Radius of the graded neighbourhood.
    pub cutoff: f64,
}

impl GradingParams {
    pub const DEFAULT_ETA: f64 = 0.30;
    pub const DEFAULT_SIGMA: f64 = 1.0;
    pub const DEFAULT_CUTOFF: f64 = 0.5;

    pub fn new(h: f64) -> Self {
        Self {
            h,
            eta: Self::DEFAULT_ETA,
            sigma: Self::DEFAULT_SIGMA,
            cutoff: Self::DEFAULT_CUTOFF,
        }
    }

    /// The pinned default for level `n`: h = 3^{-n/2}/4, with the default
    /// η, σ and R. Level 0 (the circle) gets h = 1/4.
    pub fn pinned(level: u32) -> Self {
        Self::new(pinned_h(level))
    }

    pub fn with_h(self, h: f64) -> Self {
        Self { h, ..self }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let bad = |m: String| Err(MeshError::InvalidGrading(m));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h = {} must be positive", self.h));
        }
        if !(self.eta > 0.25 && self.eta < 1.0) {
            return bad(format!("eta = {} must lie in (1/4, 1)", self.eta));
        }
        if !(self.sigma >= 1.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} must be >= 1", self.sigma));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return bad(format!("cutoff R = {} must be positive", self.cutoff));
        }
        Ok(())
    }

    /// Radius below which the size field is constant, h^{1/(1-η)}.
    pub fn core_radius(&self) -> f64 {
        self.h.powf(1.0 / (1.0 - self.eta))
    }

    /// Target diameter at distance `r` from the nearest reentrant corner.
    pub fn size_at_distance(&self, r: f64) -> f64 {
        let r0 = self.core_radius();
        if r <= r0 {
            self.sigma * r0
        } else if r <= self.cutoff {
            self.sigma * self.h * r.powf(self.eta)
        } else {
            self.sigma * self.h * self.cutoff.powf(self.eta)
        }
    }
}

/// Global mesh size of the pinned discretization for snowflake level `n`.
pub fn pinned_h(level: u32) -> f64 {
    3f64.powf(-0.5 * level as f64) / 4.0
}

/// Target triangle diameter τ(x) of the graded mesh.
pub fn grisvard_target_size(x: Point2, b: &PrefractalBoundary, g: &GradingParams) -> f64 {
    g.size_at_distance(crate::geometry::distance_to_reentrant(x, b))
}

/// Equilateral lattice mesh of pitch 3^{-n} exactly tiling the level-n snowflake.
///
/// The lattice is spanned by the first boundary segment and its 60° rotation,
/// so rigidly moved snowflakes get the rigidly moved mesh.
pub fn base_lattice_mesh(b: &PrefractalBoundary) -> Result<TriMesh, MeshError> {
    let n = b.len();
    if n != 3 * 4usize.pow(b.level) {
        return Err(MeshError::NotASnowflake);
    }
    let origin = b.vertices[0];
    let e1 = b.vertices[1] - origin;
    let (s60, c60) = (3f64.sqrt() / 2.0, 0.5);
    let e2 = Point2::new(c60 * e1.x1 - s60 * e1.x2, s60 * e1.x1 + c60 * e1.x2);
    let det = e1.cross(e2);
    let to_lattice = |x: Point2| {
        let d = x - origin;
        (d.cross(e2) / det, e1.cross(d) / det)
    };
    let (mut imin, mut imax, mut jmin, mut jmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &v in &b.vertices {
        let (i, j) = to_lattice(v);
        imin = imin.min(i);
        imax = imax.max(i);
        jmin = jmin.min(j);
        jmax = jmax.max(j);
    }
    let lattice = |i: i64, j: i64| origin + e1 * i as f64 + e2 * j as f64;
    let locator = PolygonLocator::new(b);
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for j in (jmin.floor() as i64 - 1)..=(jmax.ceil() as i64 + 1) {
        for i in (imin.floor() as i64 - 1)..=(imax.ceil() as i64 + 1) {
            let up = [(i, j), (i + 1, j), (i, j + 1)];
            let down = [(i + 1, j), (i + 1, j + 1), (i, j + 1)];
            for tri in [up, down] {
                let p = tri.map(|(a, c)| lattice(a, c));
                let centroid = Point2::new((p[0].x1 + p[1].x1 + p[2].x1) / 3.0, (p[0].x2 + p[1].x2 + p[2].x2) / 3.0);
                if locator.contains(centroid) {
                    let ids = tri.map(|key| {
                        *index.entry(key).or_insert_with(|| {
                            vertices.push(lattice(key.0, key.1));
                            vertices.len() - 1
                        })
                    });
                    triangles.push(ids);
                }
            }
        }
    }
    let mesh = TriMesh::from_triangles(vertices, triangles)?;
    let tiled = mesh.total_area();
    let polygon = polygon_area(b);
    if (tiled - polygon).abs() > 1e-10 * polygon {
        return Err(MeshError::TilingMismatch { tiled, polygon });
    }
    Ok(mesh)
}

/// Ear-clipping triangulation of a simple CCW polygon. At each step the ear
/// with the largest minimum angle is removed.
pub fn ear_clip(vertices: &[Point2]) -> Result<Vec<[usize; 3]>, MeshError> {
    let mut ring: Vec<usize> = (0..vertices.len()).collect();
    let mut out = Vec::with_capacity(vertices.len().saturating_sub(2));
    let min_angle = |a: Point2, b: Point2, c: Point2| {
        let p = [a, b, c];
        (0..3)
            .map(|i| {
                let u = p[(i + 1) % 3] - p[i];
                let v = p[(i + 2) % 3] - p[i];
                u.cross(v).abs().atan2(u.dot(v))
            })
            .fold(f64::INFINITY, f64::min)
    };
    while ring.len() > 3 {
        let m = ring.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let (ia, ib, ic) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            let (a, b, c) = (vertices[ia], vertices[ib], vertices[ic]);
            if (b - a).cross(c - a) <= 0.0 {
                continue;
            }
            let blocked = ring.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let x = vertices[j];
                (b - a).cross(x - a) >= 0.0 && (c - b).cross(x - b) >= 0.0 && (a - c).cross(x - c) >= 0.0
            });
            if blocked {
                continue;
            }
            let q = min_angle(a, b, c);
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        let Some((k, _)) = best else {
            return Err(MeshError::EarClipping { remaining: m });
        };
        out.push([ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]]);
        ring.remove(k);
    }
    out.push([ring[0], ring[1], ring[2]]);
    Ok(out)
}

/// Ear-clipping base mesh for small fixture polygons.
pub fn polygon_base_mesh(b: &PrefractalBoundary) -> Result<TriMesh, MeshError> {
    crate::geometry::check_simple(&b.vertices)?;
    let tris = ear_clip(&b.vertices)?;
    let mesh = TriMesh::from_triangles(b.vertices.clone(), tris)?;
    let min_angle = mesh.min_angle_deg();
    if min_angle < MIN_ANGLE_DEG {
        return Err(MeshError::PoorQuality(min_angle));
    }
    Ok(mesh)
}

/// Ring mesh of the inscribed regular polygon: concentric rings with spacing
/// close to the boundary segment length, zipped together by angle. The outer
/// ring coincides with [`crate::geometry::circle_polygon`].
pub fn disk_base_mesh(radius: f64, segments: usize, center: Point2) -> Result<TriMesh, MeshError> {
    if !(radius > 0.0) || segments < 8 {
        return Err(GeometryError::InvalidCircle { radius, segments }.into());
    }
    let rings = ((segments as f64 / (2.0 * PI)).round() as usize).max(1);
    let mut vertices = vec![center];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    let mut phase = vec![0.0f64];
    for j in 1..=rings {
        let count = if j == rings {
            segments
        } else {
            ((segments * j) as f64 / rings as f64).round().max(6.0) as usize
        };
        let rho = radius * j as f64 / rings as f64;
        let ph = if j == rings || j % 2 == 0 { 0.0 } else { 0.5 };
        ring_start.push(vertices.len());
        ring_len.push(count);
        phase.push(ph);
        for k in 0..count {
            if j == rings {
                vertices.push(circle_vertex(radius, segments, center, k));
            } else {
                let theta = 2.0 * PI * (k as f64 + ph) / count as f64;
                vertices.push(center + Point2::new(rho * theta.cos(), rho * theta.sin()));
            }
        }
    }
    let mut triangles = Vec::new();
    for k in 0..ring_len[1] {
        let s = ring_start[1];
        triangles.push([0, s + k, s + (k + 1) % ring_len[1]]);
    }
    for j in 2..=rings {
        let (sa, na, pa) = (ring_start[j - 1], ring_len[j - 1], phase[j - 1]);
        let (sb, nb, pb) = (ring_start[j], ring_len[j], phase[j]);
        let angle_a = |k: usize| (k as f64 + pa) / na as f64;
        let angle_b = |k: usize| (k as f64 + pb) / nb as f64;
        let (mut ia, mut ib) = (0usize, 0usize);
        while ia < na || ib < nb {
            let a0 = sa + ia % na;
            let b0 = sb + ib % nb;
            let advance_inner = ib == nb || (ia < na && angle_a(ia + 1) < angle_b(ib + 1));
            if advance_inner {
                triangles.push([a0, b0, sa + (ia + 1) % na]);
                ia += 1;
            } else {
                triangles.push([a0, b0, sb + (ib + 1) % nb]);
                ib += 1;
            }
        }
    }
    let mesh = TriMesh::from_triangles(vertices, triangles)?;
    let min_angle = mesh.min_angle_deg();
    if min_angle < MIN_ANGLE_DEG {
        return Err(MeshError::PoorQuality(min_angle));
    }
    Ok(mesh)
}

/// Base mesh for a domain: lattice for snowflakes, rings for the circle,
/// ear clipping for the square.
pub fn base_mesh(spec: &DomainSpec, b: &PrefractalBoundary) -> Result<TriMesh, MeshError> {
    match spec.shape {
        DomainShape::Snowflake { .. } => base_lattice_mesh(b),
        DomainShape::CirclePolygon { radius, segments } => disk_base_mesh(radius, segments, spec.center),
        DomainShape::UnitSquare => polygon_base_mesh(b),
    }
}

/// Bisects every marked edge, closing the marking so the result conforms.
/// `parent_triangle` of the output indexes `mesh`.
fn bisect_marked(mesh: &TriMesh, mut marked: Vec<EdgeKey>) -> TriMesh {
    let edges = mesh.edge_map();
    marked.sort_unstable();
    marked.dedup();
    let mut is_marked: HashMap<EdgeKey, usize> = marked.iter().map(|&e| (e, usize::MAX)).collect();

    // closure: a triangle with any marked edge must also split its refinement edge
    let mut work: Vec<usize> = marked.iter().flat_map(|e| edges[e].iter().copied()).collect();
    work.sort_unstable();
    work.dedup();
    work.reverse();
    while let Some(t) = work.pop() {
        let tri = &mesh.triangles[t];
        let (a, b) = local_edge(tri, mesh.refinement_edge[t] as usize);
        let key = edge_key(a, b);
        if is_marked.contains_key(&key) {
            continue;
        }
        is_marked.insert(key, usize::MAX);
        marked.push(key);
        for &nb in &edges[&key] {
            if nb != t {
                work.push(nb);
            }
        }
    }
    marked.sort_unstable();

    let mut vertices = mesh.vertices.clone();
    let mut boundary = mesh.boundary_vertex.clone();
    for key in &marked {
        let (a, b) = *key;
        vertices.push(mesh.vertices[a].midpoint(mesh.vertices[b]));
        boundary.push(edges[key].len() == 1);
        is_marked.insert(*key, vertices.len() - 1);
    }

    let mut triangles = Vec::with_capacity(mesh.triangles.len() + 2 * marked.len());
    let mut parent = Vec::with_capacity(triangles.capacity());
    let mut reference = Vec::with_capacity(triangles.capacity());
    let mut stack = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        stack.push((*tri, mesh.refinement_edge[t]));
        while let Some((tri, e)) = stack.pop() {
            let (a, b) = local_edge(&tri, e as usize);
            match is_marked.get(&edge_key(a, b)) {
                Some(&m) => {
                    let c = tri[e as usize];
                    // children [c, a, m] and [c, m, b]; push second first so the
                    // first child is emitted first
                    stack.push(([c, m, b], 1));
                    stack.push(([c, a, m], 2));
                }
                None => {
                    triangles.push(tri);
                    parent.push(Some(t));
                    reference.push(e);
                }
            }
        }
    }
    TriMesh {
        vertices,
        triangles,
        boundary_vertex: boundary,
        parent_triangle: parent,
        refinement_edge: reference,
    }
}

fn compose_parents(fine: &mut TriMesh, root_of_coarse: &[usize]) {
    for p in fine.parent_triangle.iter_mut() {
        *p = p.map(|q| root_of_coarse[q]);
    }
}

/// Bisects until every triangle's diameter is at most the Grisvard target at
/// its centroid. The result's `parent_triangle` indexes `mesh`.
pub fn refine_to_size(mesh: &TriMesh, b: &PrefractalBoundary, g: &GradingParams) -> Result<TriMesh, MeshError> {
    g.validate()?;
    let corners = CornerIndex::new(b);
    refine_with(mesh, |x| g.size_at_distance(corners.distance(x)))
}

/// Bisects until no triangle is larger than `size`.
pub fn refine_to_uniform_size(mesh: &TriMesh, size: f64) -> Result<TriMesh, MeshError> {
    if !(size > 0.0) {
        return Err(MeshError::InvalidGrading(format!("size {size} must be positive")));
    }
    refine_with(mesh, |_| size)
}

fn refine_with<F>(mesh: &TriMesh, target: F) -> Result<TriMesh, MeshError>
where
    F: Fn(Point2) -> f64 + Sync,
{
    let mut current = mesh.clone();
    current.parent_triangle = (0..mesh.num_triangles()).map(Some).collect();
    for _ in 0..MAX_REFINEMENT_SWEEPS {
        let marked: Vec<EdgeKey> = (0..current.num_triangles())
            .into_par_iter()
            .filter_map(|t| {
                (current.diameter(t) > target(current.centroid(t))).then(|| {
                    let (a, c) = local_edge(&current.triangles[t], current.refinement_edge[t] as usize);
                    edge_key(a, c)
                })
            })
            .collect();
        if marked.is_empty() {
            return Ok(current);
        }
        let roots: Vec<usize> = current.parent_triangle.iter().map(|p| p.unwrap()).collect();
        let mut next = bisect_marked(&current, marked);
        compose_parents(&mut next, &roots);
        current = next;
    }
    Err(MeshError::SweepLimit(MAX_REFINEMENT_SWEEPS))
}

/// Two bisection generations on every triangle (each triangle → 4 children).
pub fn uniform_refine(mesh: &TriMesh) -> TriMesh {
    let mut all: Vec<EdgeKey> = mesh.edge_map().into_keys().collect();
    all.sort_unstable();
    bisect_marked(mesh, all)
}

/// Outcome of checking a mesh against the Grisvard size field.
#[derive(Debug, Clone, PartialEq)]
pub struct GrisvardReport {
    /// max over triangles of h_T / τ(centroid).
    pub max_ratio: f64,
    pub worst_triangle: usize,
    pub pass: bool,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub num_triangles: usize,
    pub max_diameter: f64,
    pub min_diameter: f64,
}

pub fn check_grisvard(mesh: &TriMesh, b: &PrefractalBoundary, g: &GradingParams) -> GrisvardReport {
    let corners = CornerIndex::new(b);
    let (worst_triangle, max_ratio) = (0..mesh.num_triangles())
        .map(|t| (t, mesh.diameter(t) / g.size_at_distance(corners.distance(mesh.centroid(t)))))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    GrisvardReport {
        max_ratio,
        worst_triangle,
        pass: max_ratio <= 1.0 + 1e-9,
        min_angle_deg: mesh.min_angle_deg(),
        max_angle_deg: mesh.max_angle_deg(),
        num_triangles: mesh.num_triangles(),
        max_diameter: mesh.max_diameter(),
        min_diameter: (0..mesh.num_triangles()).map(|t| mesh.diameter(t)).fold(f64::INFINITY, f64::min),
    }
}

/// A nested sequence of meshes; `levels[k + 1].parent_triangle` indexes `levels[k]`.
#[derive(Debug, Clone, Default)]
pub struct MeshHierarchy {
    pub levels: Vec<TriMesh>,
}

impl MeshHierarchy {
    pub fn new(base: TriMesh) -> Self {
        Self { levels: vec![base] }
    }

    pub fn finest(&self) -> &TriMesh {
        self.levels.last().expect("hierarchy is never empty")
    }

    pub fn push(&mut self, mesh: TriMesh) {
        self.levels.push(mesh);
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// For each triangle of `chain.last()`, the index of its ancestor in `chain[0]`.
/// Returns `None` if a parent link is missing or out of range.
pub fn ancestors(chain: &[&TriMesh]) -> Option<Vec<usize>> {
    let fine = chain.last()?;
    let mut map: Vec<usize> = (0..fine.num_triangles()).collect();
    for k in (1..chain.len()).rev() {
        let mesh = chain[k];
        let coarse_len = chain[k - 1].num_triangles();
        for a in map.iter_mut() {
            let p = mesh.parent_triangle.get(*a).copied().flatten()?;
            if p >= coarse_len {
                return None;
            }
            *a = p;
        }
    }
    Some(map)
}
