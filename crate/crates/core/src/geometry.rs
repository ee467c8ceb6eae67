//! Pre-fractal Koch boundaries, fixture polygons and the planar predicates
//! the mesher relies on.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Highest snowflake level the toolkit will build (3·4^8 vertices).
pub const MAX_SNOWFLAKE_LEVEL: u32 = 8;

/// Vertices whose interior angle exceeds `π + CORNER_ANGLE_TOL` are reentrant.
pub const CORNER_ANGLE_TOL: f64 = 1e-9;

/// Points closer than this to the boundary count as inside.
pub const BOUNDARY_TOL: f64 = 1e-12;

const DEGENERATE_SEGMENT: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate segment: |q - p| = {0:e}")]
    DegenerateSegment(f64),
    #[error("snowflake level {0} outside [0, {MAX_SNOWFLAKE_LEVEL}]")]
    LevelOutOfRange(u32),
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    NotSimple(usize, usize),
    #[error("polygon must have at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not counterclockwise (signed area {0:e})")]
    NotCounterClockwise(f64),
    #[error("invalid circle polygon: radius {radius}, segments {segments}")]
    InvalidCircle { radius: f64, segments: usize },
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A point in the (x1, x2) plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x1 * other.x2 - self.x2 * other.x1
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x1 + other.x1), 0.5 * (self.x2 + other.x2))
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    /// Rotation by `angle` radians about `center`.
    pub fn rotate_about(self, center: Point2, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        let d = self - center;
        center + Point2::new(c * d.x1 - s * d.x2, s * d.x1 + c * d.x2)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x1 * rhs, self.x2 * rhs)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

/// Centroid of the unit initiator triangle (0,0), (1,0), (1/2, √3/2).
pub const TRIANGLE_CENTROID: Point2 = Point2::new(0.5, 0.288_675_134_594_812_9);

/// Which side of the directed segment p→q the Koch bump points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpSide {
    Left,
    Right,
}

/// Replaces the segment `p`→`q` by the four segments of the Koch generator.
///
/// Returns `[p, a, t, b, q]` where `a`, `b` trisect the segment and `t` is the
/// apex of the equilateral bump raised on the middle third.
pub fn koch_subdivide(p: Point2, q: Point2, side: BumpSide) -> Result<[Point2; 5], GeometryError> {
    let d = q - p;
    let len = d.norm();
    if !(len >= DEGENERATE_SEGMENT) {
        return Err(GeometryError::DegenerateSegment(len));
    }
    let a = p + d * (1.0 / 3.0);
    let b = p + d * (2.0 / 3.0);
    // left normal scaled to the bump height |d|·√3/6
    let h = 3f64.sqrt() / 6.0;
    let n = match side {
        BumpSide::Left => Point2::new(-d.x2, d.x1),
        BumpSide::Right => Point2::new(d.x2, -d.x1),
    };
    let t = p.midpoint(q) + n * h;
    Ok([p, a, t, b, q])
}

/// A closed counterclockwise polygon together with its reentrant corners.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefractalBoundary {
    pub level: u32,
    pub vertices: Vec<Point2>,
    pub reentrant: BTreeSet<usize>,
    pub center: Point2,
}

impl PrefractalBoundary {
    /// Wraps an arbitrary simple CCW polygon, classifying its corners.
    pub fn from_polygon(vertices: Vec<Point2>, center: Point2) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if !vertices.iter().all(|p| p.is_finite()) || !center.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            return Err(GeometryError::NotCounterClockwise(area));
        }
        let reentrant = classify_corners(&vertices)?;
        Ok(Self {
            level: 0,
            vertices,
            reentrant,
            center,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Iterator over the closed edge list `(i, v_i, v_{i+1})`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (i, self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn reentrant_points(&self) -> Vec<Point2> {
        self.reentrant.iter().map(|&i| self.vertices[i]).collect()
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.vertices)
    }

    /// Translates the polygon and its center rigidly.
    pub fn translated(&self, by: Point2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&p| p + by).collect(),
            center: self.center + by,
            ..self.clone()
        }
    }

    /// Rotates the polygon and its center about `pivot`.
    pub fn rotated(&self, pivot: Point2, angle: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| p.rotate_about(pivot, angle)).collect(),
            center: self.center.rotate_about(pivot, angle),
            ..self.clone()
        }
    }
}

/// Which domain to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainShape {
    Snowflake { level: u32 },
    CirclePolygon { radius: f64, segments: usize },
    UnitSquare,
}

/// A domain shape plus the point it is centered at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub shape: DomainShape,
    pub center: Point2,
}

impl DomainSpec {
    pub fn snowflake(level: u32) -> Self {
        Self {
            shape: DomainShape::Snowflake { level },
            center: TRIANGLE_CENTROID,
        }
    }

    /// Ω_0: the circle of radius 1/2 about the snowflake center.
    pub fn circle(radius: f64, segments: usize) -> Self {
        Self {
            shape: DomainShape::CirclePolygon { radius, segments },
            center: TRIANGLE_CENTROID,
        }
    }

    pub fn unit_square() -> Self {
        Self {
            shape: DomainShape::UnitSquare,
            center: Point2::new(0.5, 0.5),
        }
    }

    /// Short label used in reports (`omega_n`, `circle`, `square`).
    pub fn label(&self) -> String {
        match self.shape {
            DomainShape::Snowflake { level } => format!("omega_{level}"),
            DomainShape::CirclePolygon { .. } => "omega_0".to_string(),
            DomainShape::UnitSquare => "unit_square".to_string(),
        }
    }

    /// Snowflake level, or 0 for the circle and square fixtures.
    pub fn level(&self) -> u32 {
        match self.shape {
            DomainShape::Snowflake { level } => level,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.center.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        match self.shape {
            DomainShape::Snowflake { level } if level > MAX_SNOWFLAKE_LEVEL => {
                Err(GeometryError::LevelOutOfRange(level))
            }
            DomainShape::CirclePolygon { radius, segments } if !(radius > 0.0) || segments < 8 => {
                Err(GeometryError::InvalidCircle { radius, segments })
            }
            _ => Ok(()),
        }
    }

    pub fn boundary(&self) -> Result<PrefractalBoundary, GeometryError> {
        self.validate()?;
        match self.shape {
            DomainShape::Snowflake { level } => {
                let b = build_snowflake(level)?;
                let shift = self.center - b.center;
                Ok(if shift == Point2::default() { b } else { b.translated(shift) })
            }
            DomainShape::CirclePolygon { radius, segments } => {
                circle_polygon(radius, segments, self.center)
            }
            DomainShape::UnitSquare => {
                let b = unit_square();
                let shift = self.center - b.center;
                Ok(if shift == Point2::default() { b } else { b.translated(shift) })
            }
        }
    }
}

/// Builds the level-`n` pre-fractal Koch snowflake boundary F_n.
pub fn build_snowflake(level: u32) -> Result<PrefractalBoundary, GeometryError> {
    if level > MAX_SNOWFLAKE_LEVEL {
        return Err(GeometryError::LevelOutOfRange(level));
    }
    let mut verts = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.5, 3f64.sqrt() / 2.0),
    ];
    for _ in 0..level {
        let n = verts.len();
        let mut next = Vec::with_capacity(4 * n);
        for i in 0..n {
            // CCW traversal: the exterior is on the right
            let five = koch_subdivide(verts[i], verts[(i + 1) % n], BumpSide::Right)?;
            next.extend_from_slice(&five[..4]);
        }
        verts = next;
    }
    let reentrant = classify_corners(&verts)?;
    Ok(PrefractalBoundary {
        level,
        vertices: verts,
        reentrant,
        center: TRIANGLE_CENTROID,
    })
}

/// Regular `segments`-gon inscribed in the circle of `radius` about `center`.
pub fn circle_polygon(radius: f64, segments: usize, center: Point2) -> Result<PrefractalBoundary, GeometryError> {
    if !(radius > 0.0) || segments < 8 {
        return Err(GeometryError::InvalidCircle { radius, segments });
    }
    let vertices = (0..segments).map(|k| circle_vertex(radius, segments, center, k)).collect();
    Ok(PrefractalBoundary {
        level: 0,
        vertices,
        reentrant: BTreeSet::new(),
        center,
    })
}

pub(crate) fn circle_vertex(radius: f64, segments: usize, center: Point2, k: usize) -> Point2 {
    let theta = 2.0 * PI * k as f64 / segments as f64;
    center + Point2::new(radius * theta.cos(), radius * theta.sin())
}

/// Unit square fixture [0,1]².
pub fn unit_square() -> PrefractalBoundary {
    PrefractalBoundary {
        level: 0,
        vertices: vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ],
        reentrant: BTreeSet::new(),
        center: Point2::new(0.5, 0.5),
    }
}

/// Interior angle at vertex `i` of a CCW polygon, in (0, 2π).
pub fn interior_angle(vertices: &[Point2], i: usize) -> f64 {
    let n = vertices.len();
    let prev = vertices[(i + n - 1) % n];
    let cur = vertices[i];
    let next = vertices[(i + 1) % n];
    let e1 = cur - prev;
    let e2 = next - cur;
    let turn = e1.cross(e2).atan2(e1.dot(e2));
    PI - turn
}

/// Indices of the vertices whose interior angle exceeds π.
pub fn classify_corners(vertices: &[Point2]) -> Result<BTreeSet<usize>, GeometryError> {
    check_simple(vertices)?;
    Ok((0..vertices.len())
        .filter(|&i| interior_angle(vertices, i) > PI + CORNER_ANGLE_TOL)
        .collect())
}

/// Sum of the edge lengths.
pub fn boundary_length(b: &PrefractalBoundary) -> f64 {
    b.edges().map(|(_, p, q)| p.dist(q)).sum()
}

pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n).map(|i| vertices[i].cross(vertices[(i + 1) % n])).sum();
    0.5 * twice
}

/// Shoelace area; positive for CCW polygons.
pub fn polygon_area(b: &PrefractalBoundary) -> f64 {
    signed_area(&b.vertices)
}

/// Distance from `x` to the nearest reentrant vertex, `+∞` if there is none.
pub fn distance_to_reentrant(x: Point2, b: &PrefractalBoundary) -> f64 {
    b.reentrant
        .iter()
        .map(|&i| x.dist(b.vertices[i]))
        .fold(f64::INFINITY, f64::min)
}

/// Winding-number inclusion test. Points within [`BOUNDARY_TOL`] of an edge
/// are reported inside.
pub fn point_in_polygon(x: Point2, b: &PrefractalBoundary) -> bool {
    winding_contains(x, b.edges().map(|(_, p, q)| (p, q)))
}

fn winding_contains(x: Point2, edges: impl Iterator<Item = (Point2, Point2)>) -> bool {
    let mut winding = 0i64;
    for (p, q) in edges {
        if segment_distance(x, p, q) <= BOUNDARY_TOL {
            return true;
        }
        let side = (q - p).cross(x - p);
        if p.x2 <= x.x2 {
            if q.x2 > x.x2 && side > 0.0 {
                winding += 1;
            }
        } else if q.x2 <= x.x2 && side < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Euclidean distance from `x` to the closed segment `pq`.
pub fn segment_distance(x: Point2, p: Point2, q: Point2) -> f64 {
    let d = q - p;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return x.dist(p);
    }
    let t = ((x - p).dot(d) / len2).clamp(0.0, 1.0);
    x.dist(p + d * t)
}

pub fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x1 = lo.x1.min(p.x1);
        lo.x2 = lo.x2.min(p.x2);
        hi.x1 = hi.x1.max(p.x1);
        hi.x2 = hi.x2.max(p.x2);
    }
    (lo, hi)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Point2, q: Point2, x: Point2) -> bool {
    x.x1 >= p.x1.min(q.x1) && x.x1 <= p.x1.max(q.x1) && x.x2 >= p.x2.min(q.x2) && x.x2 <= p.x2.max(q.x2)
}

/// Closed-segment intersection test with a relative collinearity tolerance.
fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let scale = (p2 - p1).norm().max((q2 - q1).norm());
    let eps = 1e-12 * scale * scale;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps)) {
        return true;
    }
    (d1.abs() <= eps && on_segment(q1, q2, p1))
        || (d2.abs() <= eps && on_segment(q1, q2, p2))
        || (d3.abs() <= eps && on_segment(p1, p2, q1))
        || (d4.abs() <= eps && on_segment(p1, p2, q2))
}

/// Verifies that no two non-adjacent edges touch. Edges are bucketed into a
/// uniform grid so large snowflakes are checked in near-linear time.
pub fn check_simple(vertices: &[Point2]) -> Result<(), GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    let (lo, hi) = bounding_box(vertices);
    let mean_len = (0..n).map(|i| vertices[i].dist(vertices[(i + 1) % n])).sum::<f64>() / n as f64;
    let extent = (hi.x1 - lo.x1).max(hi.x2 - lo.x2).max(f64::MIN_POSITIVE);
    let cells_per_side = ((extent / mean_len.max(extent * 1e-6)).ceil() as usize).clamp(1, 4096);
    let cell = extent / cells_per_side as f64;
    let index = |v: f64, o: f64| (((v - o) / cell).floor().max(0.0) as usize).min(cells_per_side - 1);

    let mut grid: std::collections::HashMap<(usize, usize), Vec<usize>> = std::collections::HashMap::new();
    for i in 0..n {
        let (p, q) = (vertices[i], vertices[(i + 1) % n]);
        let (i0, i1) = (index(p.x1.min(q.x1), lo.x1), index(p.x1.max(q.x1), lo.x1));
        let (j0, j1) = (index(p.x2.min(q.x2), lo.x2), index(p.x2.max(q.x2), lo.x2));
        for a in i0..=i1 {
            for c in j0..=j1 {
                grid.entry((a, c)).or_default().push(i);
            }
        }
    }
    let mut keys: Vec<_> = grid.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let bucket = &grid[&key];
        for (k, &i) in bucket.iter().enumerate() {
            for &j in &bucket[k + 1..] {
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if adjacent {
                    // neighbours share exactly one endpoint; a fold-back overlap
                    // would make them collinear and overlapping
                    let shared = if (i + 1) % n == j { vertices[j] } else { vertices[i] };
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                    let other_i = if a == shared { b } else { a };
                    let other_j = if c == shared { d } else { c };
                    let u = other_i - shared;
                    let v = other_j - shared;
                    if u.cross(v).abs() <= 1e-12 * u.norm() * v.norm() && u.dot(v) > 0.0 {
                        return Err(GeometryError::NotSimple(i.min(j), i.max(j)));
                    }
                    continue;
                }
                if segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                    return Err(GeometryError::NotSimple(i.min(j), i.max(j)));
                }
            }
        }
    }
    Ok(())
}

/// Winding-number inclusion test accelerated by horizontal edge strips.
///
/// Only edges whose x2-range spans the query ordinate can change the winding
/// number or lie within [`BOUNDARY_TOL`] of the query, so each query scans a
/// single strip.
#[derive(Debug, Clone)]
pub struct PolygonLocator {
    edges: Vec<(Point2, Point2)>,
    y0: f64,
    strip: f64,
    strips: Vec<Vec<u32>>,
}

impl PolygonLocator {
    pub fn new(b: &PrefractalBoundary) -> Self {
        let edges: Vec<_> = b.edges().map(|(_, p, q)| (p, q)).collect();
        let (lo, hi) = b.bounding_box();
        let count = (edges.len() / 4).clamp(1, 1 << 16);
        let y0 = lo.x2 - 2.0 * BOUNDARY_TOL;
        let strip = ((hi.x2 - lo.x2) + 4.0 * BOUNDARY_TOL) / count as f64;
        let mut strips = vec![Vec::new(); count];
        for (k, &(p, q)) in edges.iter().enumerate() {
            let a = p.x2.min(q.x2) - BOUNDARY_TOL;
            let c = p.x2.max(q.x2) + BOUNDARY_TOL;
            let s0 = (((a - y0) / strip).floor().max(0.0) as usize).min(count - 1);
            let s1 = (((c - y0) / strip).floor().max(0.0) as usize).min(count - 1);
            for s in strips.iter_mut().take(s1 + 1).skip(s0) {
                s.push(k as u32);
            }
        }
        Self { edges, y0, strip, strips }
    }

    pub fn contains(&self, x: Point2) -> bool {
        let s = (x.x2 - self.y0) / self.strip;
        if !(s >= 0.0) || s >= self.strips.len() as f64 {
            return false;
        }
        let bucket = &self.strips[s as usize];
        winding_contains(x, bucket.iter().map(|&k| self.edges[k as usize]))
    }
}

/// Nearest-reentrant-corner queries backed by a uniform grid.
///
/// Agrees exactly with [`distance_to_reentrant`]; the grid only prunes which
/// corners are compared.
#[derive(Debug, Clone)]
pub struct CornerIndex {
    corners: Vec<Point2>,
    origin: Point2,
    cell: f64,
    dims: (usize, usize),
    cells: Vec<Vec<u32>>,
}

impl CornerIndex {
    pub fn new(b: &PrefractalBoundary) -> Self {
        let corners = b.reentrant_points();
        let (lo, hi) = b.bounding_box();
        let extent = (hi.x1 - lo.x1).max(hi.x2 - lo.x2).max(1e-300);
        let per_side = ((corners.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let cell = extent / per_side as f64;
        let dims = (
            ((hi.x1 - lo.x1) / cell).floor() as usize + 1,
            ((hi.x2 - lo.x2) / cell).floor() as usize + 1,
        );
        let mut cells = vec![Vec::new(); dims.0 * dims.1];
        for (k, c) in corners.iter().enumerate() {
            let i = (((c.x1 - lo.x1) / cell) as usize).min(dims.0 - 1);
            let j = (((c.x2 - lo.x2) / cell) as usize).min(dims.1 - 1);
            cells[j * dims.0 + i].push(k as u32);
        }
        Self {
            corners,
            origin: lo,
            cell,
            dims,
            cells,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn distance(&self, x: Point2) -> f64 {
        if self.corners.is_empty() {
            return f64::INFINITY;
        }
        let fi = (x.x1 - self.origin.x1) / self.cell;
        let fj = (x.x2 - self.origin.x2) / self.cell;
        let ci = (fi.floor().max(0.0) as usize).min(self.dims.0 - 1) as i64;
        let cj = (fj.floor().max(0.0) as usize).min(self.dims.1 - 1) as i64;
        let max_ring = self.dims.0.max(self.dims.1) as i64;
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // any corner in ring k is at least (k-1)·cell away from x's clamped cell,
            // plus however far x sits outside the grid
            let outside = ((self.origin.x1 - x.x1).max(x.x1 - (self.origin.x1 + self.dims.0 as f64 * self.cell)).max(0.0))
                .hypot((self.origin.x2 - x.x2).max(x.x2 - (self.origin.x2 + self.dims.1 as f64 * self.cell)).max(0.0));
            if ring > 0 && ((ring - 1) as f64 * self.cell).max(outside) > best {
                break;
            }
            for j in (cj - ring)..=(cj + ring) {
                if j < 0 || j >= self.dims.1 as i64 {
                    continue;
                }
                for i in (ci - ring)..=(ci + ring) {
                    if i < 0 || i >= self.dims.0 as i64 {
                        continue;
                    }
                    if (j - cj).abs() != ring && (i - ci).abs() != ring {
                        continue;
                    }
                    for &k in &self.cells[j as usize * self.dims.0 + i as usize] {
                        best = best.min(x.dist(self.corners[k as usize]));
                    }
                }
            }
        }
        best
    }
}
