//! Symmetric quadrature rules on triangles, in barycentric coordinates with
//! weights normalized to sum to one (multiply by the triangle area).

use crate::geometry::Point2;

/// A rule point: barycentric coordinates and normalized weight.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Edge-midpoint rule, exact for quadratics.
pub fn degree2() -> [QuadPoint; 3] {
    [
        QuadPoint { bary: [0.5, 0.5, 0.0], weight: 1.0 / 3.0 },
        QuadPoint { bary: [0.0, 0.5, 0.5], weight: 1.0 / 3.0 },
        QuadPoint { bary: [0.5, 0.0, 0.5], weight: 1.0 / 3.0 },
    ]
}

/// Seven-point rule exact for polynomials of degree 5.
pub fn degree5() -> [QuadPoint; 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w2 = (155.0 + s15) / 1200.0;
    [
        QuadPoint { bary: [1.0 / 3.0; 3], weight: 9.0 / 40.0 },
        QuadPoint { bary: [b1, a1, a1], weight: w1 },
        QuadPoint { bary: [a1, b1, a1], weight: w1 },
        QuadPoint { bary: [a1, a1, b1], weight: w1 },
        QuadPoint { bary: [b2, a2, a2], weight: w2 },
        QuadPoint { bary: [a2, b2, a2], weight: w2 },
        QuadPoint { bary: [a2, a2, b2], weight: w2 },
    ]
}

pub fn map_point(corners: &[Point2; 3], bary: &[f64; 3]) -> Point2 {
    Point2::new(
        bary[0] * corners[0].x1 + bary[1] * corners[1].x1 + bary[2] * corners[2].x1,
        bary[0] * corners[0].x2 + bary[1] * corners[1].x2 + bary[2] * corners[2].x2,
    )
}
