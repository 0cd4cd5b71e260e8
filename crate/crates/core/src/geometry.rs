//! Vehicle shapes, closest-point queries, and the dynamic safe distance that
//! feeds the barrier function.
//!
//! Rectangles are described by a center, a `length` along the heading axis
//! and a `width` across it. Distances between rectangles are the minimum over
//! every corner-to-edge distance taken both ways; overlap is detected with a
//! separating-axis test whose minimum translation depth becomes the
//! penetration.

use crate::error::ensure_finite;
use crate::math::Vec2;
use crate::{Error, Result};

/// Cross products below this magnitude count as parallel.
pub const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeSpec {
    Point,
    Circle { radius: f64 },
    Rectangle { width: f64, length: f64 },
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ShapeSpec::Point => Ok(()),
            ShapeSpec::Circle { radius } => {
                ensure_finite("radius", &[radius])?;
                if radius < 0.0 {
                    return Err(Error::invalid("radius", "must be >= 0"));
                }
                Ok(())
            }
            ShapeSpec::Rectangle { width, length } => {
                ensure_finite("rectangle", &[width, length])?;
                if width <= 0.0 || length <= 0.0 {
                    return Err(Error::invalid("rectangle", "width and length must be > 0"));
                }
                Ok(())
            }
        }
    }

    /// Radius of a round shape; `None` for rectangles.
    pub fn round_radius(&self) -> Option<f64> {
        match *self {
            ShapeSpec::Point => Some(0.0),
            ShapeSpec::Circle { radius } => Some(radius),
            ShapeSpec::Rectangle { .. } => None,
        }
    }

    /// Largest distance from the center to the boundary.
    pub fn max_extent(&self) -> f64 {
        match *self {
            ShapeSpec::Point => 0.0,
            ShapeSpec::Circle { radius } => radius,
            ShapeSpec::Rectangle { width, length } => 0.5 * crate::math::sqrt(width * width + length * length),
        }
    }

    /// Half size along the heading axis.
    pub fn half_length(&self) -> f64 {
        match *self {
            ShapeSpec::Point => 0.0,
            ShapeSpec::Circle { radius } => radius,
            ShapeSpec::Rectangle { length, .. } => 0.5 * length,
        }
    }

    pub fn placed(self, center: Vec2, heading: f64) -> PlacedShape {
        PlacedShape {
            shape: self,
            center,
            heading,
        }
    }
}

/// A shape with a pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedShape {
    pub shape: ShapeSpec,
    pub center: Vec2,
    pub heading: f64,
}

impl PlacedShape {
    fn as_box(&self) -> Option<OrientedBox> {
        match self.shape {
            ShapeSpec::Rectangle { width, length } => Some(OrientedBox {
                center: self.center,
                width,
                length,
                heading: self.heading,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec2,
    pub width: f64,
    pub length: f64,
    pub heading: f64,
}

impl OrientedBox {
    /// Corners in counter-clockwise order, starting at front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        rect_corners(self)
    }

    fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_heading(self.heading);
        [u, u.perp()]
    }

    fn half_extents(&self) -> [f64; 2] {
        [0.5 * self.length, 0.5 * self.width]
    }
}

pub fn rect_corners(b: &OrientedBox) -> [Vec2; 4] {
    let hl = 0.5 * b.length;
    let hw = 0.5 * b.width;
    [
        Vec2::new(hl, hw),
        Vec2::new(-hl, hw),
        Vec2::new(-hl, -hw),
        Vec2::new(hl, -hw),
    ]
    .map(|c| b.center + c.rotated(b.heading))
}

/// Projection of a point onto a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentProjection {
    /// Unclamped projection ratio along `a1 -> a2`.
    pub r: f64,
    /// Closest point on the segment.
    pub point: Vec2,
    pub distance: f64,
}

/// Closest point on segment `a1 a2` to `b1`. A degenerate segment
/// (`a1 == a2`) yields `r = 0` and the point-to-point distance.
pub fn point_segment_closest(b1: Vec2, a1: Vec2, a2: Vec2) -> SegmentProjection {
    let edge = a2 - a1;
    let len_sq = edge.norm_sq();
    if len_sq == 0.0 {
        return SegmentProjection {
            r: 0.0,
            point: a1,
            distance: b1.distance(a1),
        };
    }
    let r = (b1 - a1).dot(edge) / len_sq;
    let point = if r <= 0.0 {
        a1
    } else if r >= 1.0 {
        a2
    } else {
        a1 + edge * r
    };
    SegmentProjection {
        r,
        point,
        distance: b1.distance(point),
    }
}

/// Distance from a corner to an edge of the other rectangle.
pub fn corner_edge_distance(b1: Vec2, a1: Vec2, a2: Vec2) -> f64 {
    point_segment_closest(b1, a1, a2).distance
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPair {
    pub point_on_a: Vec2,
    pub point_on_b: Vec2,
    /// Surface gap, zero when touching or overlapping.
    pub distance: f64,
    /// Overlap depth, zero unless overlapping.
    pub penetration: f64,
}

impl ClosestPair {
    /// Distance with overlap reported as a negative value.
    pub fn signed_distance(&self) -> f64 {
        if self.penetration > 0.0 {
            -self.penetration
        } else {
            self.distance
        }
    }

    fn swapped(self) -> Self {
        ClosestPair {
            point_on_a: self.point_on_b,
            point_on_b: self.point_on_a,
            ..self
        }
    }
}

pub fn shape_min_distance(a: &PlacedShape, b: &PlacedShape) -> ClosestPair {
    match (a.as_box(), b.as_box()) {
        (None, None) => round_round(a, b),
        (Some(ba), Some(bb)) => box_box(&ba, &bb),
        (Some(ba), None) => round_box(b, &ba).swapped(),
        (None, Some(bb)) => round_box(a, &bb),
    }
}

fn split_gap(gap: f64) -> (f64, f64) {
    if gap >= 0.0 {
        (gap, 0.0)
    } else {
        (0.0, -gap)
    }
}

fn round_round(a: &PlacedShape, b: &PlacedShape) -> ClosestPair {
    let ra = a.shape.round_radius().unwrap_or(0.0);
    let rb = b.shape.round_radius().unwrap_or(0.0);
    let d = b.center - a.center;
    let dist = d.norm();
    let dir = if dist > 0.0 { d / dist } else { Vec2::new(1.0, 0.0) };
    let (distance, penetration) = split_gap(dist - ra - rb);
    ClosestPair {
        point_on_a: a.center + dir * ra,
        point_on_b: b.center - dir * rb,
        distance,
        penetration,
    }
}

/// Round shape `a` against rectangle `b`.
fn round_box(a: &PlacedShape, b: &OrientedBox) -> ClosestPair {
    let r = a.shape.round_radius().unwrap_or(0.0);
    let corners = b.corners();
    let mut best: Option<SegmentProjection> = None;
    for i in 0..4 {
        let p = point_segment_closest(a.center, corners[i], corners[(i + 1) % 4]);
        if best.is_none_or(|q| p.distance < q.distance) {
            best = Some(p);
        }
    }
    let edge = best.expect("four edges");
    let inside = contains(b, a.center);
    let to_edge = edge.point - a.center;
    let dir = if edge.distance > 0.0 {
        let d = to_edge / edge.distance;
        if inside {
            -d
        } else {
            d
        }
    } else {
        let towards = b.center - a.center;
        let n = towards.norm();
        if n > 0.0 {
            towards / n
        } else {
            Vec2::new(1.0, 0.0)
        }
    };
    let gap = if inside { -edge.distance - r } else { edge.distance - r };
    let (distance, penetration) = split_gap(gap);
    ClosestPair {
        point_on_a: a.center + dir * r,
        point_on_b: edge.point,
        distance,
        penetration,
    }
}

fn contains(b: &OrientedBox, p: Vec2) -> bool {
    let rel = p - b.center;
    let [u, v] = b.axes();
    let [hl, hw] = b.half_extents();
    rel.dot(u).abs() <= hl && rel.dot(v).abs() <= hw
}

/// Separating-axis overlap depth; `None` when a separating axis exists.
fn sat_penetration(a: &OrientedBox, b: &OrientedBox) -> Option<f64> {
    let ca = a.corners();
    let cb = b.corners();
    let mut depth = f64::INFINITY;
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (amin, amax) = project(&ca, axis);
        let (bmin, bmax) = project(&cb, axis);
        let overlap = amax.min(bmax) - amin.max(bmin);
        if overlap <= 0.0 {
            return None;
        }
        depth = depth.min(overlap);
    }
    Some(depth)
}

fn project(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    corners
        .iter()
        .map(|c| c.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
}

fn box_box(a: &OrientedBox, b: &OrientedBox) -> ClosestPair {
    let ca = a.corners();
    let cb = b.corners();
    let mut best = ClosestPair {
        point_on_a: a.center,
        point_on_b: b.center,
        distance: f64::INFINITY,
        penetration: 0.0,
    };
    for i in 0..4 {
        for j in 0..4 {
            // corner of a against edge of b
            let p = point_segment_closest(ca[i], cb[j], cb[(j + 1) % 4]);
            if p.distance < best.distance {
                best = ClosestPair {
                    point_on_a: ca[i],
                    point_on_b: p.point,
                    distance: p.distance,
                    penetration: 0.0,
                };
            }
            // corner of b against edge of a
            let q = point_segment_closest(cb[i], ca[j], ca[(j + 1) % 4]);
            if q.distance < best.distance {
                best = ClosestPair {
                    point_on_a: q.point,
                    point_on_b: cb[i],
                    distance: q.distance,
                    penetration: 0.0,
                };
            }
        }
    }
    if let Some(depth) = sat_penetration(a, b) {
        best.distance = 0.0;
        best.penetration = depth;
    }
    best
}

/// Center-to-center distance at which the two surfaces would touch along the
/// line joining the centers, plus `margin`.
pub fn dynamic_safe_distance(a: &PlacedShape, b: &PlacedShape, margin: f64) -> f64 {
    if let (Some(ra), Some(rb)) = (a.shape.round_radius(), b.shape.round_radius()) {
        return ra + rb + margin;
    }
    let centerline = b.center - a.center;
    let center_dist = centerline.norm();
    if center_dist == 0.0 {
        return a.shape.max_extent() + b.shape.max_extent() + margin;
    }
    let pair = shape_min_distance(a, b);
    if pair.penetration > 0.0 {
        return center_dist + pair.penetration + margin;
    }
    let gap = ((pair.point_on_b - pair.point_on_a).dot(centerline) / center_dist).max(0.0);
    center_dist - gap + margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn contains_point(set: &[Vec2], p: Vec2) -> bool {
        set.iter().any(|q| q.distance(p) < 1e-12)
    }

    fn square(center: Vec2, heading: f64) -> PlacedShape {
        ShapeSpec::Rectangle {
            width: 2.0,
            length: 2.0,
        }
        .placed(center, heading)
    }

    #[test]
    fn corners_of_axis_aligned_square() {
        let b = OrientedBox {
            center: Vec2::ZERO,
            width: 2.0,
            length: 2.0,
            heading: 0.0,
        };
        let c = rect_corners(&b);
        for p in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            assert!(contains_point(&c, Vec2::new(p.0, p.1)));
        }
        let rotated = rect_corners(&OrientedBox {
            heading: FRAC_PI_2,
            ..b
        });
        for p in rotated {
            assert!(contains_point(&c, p));
        }
    }

    #[test]
    fn corners_are_ccw_and_centered() {
        let b = OrientedBox {
            center: Vec2::new(3.0, 0.0),
            width: 2.0,
            length: 4.0,
            heading: 0.0,
        };
        let c = rect_corners(&b);
        let xs: [f64; 4] = c.map(|p| p.x);
        assert_eq!(xs.iter().cloned().fold(f64::INFINITY, f64::min), 1.0);
        assert_eq!(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 5.0);
        let mean = (c[0] + c[1] + c[2] + c[3]) * 0.25;
        assert!(mean.distance(b.center) < 1e-12);
        // signed area positive for CCW
        let area: f64 = (0..4).map(|i| c[i].cross(c[(i + 1) % 4])).sum();
        assert!(area > 0.0);
    }

    #[test]
    fn segment_projection_cases() {
        let (a1, a2) = (Vec2::ZERO, Vec2::new(2.0, 0.0));
        let p = point_segment_closest(Vec2::new(1.0, 1.0), a1, a2);
        assert_eq!((p.r, p.point, p.distance), (0.5, Vec2::new(1.0, 0.0), 1.0));
        let p = point_segment_closest(Vec2::new(3.0, 0.0), a1, a2);
        assert_eq!((p.r, p.point, p.distance), (1.5, a2, 1.0));
        let p = point_segment_closest(Vec2::new(-1.0, 2.0), a1, a2);
        assert!(p.r < 0.0);
        assert_eq!(p.point, a1);
        assert!(close(p.distance, 5f64.sqrt(), 1e-15));
    }

    #[test]
    fn degenerate_segment_is_point_distance() {
        let p = point_segment_closest(Vec2::new(3.0, 4.0), Vec2::ZERO, Vec2::ZERO);
        assert_eq!(p.r, 0.0);
        assert_eq!(p.distance, 5.0);
    }

    #[test]
    fn corner_edge_distance_matches_projection() {
        let (a1, a2) = (Vec2::ZERO, Vec2::new(2.0, 0.0));
        assert_eq!(corner_edge_distance(Vec2::new(1.0, 1.0), a1, a2), 1.0);
        assert_eq!(corner_edge_distance(Vec2::new(3.0, 0.0), a1, a2), 1.0);
        assert!(close(corner_edge_distance(Vec2::new(-1.0, 2.0), a1, a2), 5f64.sqrt(), 1e-15));
        assert_eq!(corner_edge_distance(Vec2::new(0.7, 0.0), a1, a2), 0.0);
        // interior case equals |A1B1| sin(angle between A1B1 and A1A2)
        let b1 = Vec2::new(0.5, 1.3);
        let ab = b1 - a1;
        let angle = ab.heading() - (a2 - a1).heading();
        assert!(close(corner_edge_distance(b1, a1, a2), ab.norm() * angle.sin(), 1e-14));
    }

    #[test]
    fn separated_squares() {
        let pair = shape_min_distance(&square(Vec2::ZERO, 0.0), &square(Vec2::new(4.0, 0.0), 0.0));
        assert!(close(pair.distance, 2.0, 1e-12));
        assert_eq!(pair.penetration, 0.0);
        assert!(close(pair.point_on_a.x, 1.0, 1e-12));
        assert!(close(pair.point_on_b.x, 3.0, 1e-12));
        assert!(close(pair.point_on_a.y, pair.point_on_b.y, 1e-12));
    }

    #[test]
    fn overlapping_squares() {
        let pair = shape_min_distance(&square(Vec2::ZERO, 0.0), &square(Vec2::new(1.0, 0.0), 0.0));
        assert_eq!(pair.distance, 0.0);
        assert!(close(pair.penetration, 1.0, 1e-12));
        assert!(close(pair.signed_distance(), -1.0, 1e-12));
    }

    #[test]
    fn rotated_square_corner_gap() {
        let pair = shape_min_distance(&square(Vec2::ZERO, 0.0), &square(Vec2::new(4.0, 0.0), FRAC_PI_4));
        // frozen from the sampling oracle in tests/geometry_oracle.rs
        assert!(close(pair.distance, 3.0 - SQRT_2, 1e-12));
    }

    #[test]
    fn circles_distance_and_penetration() {
        let a = ShapeSpec::Circle { radius: 1.0 }.placed(Vec2::ZERO, 0.0);
        let b = ShapeSpec::Circle { radius: 0.5 }.placed(Vec2::new(3.0, 4.0), 0.0);
        let p = shape_min_distance(&a, &b);
        assert!(close(p.distance, 3.5, 1e-12));
        assert!(close(p.point_on_a.distance(Vec2::new(0.6, 0.8)), 0.0, 1e-12));
        let c = ShapeSpec::Circle { radius: 1.0 }.placed(Vec2::new(1.0, 0.0), 0.0);
        let q = shape_min_distance(&a, &c);
        assert_eq!(q.distance, 0.0);
        assert!(close(q.penetration, 1.0, 1e-12));
    }

    #[test]
    fn circle_against_rectangle() {
        let circle = ShapeSpec::Circle { radius: 0.5 }.placed(Vec2::new(3.0, 0.0), 0.0);
        let rect = square(Vec2::ZERO, 0.0);
        let p = shape_min_distance(&circle, &rect);
        assert!(close(p.distance, 1.5, 1e-12));
        assert_eq!(p.point_on_b, Vec2::new(1.0, 0.0));
        let q = shape_min_distance(&rect, &circle);
        assert_eq!(q.distance, p.distance);
        assert_eq!(q.point_on_a, p.point_on_b);
        let inside = ShapeSpec::Point.placed(Vec2::new(0.5, 0.0), 0.0);
        let r = shape_min_distance(&inside, &rect);
        assert!(close(r.penetration, 0.5, 1e-12));
    }

    #[test]
    fn safe_distance_cases() {
        let c1 = ShapeSpec::Circle { radius: 1.0 }.placed(Vec2::ZERO, 0.0);
        let c2 = ShapeSpec::Circle { radius: 1.0 }.placed(Vec2::new(5.0, 0.0), 0.0);
        assert_eq!(dynamic_safe_distance(&c1, &c2, 0.0), 2.0);
        assert_eq!(dynamic_safe_distance(&c1, &c2, 0.5), 2.5);

        let a = square(Vec2::ZERO, 0.0);
        let far = square(Vec2::new(4.0, 0.0), 0.0);
        assert!(close(dynamic_safe_distance(&a, &far, 0.0), 2.0, 1e-12));
        let near = square(Vec2::new(1.0, 0.0), 0.0);
        let d = dynamic_safe_distance(&a, &near, 0.0);
        assert!(close(d, 2.0, 1e-12));
        assert!(1.0 - d * d < 0.0);
    }

    #[test]
    fn safe_distance_coincident_centers() {
        let a = square(Vec2::ZERO, 0.0);
        let b = square(Vec2::ZERO, 0.3);
        let d = dynamic_safe_distance(&a, &b, 0.1);
        assert!(close(d, 2.0 * SQRT_2 + 0.1, 1e-12));
    }

    #[test]
    fn shape_validation() {
        assert!(ShapeSpec::Circle { radius: -1.0 }.validate().is_err());
        assert!(ShapeSpec::Rectangle { width: 0.0, length: 1.0 }.validate().is_err());
        assert!(ShapeSpec::Circle { radius: f64::NAN }.validate().is_err());
        assert!(ShapeSpec::Point.validate().is_ok());
    }
}
