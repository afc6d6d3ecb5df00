//! Planar geometry: points, rigid poses and simple polygons.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Wrap an angle into the half-open interval (-π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already; keep the closed end on +π.
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Rigid 2D pose. `theta` is kept in (-π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub const IDENTITY: Pose2D = Pose2D {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// `self ∘ child`: express a pose given in this frame in the parent frame.
    pub fn compose(&self, child: &Pose2D) -> Pose2D {
        let p = self.transform_point(child.position());
        Pose2D::new(p.x, p.y, self.theta + child.theta)
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Map a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Map a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        let d = p - self.position();
        Point2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }
}

/// Signed area by the shoelace formula; positive for counter-clockwise rings.
pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * acc
}

/// True when the ring is strictly convex and counter-clockwise.
///
/// Every turn must be a left turn and the total turning must equal one
/// revolution, which rules out self-intersecting star shapes.
pub fn is_convex_ccw(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut turning = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let e1 = b - a;
        let e2 = c - b;
        if e1.norm_squared() == 0.0 || e1.cross(e2) <= 0.0 {
            return false;
        }
        turning += e1.cross(e2).atan2(e1.dot(e2));
    }
    (turning - 2.0 * PI).abs() < 1e-6
}

/// Even-odd point-in-polygon test. Works for any simple polygon.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn closest_point_on_segment(p: Point2, a: Point2, b: Point2) -> Point2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point on the polygon boundary to `p`.
pub fn closest_point_on_boundary(p: Point2, poly: &[Point2]) -> Point2 {
    let n = poly.len();
    let mut best = poly[0];
    let mut best_d2 = f64::INFINITY;
    for i in 0..n {
        let q = closest_point_on_segment(p, poly[i], poly[(i + 1) % n]);
        let d2 = (q - p).norm_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = q;
        }
    }
    best
}

/// Signed distance from `p` to the polygon: positive outside, negative inside.
pub fn signed_distance(p: Point2, poly: &[Point2]) -> f64 {
    let d = closest_point_on_boundary(p, poly).distance(p);
    if point_in_polygon(p, poly) {
        -d
    } else {
        d
    }
}

/// Interior overlap of two convex polygons by the separating-axis test.
/// Polygons that only touch along their boundary do not overlap.
pub fn convex_overlap(a: &[Point2], b: &[Point2]) -> bool {
    const EPS: f64 = 1e-9;
    let separated_along_edges_of = |p: &[Point2]| {
        let n = p.len();
        (0..n).any(|i| {
            let e = p[(i + 1) % n] - p[i];
            let axis = Point2::new(-e.y, e.x);
            let len = axis.norm();
            if len == 0.0 {
                return false;
            }
            let axis = axis * (1.0 / len);
            let span = |q: &[Point2]| {
                q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let d = v.dot(axis);
                    (lo.min(d), hi.max(d))
                })
            };
            let (a_lo, a_hi) = span(a);
            let (b_lo, b_hi) = span(b);
            a_hi <= b_lo + EPS || b_hi <= a_lo + EPS
        })
    };
    !(separated_along_edges_of(a) || separated_along_edges_of(b))
}

/// Counter-clockwise copy of a polygon ring.
pub fn to_ccw(poly: &[Point2]) -> Vec<Point2> {
    let mut out = poly.to_vec();
    if signed_area(&out) < 0.0 {
        out.reverse();
    }
    out
}

/// Axis-aligned bounds `(min, max)`.
pub fn bounds(poly: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

pub fn translate(poly: &[Point2], by: Point2) -> Vec<Point2> {
    poly.iter().map(|&p| p + by).collect()
}

pub fn transform(poly: &[Point2], pose: &Pose2D) -> Vec<Point2> {
    poly.iter().map(|&p| pose.transform_point(p)).collect()
}

/// Axis-aligned rectangle centred on the origin, counter-clockwise.
pub fn rectangle(width: f64, height: f64) -> Vec<Point2> {
    let (hw, hh) = (0.5 * width, 0.5 * height);
    vec![
        Point2::new(-hw, -hh),
        Point2::new(hw, -hh),
        Point2::new(hw, hh),
        Point2::new(-hw, hh),
    ]
}

/// Regular polygon inscribed in a circle, counter-clockwise.
pub fn regular_polygon(radius: f64, sides: usize) -> Vec<Point2> {
    (0..sides)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / sides as f64;
            Point2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    fn homogeneous(p: &Pose2D) -> Matrix3<f64> {
        let (s, c) = p.theta.sin_cos();
        Matrix3::new(c, -s, p.x, s, c, p.y, 0.0, 0.0, 1.0)
    }

    fn assert_pose_eq(a: &Pose2D, b: &Pose2D, tol: f64) {
        assert_abs_diff_eq!(a.x, b.x, epsilon = tol);
        assert_abs_diff_eq!(a.y, b.y, epsilon = tol);
        assert_abs_diff_eq!(normalize_angle(a.theta - b.theta), 0.0, epsilon = tol);
    }

    #[test]
    fn normalize_keeps_half_open_interval() {
        assert_abs_diff_eq!(normalize_angle(PI), PI);
        assert_abs_diff_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-0.5), -0.5);
        assert_abs_diff_eq!(normalize_angle(2.0 * PI + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn compose_identity() {
        let p = Pose2D::new(0.3, -1.2, 2.0);
        assert_pose_eq(&Pose2D::IDENTITY.compose(&p), &p, 1e-15);
        assert_pose_eq(&p.compose(&Pose2D::IDENTITY), &p, 1e-15);
    }

    #[test]
    fn compose_quarter_turn() {
        let out = Pose2D::new(1.0, 0.0, PI / 2.0).compose(&Pose2D::new(1.0, 0.0, 0.0));
        assert_pose_eq(&out, &Pose2D::new(1.0, 1.0, PI / 2.0), 1e-12);
    }

    #[test]
    fn compose_matches_matrix_oracle() {
        let a = Pose2D::new(0.5, 0.2, 0.3);
        let b = Pose2D::new(0.1, 0.0, 0.1);
        let m = homogeneous(&a) * homogeneous(&b);
        let expected = Pose2D::new(m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)]));
        assert_pose_eq(&a.compose(&b), &expected, 1e-12);
    }

    #[test]
    fn convexity_check() {
        let sq = rectangle(1.0, 1.0);
        assert!(is_convex_ccw(&sq));
        let mut cw = sq.clone();
        cw.reverse();
        assert!(!is_convex_ccw(&cw));
        let bowtie = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(!is_convex_ccw(&bowtie));
        assert!(!is_convex_ccw(&sq[..2]));
    }

    #[test]
    fn signed_distance_inside_and_out() {
        let sq = rectangle(2.0, 2.0);
        assert_abs_diff_eq!(signed_distance(Point2::new(3.0, 0.0), &sq), 2.0);
        assert_abs_diff_eq!(signed_distance(Point2::new(0.5, 0.0), &sq), -0.5);
    }

    #[test]
    fn sat_overlap_ignores_touching() {
        let a = rectangle(1.0, 1.0);
        let touching = translate(&a, Point2::new(1.0, 0.0));
        let crossing = translate(&a, Point2::new(0.9, 0.0));
        let inner = transform(&rectangle(0.2, 0.2), &Pose2D::IDENTITY);
        assert!(!convex_overlap(&a, &touching));
        assert!(convex_overlap(&a, &crossing));
        assert!(convex_overlap(&a, &inner));
        assert!(convex_overlap(&a, &a));
        let diamond = transform(&rectangle(1.0, 1.0), &Pose2D::new(1.2, 0.0, PI / 4.0));
        assert!(convex_overlap(&a, &diamond));
        let far_diamond = transform(&rectangle(1.0, 1.0), &Pose2D::new(1.3, 0.0, PI / 4.0));
        assert!(!convex_overlap(&a, &far_diamond));
    }

    fn pose_strategy() -> impl Strategy<Value = Pose2D> {
        (-5.0..5.0f64, -5.0..5.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            assert_pose_eq(&left, &right, 1e-9);
        }

        #[test]
        fn compose_with_inverse_is_identity(p in pose_strategy()) {
            assert_pose_eq(&p.compose(&p.inverse()), &Pose2D::IDENTITY, 1e-9);
            assert_pose_eq(&p.inverse().compose(&p), &Pose2D::IDENTITY, 1e-9);
        }

        #[test]
        fn theta_always_normalized(a in pose_strategy(), b in pose_strategy()) {
            let t = a.compose(&b).theta;
            prop_assert!(t > -PI && t <= PI);
        }

        #[test]
        fn rigid_transform_preserves_area(p in pose_strategy(), w in 0.1..3.0f64, h in 0.1..3.0f64) {
            let poly = rectangle(w, h);
            let moved = transform(&poly, &p);
            prop_assert!((signed_area(&moved) - signed_area(&poly)).abs() < 1e-9);
            prop_assert!(is_convex_ccw(&moved));
        }
    }
}
