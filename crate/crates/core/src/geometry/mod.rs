//! Planar geometry primitives: vectors, rotated boxes, contour tracing,
//! convex hulls, minimum-area rectangles and principal directions.
//!
//! All coordinates are continuous pixel coordinates with `x` to the right
//! and `y` downwards. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` and its
//! center sits at `(i + 0.5, j + 0.5)`.

mod contour;
mod hull;
mod pca;
mod rect;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contour::trace_contours;
pub use hull::convex_hull;
pub use pca::{principal_direction, PrincipalAxis, ISOTROPY_RATIO};
pub use rect::min_area_rect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("no points given")]
    Empty,
    #[error("points are coincident or collinear; no rectangle can be fitted")]
    Degenerate,
    #[error("zero-length vector cannot be normalized")]
    ZeroVector,
}

/// A 2-vector, used both for points and displacements.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub type Point = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    /// Counter-clockwise perpendicular in a y-up frame.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, radians: f64) -> Vec2 {
        let (s, c) = radians.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn unit(self) -> Result<UnitVec2, GeometryError> {
        UnitVec2::new(self)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2 { x, y }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// A vector of unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct UnitVec2(Vec2);

impl UnitVec2 {
    pub fn new(v: Vec2) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() || n <= 0.0 {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Self(v * (1.0 / n)))
    }

    pub fn from_angle(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Self(Vec2::new(c, s))
    }

    pub fn x(self) -> f64 {
        self.0.x
    }

    pub fn y(self) -> f64 {
        self.0.y
    }

    pub fn vec(self) -> Vec2 {
        self.0
    }

    pub fn dot(self, v: Vec2) -> f64 {
        self.0.dot(v)
    }

    pub fn flipped(self) -> Self {
        Self(-self.0)
    }
}

impl From<UnitVec2> for [f64; 2] {
    fn from(u: UnitVec2) -> Self {
        u.0.into()
    }
}

impl TryFrom<[f64; 2]> for UnitVec2 {
    type Error = GeometryError;
    fn try_from(a: [f64; 2]) -> Result<Self, Self::Error> {
        UnitVec2::new(a.into())
    }
}

/// Angle between two directions in degrees, in `[0, 180]`; 0 if either is
/// zero. Evaluated as `atan2(|a x b|, a . b)`, which equals the clamped
/// `acos` of the normalized dot product but stays accurate near 0 and 180.
pub fn angle_between_deg(a: Vec2, b: Vec2) -> f64 {
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return 0.0;
    }
    a.cross(b).abs().atan2(a.dot(b)).to_degrees()
}

pub fn acos_deg(cosine: f64) -> f64 {
    cosine.clamp(-1.0, 1.0).acos().to_degrees()
}

/// A rectangle given by its center and two perpendicular half-extent
/// vectors pointing from the center to the midpoints of two adjacent faces.
///
/// Full side lengths are `2 * |edge_w|` and `2 * |edge_h|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub center: Point,
    pub edge_w: Vec2,
    pub edge_h: Vec2,
}

impl RotatedBox {
    /// Relative tolerance on `edge_w . edge_h`.
    pub const ORTHOGONALITY_TOL: f64 = 1e-6;

    pub fn new(center: Point, edge_w: Vec2, edge_h: Vec2) -> Result<Self, GeometryError> {
        let (nw, nh) = (edge_w.norm(), edge_h.norm());
        if !(nw > 0.0 && nh > 0.0) {
            return Err(GeometryError::Degenerate);
        }
        if edge_w.dot(edge_h).abs() > Self::ORTHOGONALITY_TOL * nw * nh {
            return Err(GeometryError::Degenerate);
        }
        Ok(Self {
            center,
            edge_w,
            edge_h,
        })
    }

    /// Axis-free construction from full side lengths and the direction of the
    /// `width` side.
    pub fn from_size(center: Point, width: f64, height: f64, width_angle_rad: f64) -> Self {
        let dir = UnitVec2::from_angle(width_angle_rad).vec();
        Self {
            center,
            edge_w: dir * (width / 2.0),
            edge_h: dir.perp() * (height / 2.0),
        }
    }

    /// Full length of the side spanned by `edge_w`.
    pub fn width(&self) -> f64 {
        2.0 * self.edge_w.norm()
    }

    /// Full length of the side spanned by `edge_h`.
    pub fn height(&self) -> f64 {
        2.0 * self.edge_h.norm()
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Corners in order `c + w + h`, `c - w + h`, `c - w - h`, `c + w - h`.
    pub fn corners(&self) -> [Point; 4] {
        let (c, w, h) = (self.center, self.edge_w, self.edge_h);
        [c + w + h, c - w + h, c - w - h, c + w - h]
    }

    pub fn map(&self, f: impl Fn(Point) -> Point, g: impl Fn(Vec2) -> Vec2) -> Self {
        Self {
            center: f(self.center),
            edge_w: g(self.edge_w),
            edge_h: g(self.edge_h),
        }
    }
}

/// Signed shoelace area; positive for counter-clockwise order in a y-up frame.
pub fn signed_area(polygon: &[Point]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, &p) in polygon.iter().enumerate() {
        let q = polygon[(i + 1) % polygon.len()];
        acc += p.cross(q);
    }
    acc / 2.0
}

pub fn perimeter(polygon: &[Point]) -> f64 {
    if polygon.len() < 2 {
        return 0.0;
    }
    (0..polygon.len())
        .map(|i| (polygon[(i + 1) % polygon.len()] - polygon[i]).norm())
        .sum()
}

/// Nonzero-winding point-in-polygon test. Points exactly on an edge may go
/// either way.
pub fn winding_number(polygon: &[Point], p: Point) -> i32 {
    let mut wn = 0;
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_corners_and_area() {
        let b = RotatedBox::from_size(Point::new(5.0, 5.0), 4.0, 2.0, 0.0);
        assert_eq!(b.area(), 8.0);
        let c = b.corners();
        assert_eq!(c[0], Point::new(7.0, 6.0));
        assert_eq!(c[2], Point::new(3.0, 4.0));
    }

    #[test]
    fn box_rejects_skewed_edges() {
        let r = RotatedBox::new(Point::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.1, 1.0));
        assert_eq!(r, Err(GeometryError::Degenerate));
        assert!(RotatedBox::new(Point::ZERO, Vec2::new(1.0, 0.0), Vec2::ZERO).is_err());
    }

    #[test]
    fn unit_vector_rejects_zero() {
        assert_eq!(UnitVec2::new(Vec2::ZERO), Err(GeometryError::ZeroVector));
        let u = UnitVec2::new(Vec2::new(3.0, 4.0)).unwrap();
        assert!((u.x() - 0.6).abs() < 1e-15 && (u.y() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn acos_is_clamped() {
        assert_eq!(acos_deg(1.0 + 1e-12), 0.0);
        assert_eq!(acos_deg(-1.0 - 1e-12), 180.0);
    }

    #[test]
    fn winding_of_square() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert_ne!(winding_number(&sq, Point::new(1.0, 1.0)), 0);
        assert_eq!(winding_number(&sq, Point::new(3.0, 1.0)), 0);
        assert_eq!(signed_area(&sq), 4.0);
        assert_eq!(perimeter(&sq), 8.0);
    }
}
