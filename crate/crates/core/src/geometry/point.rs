use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// A 2D point or vector. Used for both image pixels and world units; the
/// surrounding API says which space a value lives in.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Vectors share the point representation.
pub type Vec2 = Point2;

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or zero for a zero vector.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Self::ZERO
        }
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rescales the vector so its length is at most `max_len`.
    pub fn clamp_length(self, max_len: f64) -> Self {
        let n = self.norm();
        if n > max_len && n > 0.0 {
            self * (max_len / n)
        } else {
            self
        }
    }

    pub fn lerp(self, other: Self, t: f64) -> Self {
        self + (other - self) * t
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Point2 {
    fn sub_assign(&mut self, rhs: Self) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Relative cutoff below which two lines count as parallel.
pub const PARALLEL_EPS: f64 = 1e-9;

/// Intersection of the infinite lines through `a`,`b` and through `c`,`d`.
///
/// Fails with [`GeometryError::ParallelLines`] when the normalized cross
/// product of the two directions is below [`PARALLEL_EPS`], which also
/// covers a line given by two coincident points.
pub fn line_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> Result<Point2, GeometryError> {
    let d1 = b - a;
    let d2 = d - c;
    let denom = d1.cross(d2);
    let scale = d1.norm() * d2.norm();
    if !(denom.abs() >= PARALLEL_EPS * scale) || scale == 0.0 {
        return Err(GeometryError::ParallelLines);
    }
    let t = (c - a).cross(d2) / denom;
    let p = a + d1 * t;
    if p.is_finite() {
        Ok(p)
    } else {
        Err(GeometryError::ParallelLines)
    }
}

/// Perpendicular distance from `p` to the infinite line through `a` and `b`.
pub fn distance_to_line(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let n = d.norm();
    if n == 0.0 {
        return p.distance(a);
    }
    ((p - a).cross(d) / n).abs()
}

/// Orthogonal projection of `p` onto the infinite line through `a` and `b`.
pub fn project_onto_line(p: Point2, a: Point2, b: Point2) -> Point2 {
    let d = b - a;
    let n2 = d.norm_squared();
    if n2 == 0.0 {
        return a;
    }
    a + d * ((p - a).dot(d) / n2)
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn image(width: u32, height: u32) -> Self {
        Self { x0: 0.0, y0: 0.0, x1: width as f64, y1: height as f64 }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Whether the closed segment `a`-`b` touches the rectangle
    /// (Liang-Barsky clipping).
    pub fn intersects_segment(&self, a: Point2, b: Point2) -> bool {
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        let checks = [(-d.x, a.x - self.x0), (d.x, self.x1 - a.x), (-d.y, a.y - self.y0), (d.y, self.y1 - a.y)];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_meet_at_origin() {
        let p =
            line_intersect(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, -1.0), Point2::new(0.0, 1.0))
                .unwrap();
        assert_eq!(p, Point2::ZERO);
    }

    #[test]
    fn diagonals_meet_at_one_one() {
        // y = x and y = 2 - x  =>  x = 1, y = 1
        let p =
            line_intersect(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 2.0), Point2::new(2.0, 0.0))
                .unwrap();
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn horizontal_parallels_rejected() {
        let r =
            line_intersect(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 1.0));
        assert_eq!(r, Err(GeometryError::ParallelLines));
    }

    #[test]
    fn coincident_points_rejected() {
        let a = Point2::new(3.0, 4.0);
        let r = line_intersect(a, a, Point2::ZERO, Point2::new(0.0, 1.0));
        assert_eq!(r, Err(GeometryError::ParallelLines));
    }

    #[test]
    fn segment_rect_clipping() {
        let r = Rect::image(10, 10);
        assert!(r.intersects_segment(Point2::new(-5.0, 5.0), Point2::new(15.0, 5.0)));
        assert!(!r.intersects_segment(Point2::new(-5.0, -1.0), Point2::new(15.0, -1.0)));
        assert!(r.intersects_segment(Point2::new(2.0, 2.0), Point2::new(3.0, 3.0)));
        assert!(!r.intersects_segment(Point2::new(11.0, 0.0), Point2::new(20.0, 20.0)));
    }

    proptest::proptest! {
        #[test]
        fn intersection_lies_on_both_lines(
            ax in -500.0f64..500.0, ay in -500.0f64..500.0,
            bx in -500.0f64..500.0, by in -500.0f64..500.0,
            cx in -500.0f64..500.0, cy in -500.0f64..500.0,
            dx in -500.0f64..500.0, dy in -500.0f64..500.0,
        ) {
            let (a, b, c, d) = (Point2::new(ax, ay), Point2::new(bx, by), Point2::new(cx, cy), Point2::new(dx, dy));
            let d1 = (b - a).normalized();
            let d2 = (d - c).normalized();
            proptest::prop_assume!(d1.cross(d2).abs() > 1e-3);
            proptest::prop_assume!((b - a).norm() > 1.0 && (d - c).norm() > 1.0);
            let p = line_intersect(a, b, c, d).unwrap();
            let scale = 1.0 + p.norm() * 1e-9;
            proptest::prop_assert!(distance_to_line(p, a, b) < 1e-6 * scale);
            proptest::prop_assert!(distance_to_line(p, c, d) < 1e-6 * scale);
        }
    }
}
