//! User calibration points and the recursive construction of equidistant
//! depth points along the line toward the vanishing point.
//!
//! The construction only uses line intersections, so it is invariant under
//! the perspective mapping of the ground plane: points produced here are the
//! images of world points spaced exactly one depth unit apart.

use serde::{Deserialize, Serialize};

use super::point::{distance_to_line, line_intersect, project_onto_line, Point2, Rect};
use super::GeometryError;

/// Hand-clicked points may be off their line by this much before they are
/// rejected; within it they are snapped onto the line.
pub const ON_LINE_TOLERANCE_PX: f64 = 2.0;

/// The six user points plus the image size.
///
/// `i`-`j` and `k`-`l` are two ground lines that are parallel in the world,
/// `u1` marks one depth unit from `i` along `i`-`j`, and `u2` marks one
/// lateral unit from `i` along `i`-`k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInput {
    pub i: Point2,
    pub j: Point2,
    pub k: Point2,
    pub l: Point2,
    pub u1: Point2,
    pub u2: Point2,
    pub image_width: u32,
    pub image_height: u32,
}

fn degenerate(msg: impl Into<String>) -> GeometryError {
    GeometryError::DegenerateCalibration(msg.into())
}

impl CalibrationInput {
    pub fn image_rect(&self) -> Rect {
        Rect::image(self.image_width, self.image_height)
    }

    /// Checks the point configuration and derives the vanishing point and
    /// the auxiliary points `R`, `R0` and `T0` of the construction.
    pub fn prepare(&self) -> Result<PreparedCalibration, GeometryError> {
        let pts = [self.i, self.j, self.k, self.l, self.u1, self.u2];
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(degenerate("non-finite calibration point"));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(degenerate("image size must be positive"));
        }
        if self.i.distance(self.j) < 1e-9 {
            return Err(degenerate("i and j coincide"));
        }
        if self.k.distance(self.l) < 1e-9 {
            return Err(degenerate("k and l coincide"));
        }
        if distance_to_line(self.k, self.i, self.j) < 1.0 {
            return Err(degenerate("k lies on line ij"));
        }
        let vanish = line_intersect(self.i, self.j, self.k, self.l)
            .map_err(|_| degenerate("lines ij and kl are parallel; no vanishing point"))?;

        let u1_off = distance_to_line(self.u1, self.i, self.j);
        if u1_off > ON_LINE_TOLERANCE_PX {
            return Err(degenerate(format!("u1 is {u1_off:.2}px off line ij")));
        }
        let u1 = project_onto_line(self.u1, self.i, self.j);
        let u2_off = distance_to_line(self.u2, self.i, self.k);
        if u2_off > ON_LINE_TOLERANCE_PX {
            return Err(degenerate(format!("u2 is {u2_off:.2}px off line ik")));
        }
        let u2 = project_onto_line(self.u2, self.i, self.k);

        let depth_unit = u1.distance(self.i);
        if depth_unit < 1e-6 {
            return Err(degenerate("u1 coincides with i (zero depth unit)"));
        }
        if u2.distance(self.i) < 1e-6 {
            return Err(degenerate("u2 coincides with i (zero lateral unit)"));
        }
        let to_vanish = vanish - self.i;
        if (u1 - self.i).dot(to_vanish) <= 0.0 || depth_unit >= to_vanish.norm() {
            return Err(degenerate("u1 must lie between i and the vanishing point"));
        }

        let base = BaseFrame { i: self.i, k: self.k, u1, u2, vanish };
        let r = base.choose_reference_point()?;
        base.with_reference(r)
    }

    /// Equidistant depth points `G_n` along line `i`-vanish.
    ///
    /// Runs the forward recursion from `G_1 = u1` while the next point stays
    /// inside the image (at most `max_points` forward points) and the
    /// inverted recursion from `G_0 = i` away from the vanishing point until
    /// it leaves the image.
    pub fn recursive_scale_points(&self, max_points: usize) -> Result<ScaleLadder, GeometryError> {
        let prep = self.prepare()?;
        prep.scale_points_in(&self.image_rect(), max_points)
    }
}

#[derive(Debug, Clone, Copy)]
struct BaseFrame {
    i: Point2,
    k: Point2,
    u1: Point2,
    u2: Point2,
    vanish: Point2,
}

impl BaseFrame {
    /// Picks `R` deterministically: the best-conditioned of a fixed set of
    /// candidates on a circle well outside the triangle `i`, vanish, `k`.
    fn choose_reference_point(&self) -> Result<Point2, GeometryError> {
        let pts = [self.i, self.vanish, self.k];
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in pts {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let center = Point2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let radius = 0.75 * Point2::new(x1 - x0, y1 - y0).norm();
        let mut best: Option<(f64, Point2)> = None;
        for step in 0..16 {
            let theta = 0.3 + step as f64 * std::f64::consts::PI / 8.0;
            let r = center + Point2::new(theta.cos(), theta.sin()) * radius;
            if let Ok(prep) = self.with_reference(r) {
                let q = prep.conditioning();
                if best.is_none_or(|(bq, _)| q > bq) {
                    best = Some((q, r));
                }
            }
        }
        best.map(|(_, r)| r).ok_or_else(|| degenerate("no usable reference point for the depth recursion"))
    }

    fn with_reference(&self, r: Point2) -> Result<PreparedCalibration, GeometryError> {
        let wrap = |_| degenerate("reference point produces parallel construction lines");
        let t0 = line_intersect(self.i, r, self.k, self.vanish).map_err(wrap)?;
        let r0 = line_intersect(self.u1, t0, r, self.vanish).map_err(wrap)?;
        let prep =
            PreparedCalibration { i: self.i, k: self.k, u1: self.u1, u2: self.u2, vanish: self.vanish, r, r0, t0 };
        // The first step must reproduce a point strictly between u1 and vanish.
        let g2 = prep.step_toward(self.u1)?;
        let d1 = self.u1.distance(self.vanish);
        let d2 = g2.distance(self.vanish);
        if !(d2 < d1) {
            return Err(degenerate("depth recursion does not approach the vanishing point"));
        }
        Ok(prep)
    }
}

/// A validated calibration with its derived construction points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedCalibration {
    pub i: Point2,
    pub k: Point2,
    /// `u1` snapped onto line `i`-`j`.
    pub u1: Point2,
    /// `u2` snapped onto line `i`-`k`.
    pub u2: Point2,
    pub vanish: Point2,
    /// Arbitrary auxiliary point outside triangle `i`, vanish, `k`.
    pub r: Point2,
    /// Intersection of `u1`-`T0` with `R`-vanish.
    pub r0: Point2,
    /// Intersection of `i`-`R` with `k`-vanish.
    pub t0: Point2,
}

impl PreparedCalibration {
    /// Same calibration with a caller-chosen auxiliary point `R`.
    pub fn with_reference_point(&self, r: Point2) -> Result<Self, GeometryError> {
        BaseFrame { i: self.i, k: self.k, u1: self.u1, u2: self.u2, vanish: self.vanish }.with_reference(r)
    }

    /// Smallest sine of the angle between any pair of lines intersected by
    /// the construction around `u1`.
    fn conditioning(&self) -> f64 {
        let sin = |a: Point2, b: Point2, c: Point2, d: Point2| (b - a).normalized().cross((d - c).normalized()).abs();
        let t1 = line_intersect(self.u1, self.r, self.k, self.vanish).unwrap_or(self.t0);
        [
            sin(self.i, self.r, self.k, self.vanish),
            sin(self.u1, self.t0, self.r, self.vanish),
            sin(self.u1, self.r, self.k, self.vanish),
            sin(self.r0, t1, self.i, self.vanish),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// Auxiliary point `T_n` for depth point `G_n`.
    pub fn t_point(&self, g: Point2) -> Result<Point2, GeometryError> {
        line_intersect(g, self.r, self.k, self.vanish)
            .map_err(|_| degenerate("construction line through R is parallel to k-vanish"))
    }

    /// `G_{n+1}` from `G_n`.
    pub fn step_toward(&self, g: Point2) -> Result<Point2, GeometryError> {
        let t = self.t_point(g)?;
        line_intersect(self.r0, t, self.i, self.vanish)
            .map_err(|_| degenerate("construction line through R0 is parallel to i-vanish"))
    }

    /// `G_{n-1}` from `G_n` (the inverted recursion).
    pub fn step_away(&self, g: Point2) -> Result<Point2, GeometryError> {
        let t = line_intersect(self.r0, g, self.k, self.vanish)
            .map_err(|_| degenerate("construction line through R0 is parallel to k-vanish"))?;
        line_intersect(self.r, t, self.i, self.vanish)
            .map_err(|_| degenerate("construction line through R is parallel to i-vanish"))
    }

    /// Depth-ladder generation bounded by `rect`.
    pub fn scale_points_in(&self, rect: &Rect, max_points: usize) -> Result<ScaleLadder, GeometryError> {
        if max_points == 0 {
            return Err(degenerate("max_points must be at least 1"));
        }
        let mut forward = vec![self.u1];
        while forward.len() < max_points {
            let last = *forward.last().unwrap();
            let next = self.step_toward(last)?;
            if !rect.contains(next) || !(next.distance(self.vanish) < last.distance(self.vanish)) {
                break;
            }
            forward.push(next);
        }
        let mut backward = Vec::new();
        let mut current = self.i;
        while backward.len() < max_points {
            let next = self.step_away(current)?;
            if !rect.contains(next) || !(next.distance(self.vanish) > current.distance(self.vanish)) {
                break;
            }
            backward.push(next);
            current = next;
        }
        let start = -(backward.len() as i32);
        let mut points: Vec<Point2> = backward.into_iter().rev().collect();
        points.push(self.i);
        points.extend(forward);
        Ok(ScaleLadder { start, points })
    }
}

/// Depth points `G_n` for consecutive `n`, with `points[k] = G_{start + k}`.
/// `G_0` is `i` and `G_1` is `u1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub start: i32,
    pub points: Vec<Point2>,
}

impl ScaleLadder {
    pub fn get(&self, n: i32) -> Option<Point2> {
        let idx = n - self.start;
        if idx < 0 {
            return None;
        }
        self.points.get(idx as usize).copied()
    }

    pub fn end(&self) -> i32 {
        self.start + self.points.len() as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GroundCamera;

    fn fixture() -> (GroundCamera, CalibrationInput) {
        let cam =
            GroundCamera::new(320, 240, 300.0, 5.0, 35f64.to_radians(), 3f64.to_radians(), Point2::new(-1.5, 4.0));
        let calib = cam.calibration();
        (cam, calib)
    }

    #[test]
    fn ladder_matches_homography() {
        let (cam, calib) = fixture();
        let ladder = calib.recursive_scale_points(64).unwrap();
        assert!(ladder.end() > 10, "ladder too short: {:?}", ladder.end());
        for n in 1..=10 {
            let g = ladder.get(n).unwrap();
            let truth = cam.project(Point2::new(0.0, n as f64));
            assert!(g.distance(truth) < 1.0, "G_{n}: {g:?} vs {truth:?}");
        }
        for n in ladder.start..ladder.end() {
            let truth = cam.project(Point2::new(0.0, n as f64));
            assert!(ladder.get(n).unwrap().distance(truth) < 1e-6);
        }
    }

    #[test]
    fn ladder_stays_in_image() {
        let (_, calib) = fixture();
        let ladder = calib.recursive_scale_points(500).unwrap();
        let rect = calib.image_rect();
        assert!(ladder.points.iter().all(|p| rect.contains(*p)));
    }

    #[test]
    fn max_points_caps_forward_recursion() {
        let (_, calib) = fixture();
        let ladder = calib.recursive_scale_points(3).unwrap();
        assert_eq!(ladder.end(), 4);
    }

    #[test]
    fn spacing_shrinks_toward_vanishing_point() {
        let (_, calib) = fixture();
        let ladder = calib.recursive_scale_points(200).unwrap();
        let gaps: Vec<f64> = ladder.points.windows(2).map(|w| w[0].distance(w[1])).collect();
        assert!(gaps.windows(2).all(|g| g[1] < g[0]));
    }

    #[test]
    fn recursion_incidences_hold() {
        let (_, calib) = fixture();
        let prep = calib.prepare().unwrap();
        let mut g = prep.u1;
        for _ in 0..15 {
            let t = prep.t_point(g).unwrap();
            let next = prep.step_toward(g).unwrap();
            assert!(distance_to_line(t, g, prep.r) < 1e-6);
            assert!(distance_to_line(t, prep.k, prep.vanish) < 1e-6);
            assert!(distance_to_line(next, prep.r0, t) < 1e-6);
            assert!(distance_to_line(next, prep.i, prep.vanish) < 1e-6);
            g = next;
        }
        assert!(distance_to_line(prep.t0, prep.i, prep.r) < 1e-6);
        assert!(distance_to_line(prep.r0, prep.r, prep.vanish) < 1e-6);
    }

    #[test]
    fn inverted_step_undoes_forward_step() {
        let (_, calib) = fixture();
        let prep = calib.prepare().unwrap();
        let g2 = prep.step_toward(prep.u1).unwrap();
        assert!(prep.step_away(g2).unwrap().distance(prep.u1) < 1e-9);
        assert!(prep.step_away(prep.u1).unwrap().distance(prep.i) < 1e-9);
    }

    #[test]
    fn parallel_depth_lines_are_degenerate() {
        let calib = CalibrationInput {
            i: Point2::new(100.0, 200.0),
            j: Point2::new(100.0, 100.0),
            k: Point2::new(200.0, 200.0),
            l: Point2::new(200.0, 100.0),
            u1: Point2::new(100.0, 170.0),
            u2: Point2::new(130.0, 200.0),
            image_width: 320,
            image_height: 240,
        };
        assert!(matches!(calib.prepare(), Err(GeometryError::DegenerateCalibration(_))));
    }

    #[test]
    fn zero_depth_unit_is_degenerate() {
        let (_, mut calib) = fixture();
        calib.u1 = calib.i;
        assert!(matches!(calib.recursive_scale_points(10), Err(GeometryError::DegenerateCalibration(_))));
    }

    #[test]
    fn off_line_unit_point_rejected_and_near_line_snapped() {
        let (_, calib) = fixture();
        let dir = (calib.j - calib.i).normalized().perp();
        let mut far = calib;
        far.u1 = calib.u1 + dir * 5.0;
        assert!(far.prepare().is_err());
        let mut near = calib;
        near.u1 = calib.u1 + dir * 1.5;
        let prep = near.prepare().unwrap();
        assert!(prep.u1.distance(calib.u1) < 1e-9);
    }
}
