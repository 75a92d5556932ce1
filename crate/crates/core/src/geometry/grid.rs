//! The perspective grid: an image-space lattice whose cells are the images of
//! unit squares on the ground plane.
//!
//! Rows run in depth (row 0 is the camera side, rows increase toward the
//! vanishing point) and columns run laterally. World coordinates are
//! `(x, y) = (column * lateral_unit, row * depth_unit)` measured from the
//! grid's corner `(0, 0)`.

use serde::{Deserialize, Serialize};

use super::calibration::{CalibrationInput, PreparedCalibration};
use super::point::{line_intersect, Point2, Rect};
use super::GeometryError;

/// Per-cell annotation, serialized with the single-letter codes used by
/// scene files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum CellLabel {
    #[default]
    #[serde(rename = "W")]
    Walkable,
    #[serde(rename = "O")]
    Obstacle,
    #[serde(rename = "E")]
    Entrance,
}

impl CellLabel {
    pub fn is_passable(self) -> bool {
        !matches!(self, CellLabel::Obstacle)
    }
}

/// World length of one cell edge along each grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSize {
    pub lateral: f64,
    pub depth: f64,
}

impl Default for CellSize {
    fn default() -> Self {
        Self { lateral: 1.0, depth: 1.0 }
    }
}

/// Limits on how far grid construction may extend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Maximum number of rows or columns on either side of `i`.
    pub max_extent: i32,
    /// Forward depth growth stops once one row of cells is thinner than this
    /// in the image.
    pub min_cell_px: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { max_extent: 256, min_cell_px: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveGrid {
    rows: usize,
    cols: usize,
    corners: Vec<Point2>,
    labels: Vec<CellLabel>,
    vanish: Point2,
    origin: (usize, usize),
    cell_size: CellSize,
    image_width: u32,
    image_height: u32,
}

/// Lazily extended ladder of depth points indexed by signed depth.
struct DepthLadder<'a> {
    prep: &'a PreparedCalibration,
    start: i32,
    points: Vec<Point2>,
}

impl<'a> DepthLadder<'a> {
    fn new(prep: &'a PreparedCalibration) -> Self {
        Self { prep, start: 0, points: vec![prep.i, prep.u1] }
    }

    fn end(&self) -> i32 {
        self.start + self.points.len() as i32
    }

    fn get(&self, n: i32) -> Point2 {
        self.points[(n - self.start) as usize]
    }

    fn extend_forward(&mut self) -> Result<Point2, GeometryError> {
        let last = *self.points.last().unwrap();
        let next = self.prep.step_toward(last)?;
        self.points.push(next);
        Ok(next)
    }

    /// Adds `G_{start-1}`; returns false when the inverted recursion stops
    /// moving away from the vanishing point.
    fn extend_backward(&mut self) -> Result<bool, GeometryError> {
        let first = self.points[0];
        let next = self.prep.step_away(first)?;
        if !(next.distance(self.prep.vanish) > first.distance(self.prep.vanish)) {
            return Ok(false);
        }
        self.points.insert(0, next);
        self.start -= 1;
        Ok(true)
    }
}

struct Lattice<'a> {
    ladder: DepthLadder<'a>,
    lateral_step: Point2,
    row_dir: Point2,
}

impl Lattice<'_> {
    fn corner(&self, n: i32, m: i32) -> Result<Point2, GeometryError> {
        let g = self.ladder.get(n);
        if m == 0 {
            return Ok(g);
        }
        let base = self.ladder.prep.i + self.lateral_step * m as f64;
        line_intersect(g, g + self.row_dir, base, self.ladder.prep.vanish)
            .map_err(|_| GeometryError::DegenerateCalibration("lateral line parallel to depth line".into()))
    }

    /// Perpendicular image distance between row lines `n` and `n + 1`.
    fn row_gap(&self, n: i32) -> f64 {
        let d = self.ladder.get(n + 1) - self.ladder.get(n);
        d.cross(self.row_dir.normalized()).abs()
    }
}

impl PerspectiveGrid {
    /// Builds the grid covering the whole image with default options and
    /// unit cell sizes. All cells start out walkable.
    pub fn build(calib: &CalibrationInput) -> Result<Self, GeometryError> {
        Self::build_with(calib, CellSize::default(), GridOptions::default())
    }

    pub fn build_with(calib: &CalibrationInput, cell_size: CellSize, opts: GridOptions) -> Result<Self, GeometryError> {
        let prep = calib.prepare()?;
        Self::from_prepared(&prep, calib.image_width, calib.image_height, cell_size, opts)
    }

    /// Grid construction from an already prepared calibration; lets callers
    /// supply their own auxiliary point.
    pub fn from_prepared(
        prep: &PreparedCalibration,
        image_width: u32,
        image_height: u32,
        cell_size: CellSize,
        opts: GridOptions,
    ) -> Result<Self, GeometryError> {
        if !(cell_size.lateral > 0.0 && cell_size.depth > 0.0) {
            return Err(GeometryError::DegenerateCalibration("cell sizes must be positive".into()));
        }
        let rect = Rect::image(image_width, image_height);
        let mut lattice =
            Lattice { ladder: DepthLadder::new(prep), lateral_step: prep.u2 - prep.i, row_dir: prep.k - prep.i };
        let (mut n0, mut n1, mut m0, mut m1) = (0i32, 1i32, 0i32, 1i32);
        let mut back_blocked = false;

        let segment_touches = |a: Point2, b: Point2| rect.intersects_segment(a, b);
        loop {
            let mut changed = false;

            if n1 < opts.max_extent {
                let touches = segment_touches(lattice.corner(n1, m0)?, lattice.corner(n1, m1)?);
                if touches {
                    if lattice.ladder.end() <= n1 + 1 {
                        lattice.ladder.extend_forward()?;
                    }
                    if lattice.row_gap(n1) >= opts.min_cell_px {
                        n1 += 1;
                        changed = true;
                    }
                }
            }
            if n0 > -opts.max_extent && !back_blocked {
                let touches = segment_touches(lattice.corner(n0, m0)?, lattice.corner(n0, m1)?);
                if touches {
                    if lattice.ladder.start > n0 - 1 && !lattice.ladder.extend_backward()? {
                        back_blocked = true;
                    } else {
                        n0 -= 1;
                        changed = true;
                    }
                }
            }
            if m1 < opts.max_extent && segment_touches(lattice.corner(n0, m1)?, lattice.corner(n1, m1)?) {
                m1 += 1;
                changed = true;
            }
            if m0 > -opts.max_extent && segment_touches(lattice.corner(n0, m0)?, lattice.corner(n1, m0)?) {
                m0 -= 1;
                changed = true;
            }
            if !changed {
                break;
            }
        }

        let rows = (n1 - n0) as usize;
        let cols = (m1 - m0) as usize;
        let mut corners = Vec::with_capacity((rows + 1) * (cols + 1));
        for n in n0..=n1 {
            for m in m0..=m1 {
                corners.push(lattice.corner(n, m)?);
            }
        }
        if corners.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::DegenerateCalibration("non-finite grid corner".into()));
        }
        Ok(Self {
            rows,
            cols,
            corners,
            labels: vec![CellLabel::Walkable; rows * cols],
            vanish: prep.vanish,
            origin: ((-n0) as usize, (-m0) as usize),
            cell_size,
            image_width,
            image_height,
        })
    }

    /// A grid from explicit corners, mainly for tests and hand-made scenes.
    pub fn from_corners(
        rows: usize,
        cols: usize,
        corners: Vec<Point2>,
        vanish: Point2,
        cell_size: CellSize,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self, GeometryError> {
        if rows == 0 || cols == 0 || corners.len() != (rows + 1) * (cols + 1) {
            return Err(GeometryError::InvalidScene("corner array does not match grid size".into()));
        }
        Ok(Self {
            rows,
            cols,
            corners,
            labels: vec![CellLabel::Walkable; rows * cols],
            vanish,
            origin: (0, 0),
            cell_size,
            image_width,
            image_height,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn vanish(&self) -> Point2 {
        self.vanish
    }

    /// Corner index `(row, col)` of calibration point `i`.
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn cell_size(&self) -> CellSize {
        self.cell_size
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.image_width, self.image_height)
    }

    pub fn corner(&self, row: usize, col: usize) -> Point2 {
        self.corners[row * (self.cols + 1) + col]
    }

    /// Corners as `rows + 1` arrays of `cols + 1` points.
    pub fn corner_rows(&self) -> Vec<Vec<Point2>> {
        self.corners.chunks(self.cols + 1).map(|r| r.to_vec()).collect()
    }

    pub fn label(&self, row: usize, col: usize) -> CellLabel {
        self.labels[row * self.cols + col]
    }

    pub fn set_label(&mut self, row: usize, col: usize, label: CellLabel) {
        self.labels[row * self.cols + col] = label;
    }

    pub fn labels(&self) -> Vec<Vec<CellLabel>> {
        self.labels.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    /// Replaces all labels; the array must be `rows x cols`.
    pub fn set_labels(&mut self, labels: &[Vec<CellLabel>]) -> Result<(), GeometryError> {
        if labels.len() != self.rows || labels.iter().any(|r| r.len() != self.cols) {
            let got_cols = labels.first().map_or(0, |r| r.len());
            return Err(GeometryError::InvalidScene(format!(
                "label array is {}x{} but grid is {}x{}",
                labels.len(),
                got_cols,
                self.rows,
                self.cols
            )));
        }
        self.labels = labels.iter().flatten().copied().collect();
        Ok(())
    }

    pub fn count_label(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Image quadrilateral of a cell as `[c00, c01, c11, c10]` (counter-clockwise
    /// in grid index order).
    pub fn cell_quad(&self, row: usize, col: usize) -> [Point2; 4] {
        [self.corner(row, col), self.corner(row, col + 1), self.corner(row + 1, col + 1), self.corner(row + 1, col)]
    }

    /// World extent `(width, depth)` covered by the grid.
    pub fn world_extent(&self) -> (f64, f64) {
        (self.cols as f64 * self.cell_size.lateral, self.rows as f64 * self.cell_size.depth)
    }

    /// World position of corner `(row, col)`.
    pub fn corner_world(&self, row: usize, col: usize) -> Point2 {
        Point2::new(col as f64 * self.cell_size.lateral, row as f64 * self.cell_size.depth)
    }

    pub fn cell_center_world(&self, row: usize, col: usize) -> Point2 {
        Point2::new((col as f64 + 0.5) * self.cell_size.lateral, (row as f64 + 0.5) * self.cell_size.depth)
    }

    /// The cell containing a world point, if any. Points on the far edge of
    /// the grid belong to the last row or column.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let (gx, gy) = (p.x / self.cell_size.lateral, p.y / self.cell_size.depth);
        let eps = 1e-9;
        if !(gx >= -eps && gy >= -eps && gx <= self.cols as f64 + eps && gy <= self.rows as f64 + eps) {
            return None;
        }
        let c = (gx.max(0.0).floor() as usize).min(self.cols - 1);
        let r = (gy.max(0.0).floor() as usize).min(self.rows - 1);
        Some((r, c))
    }

    fn locate(&self, p: Point2) -> Result<(usize, usize, f64, f64), GeometryError> {
        let (r, c) = self.cell_of(p).ok_or(GeometryError::OutOfBounds { x: p.x, y: p.y })?;
        let u = (p.x / self.cell_size.lateral - c as f64).clamp(0.0, 1.0);
        let v = (p.y / self.cell_size.depth - r as f64).clamp(0.0, 1.0);
        Ok((r, c, u, v))
    }

    /// Maps a world point to image pixels through the projective map of the
    /// cell that contains it. On parallelogram cells this is exactly bilinear
    /// interpolation; on perspective cells it reproduces the ground-plane
    /// perspective.
    pub fn world_to_image(&self, p: Point2) -> Result<Point2, GeometryError> {
        let (r, c, u, v) = self.locate(p)?;
        Ok(CellMap::new(self, r, c).apply(u, v))
    }

    /// Image length in pixels of one world unit held parallel to the image
    /// plane at `p`, i.e. the lateral scale of the ground at that depth.
    pub fn local_scale(&self, p: Point2) -> Result<f64, GeometryError> {
        let (r, c, u, v) = self.locate(p)?;
        let (dx, dy) = CellMap::new(self, r, c).du(u, v);
        Ok(dx.hypot(dy) / self.cell_size.lateral)
    }
}

/// Projective map from the unit square onto one cell's image quad.
#[derive(Debug, Clone, Copy)]
struct CellMap {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
    g: f64,
    h: f64,
}

impl CellMap {
    fn new(grid: &PerspectiveGrid, r: usize, c: usize) -> Self {
        // (0,0) -> p0, (1,0) -> p1, (1,1) -> p2, (0,1) -> p3
        let p0 = grid.corner(r, c);
        let p1 = grid.corner(r, c + 1);
        let p2 = grid.corner(r + 1, c + 1);
        let p3 = grid.corner(r + 1, c);
        Self::square_to_quad(p0, p1, p2, p3)
    }

    fn square_to_quad(p0: Point2, p1: Point2, p2: Point2, p3: Point2) -> Self {
        let s = p0 - p1 + p2 - p3;
        if s.x == 0.0 && s.y == 0.0 {
            let (e1, e2) = (p1 - p0, p3 - p0);
            return Self { a: e1.x, b: e2.x, c: p0.x, d: e1.y, e: e2.y, f: p0.y, g: 0.0, h: 0.0 };
        }
        let d1 = p1 - p2;
        let d2 = p3 - p2;
        let det = d1.cross(d2);
        let g = s.cross(d2) / det;
        let h = d1.cross(s) / det;
        Self {
            a: p1.x - p0.x + g * p1.x,
            b: p3.x - p0.x + h * p3.x,
            c: p0.x,
            d: p1.y - p0.y + g * p1.y,
            e: p3.y - p0.y + h * p3.y,
            f: p0.y,
            g,
            h,
        }
    }

    fn apply(&self, u: f64, v: f64) -> Point2 {
        let w = self.g * u + self.h * v + 1.0;
        Point2::new((self.a * u + self.b * v + self.c) / w, (self.d * u + self.e * v + self.f) / w)
    }

    /// Partial derivative of the image point along `u`.
    fn du(&self, u: f64, v: f64) -> (f64, f64) {
        let w = self.g * u + self.h * v + 1.0;
        let nx = self.a * u + self.b * v + self.c;
        let ny = self.d * u + self.e * v + self.f;
        ((self.a * w - nx * self.g) / (w * w), (self.d * w - ny * self.g) / (w * w))
    }
}
