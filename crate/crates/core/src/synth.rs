//! Synthetic scenes: a pinhole camera above a ground plane, procedural
//! textures and labelled plaza layouts. Used as fixtures in place of real
//! footage.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{CalibrationInput, CellLabel, PerspectiveGrid, Point2, Rect};
use crate::media::{Channels, Image};

/// Pinhole camera at height `height` above the plane z = 0, looking along
/// world +y, tilted down by `pitch` and rolled about the optical axis by
/// `roll`. World x stays parallel to the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundCamera {
    pub width: u32,
    pub height_px: u32,
    pub focal: f64,
    pub height: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Ground position of world (0, 0) relative to the point below the
    /// camera, as (lateral, forward).
    pub origin: Point2,
    right: [f64; 3],
    down: [f64; 3],
    forward: [f64; 3],
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl GroundCamera {
    pub fn new(width: u32, height_px: u32, focal: f64, height: f64, pitch: f64, roll: f64, origin: Point2) -> Self {
        let (sp, cp) = pitch.sin_cos();
        let (sr, cr) = roll.sin_cos();
        let r0 = [1.0, 0.0, 0.0];
        let d0 = [0.0, -sp, -cp];
        let forward = [0.0, cp, -sp];
        let right = [cr * r0[0] + sr * d0[0], cr * r0[1] + sr * d0[1], cr * r0[2] + sr * d0[2]];
        let down = [-sr * r0[0] + cr * d0[0], -sr * r0[1] + cr * d0[1], -sr * r0[2] + cr * d0[2]];
        Self { width, height_px, focal, height, pitch, roll, origin, right, down, forward }
    }

    /// A random camera with world (0, 0) visible in the lower part of the
    /// image.
    pub fn random(rng: &mut impl Rng, width: u32, height_px: u32) -> Self {
        let focal = rng.random_range(250.0..400.0);
        let height = rng.random_range(3.0..10.0);
        let pitch = rng.random_range(32f64..60.0).to_radians();
        let roll = rng.random_range(-8f64..8.0).to_radians();
        let probe = Self::new(width, height_px, focal, height, pitch, roll, Point2::ZERO);
        let px = Point2::new(rng.random_range(0.3..0.7) * width as f64, rng.random_range(0.7..0.85) * height_px as f64);
        let ground = probe.unproject(px).expect("lower image rows look at the ground");
        Self::new(width, height_px, focal, height, pitch, roll, ground)
    }

    fn camera_relative(&self, world: Point2) -> [f64; 3] {
        [world.x + self.origin.x, world.y + self.origin.y, -self.height]
    }

    /// Image position of a ground point.
    pub fn project(&self, world: Point2) -> Point2 {
        self.project_3d(world, 0.0)
    }

    /// Image position of a point `z` above the ground.
    pub fn project_3d(&self, world: Point2, z: f64) -> Point2 {
        let mut rel = self.camera_relative(world);
        rel[2] += z;
        let zc = dot(rel, self.forward);
        Point2::new(
            self.width as f64 / 2.0 + self.focal * dot(rel, self.right) / zc,
            self.height_px as f64 / 2.0 + self.focal * dot(rel, self.down) / zc,
        )
    }

    /// Ground point seen at an image position, `None` above the horizon.
    pub fn unproject(&self, px: Point2) -> Option<Point2> {
        let a = (px.x - self.width as f64 / 2.0) / self.focal;
        let b = (px.y - self.height_px as f64 / 2.0) / self.focal;
        let ray: Vec<f64> = (0..3).map(|t| self.forward[t] + a * self.right[t] + b * self.down[t]).collect();
        if ray[2] >= -1e-12 {
            return None;
        }
        let s = self.height / -ray[2];
        Some(Point2::new(s * ray[0] - self.origin.x, s * ray[1] - self.origin.y))
    }

    /// Calibration points for unit world distances: `i` at (0, 0), `j` and
    /// `l` three units ahead of `i` and `k`, `k` two units to the side.
    pub fn calibration(&self) -> CalibrationInput {
        let p = |x, y| self.project(Point2::new(x, y));
        CalibrationInput {
            i: p(0.0, 0.0),
            j: p(0.0, 3.0),
            k: p(2.0, 0.0),
            l: p(2.0, 3.0),
            u1: p(0.0, 1.0),
            u2: p(1.0, 0.0),
            image_width: self.width,
            image_height: self.height_px,
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Sum of value-noise octaves in [0, 1].
fn value_noise(width: u32, height: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; width as usize * height as usize];
    let octaves = [(48.0, 0.45), (20.0, 0.3), (8.0, 0.17), (3.0, 0.08)];
    for (scale, amp) in octaves {
        let gw = (width as f64 / scale).ceil() as usize + 2;
        let gh = (height as f64 / scale).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        for y in 0..height as usize {
            let fy = y as f64 / scale;
            let (y0, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
            for x in 0..width as usize {
                let fx = x as f64 / scale;
                let (x0, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
                let v = |gx: usize, gy: usize| lattice[gy * gw + gx];
                let top = v(x0, y0) * (1.0 - tx) + v(x0 + 1, y0) * tx;
                let bottom = v(x0, y0 + 1) * (1.0 - tx) + v(x0 + 1, y0 + 1) * tx;
                out[y * width as usize + x] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out
}

/// Procedural RGB texture, smooth enough for gradient-based flow.
pub fn textured_background(width: u32, height: u32, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = value_noise(width, height, &mut rng);
    let tint = value_noise(width, height, &mut rng);
    let mut data = Vec::with_capacity(base.len() * 3);
    for (b, t) in base.iter().zip(&tint) {
        let v = 40.0 + 170.0 * b;
        let shift = 30.0 * (t - 0.5);
        data.push((v + shift).clamp(0.0, 255.0).round() as u8);
        data.push(v.clamp(0.0, 255.0).round() as u8);
        data.push((v - shift).clamp(0.0, 255.0).round() as u8);
    }
    Image::new(width, height, Channels::Rgb, data).unwrap()
}

/// Copy of `img` translated by an integer offset; uncovered pixels repeat
/// the nearest edge.
pub fn shift_image(img: &Image, dx: i32, dy: i32) -> Image {
    let (w, h) = img.dims();
    let ch = img.channels().count();
    let mut data = vec![0u8; img.data().len()];
    for y in 0..h as i32 {
        let sy = (y - dy).clamp(0, h as i32 - 1) as usize;
        for x in 0..w as i32 {
            let sx = (x - dx).clamp(0, w as i32 - 1) as usize;
            let src = (sy * w as usize + sx) * ch;
            let dst = (y as usize * w as usize + x as usize) * ch;
            data[dst..dst + ch].copy_from_slice(&img.data()[src..src + ch]);
        }
    }
    Image::new(w, h, img.channels(), data).unwrap()
}

/// Layout options for [`label_plaza`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlazaLayout {
    /// Number of fully visible rows used, counted from the camera side.
    pub depth_rows: usize,
    /// Obstacle block as `(row offset, col offset, rows, cols)` relative to
    /// the first visible row and the middle column.
    pub obstacle: Option<(usize, isize, usize, usize)>,
    /// Adds an entrance band along the far edge.
    pub far_entrance: bool,
}

impl Default for PlazaLayout {
    fn default() -> Self {
        Self { depth_rows: 8, obstacle: None, far_entrance: true }
    }
}

/// Labels a plaza: entrance bands on the left, right and far edges of the
/// fully visible region, everything else walkable.
pub fn label_plaza(grid: &mut PerspectiveGrid, layout: PlazaLayout) {
    let (w, h) = grid.image_size();
    let rect = Rect::image(w, h);
    let visible = |g: &PerspectiveGrid, r: usize, c: usize| g.cell_quad(r, c).iter().all(|p| rect.contains(*p));
    let rows: Vec<usize> = (0..grid.rows()).filter(|&r| (0..grid.cols()).any(|c| visible(grid, r, c))).collect();
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            grid.set_label(r, c, CellLabel::Walkable);
        }
    }
    let Some(&first) = rows.first() else { return };
    let used: Vec<usize> = rows.iter().copied().filter(|&r| r < first + layout.depth_rows).collect();
    let mut mid = grid.cols() / 2;
    for &r in &used {
        let cols: Vec<usize> = (0..grid.cols()).filter(|&c| visible(grid, r, c)).collect();
        let (lo, hi) = (cols[0], *cols.last().unwrap());
        grid.set_label(r, lo, CellLabel::Entrance);
        grid.set_label(r, hi, CellLabel::Entrance);
        if r == first {
            mid = (lo + hi) / 2;
        }
        if layout.far_entrance && r == *used.last().unwrap() && used.len() > 2 {
            for c in lo + 3..hi.saturating_sub(2) {
                grid.set_label(r, c, CellLabel::Entrance);
            }
        }
    }
    if let Some((dr, dc, nr, nc)) = layout.obstacle {
        for r in first + dr..first + dr + nr {
            for c in 0..nc {
                let col = mid as isize + dc + c as isize;
                if r < grid.rows() && col >= 0 && (col as usize) < grid.cols() {
                    grid.set_label(r, col as usize, CellLabel::Obstacle);
                }
            }
        }
    }
}
