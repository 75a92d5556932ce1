//! Dense optical flow.

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Per-pixel motion in pixels per frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, u: vec![0.0; width * height], v: vec![0.0; width * height] }
    }

    pub fn from_components(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self, FeatureError> {
        if u.len() != width * height || v.len() != width * height {
            return Err(FeatureError::DimensionMismatch(format!(
                "flow components of length {}/{} for {width}x{height}",
                u.len(),
                v.len()
            )));
        }
        Ok(Self { width, height, u, v })
    }

    /// Constant field.
    pub fn uniform(width: usize, height: usize, vx: f32, vy: f32) -> Self {
        Self { width, height, u: vec![vx; width * height], v: vec![vy; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn set(&mut self, x: usize, y: usize, vx: f32, vy: f32) {
        let i = y * self.width + x;
        self.u[i] = vx;
        self.v[i] = vy;
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.u.iter().zip(&self.v).map(|(&a, &b)| (a as f64).hypot(b as f64))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Field mirrored left to right, with horizontal components negated.
    pub fn mirrored(&self) -> Self {
        let mut out = Self::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let (a, b) = self.at(x, y);
                out.set(self.width - 1 - x, y, -a, b);
            }
        }
        out
    }
}

/// Single-channel `f32` image.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn from_image(img: &crate::media::Image) -> Self {
        Self::new(img.width() as usize, img.height() as usize, img.luma_plane())
    }

    #[inline]
    fn get(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    fn sample(&self, x: f32, y: f32) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f32);
        let y = y.clamp(0.0, (self.height - 1) as f32);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (tx, ty) = (x - x0 as f32, y - y0 as f32);
        let row = |yy: usize| {
            let a = self.data[yy * self.width + x0];
            let b = self.data[yy * self.width + x1];
            a + (b - a) * tx
        };
        let (top, bottom) = (row(y0), row(y1));
        top + (bottom - top) * ty
    }

    /// 5-tap binomial blur followed by dropping every other row and column.
    fn downsample(&self) -> Plane {
        const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let (w, h) = (self.width, self.height);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = (0..5).map(|k| K[k] * self.get(x as isize + k as isize - 2, y as isize)).sum();
            }
        }
        let tmp = Plane::new(w, h, tmp);
        let (nw, nh) = ((w / 2).max(1), (h / 2).max(1));
        let mut out = vec![0.0; nw * nh];
        for y in 0..nh {
            for x in 0..nw {
                let (sx, sy) = (2 * x as isize, 2 * y as isize);
                out[y * nw + x] = (0..5).map(|k| K[k] * tmp.get(sx, sy + k as isize - 2)).sum();
            }
        }
        Plane::new(nw, nh, out)
    }
}

/// Source of dense flow between consecutive frames.
pub trait FlowProvider: Sync {
    fn name(&self) -> &'static str;
    fn flow(&self, prev: &Plane, next: &Plane) -> Result<FlowField, FeatureError>;
}

/// Coarse-to-fine Horn–Schunck with image warping between levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HornSchunck {
    pub levels: usize,
    /// Smoothness weight, in intensity units (0..=255 images).
    pub alpha: f32,
    pub iterations: usize,
    /// Re-warps per pyramid level.
    pub warps: usize,
}

impl Default for HornSchunck {
    fn default() -> Self {
        Self { levels: 3, alpha: 6.0, iterations: 20, warps: 2 }
    }
}

fn upsample_flow(u: &[f32], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f32> {
    let coarse = Plane::new(w, h, u.to_vec());
    let (sx, sy) = (w as f32 / nw as f32, h as f32 / nh as f32);
    let mut out = vec![0.0; nw * nh];
    for y in 0..nh {
        for x in 0..nw {
            let cx = (x as f32 + 0.5) * sx - 0.5;
            let cy = (y as f32 + 0.5) * sy - 0.5;
            out[y * nw + x] = coarse.sample(cx, cy) * 2.0;
        }
    }
    out
}

/// Horn–Schunck neighbourhood average: 1/6 for edge neighbours, 1/12 for
/// diagonal ones, borders replicated.
fn smooth(f: &[f32], w: usize, h: usize, out: &mut [f32]) {
    const A: f32 = 1.0 / 6.0;
    const B: f32 = 1.0 / 12.0;
    for y in 0..h {
        let up = &f[y.saturating_sub(1) * w..][..w];
        let mid = &f[y * w..][..w];
        let down = &f[(y + 1).min(h - 1) * w..][..w];
        let o = &mut out[y * w..][..w];
        let at = |row: &[f32], x: isize| row[x.clamp(0, w as isize - 1) as usize];
        for x in [0, w - 1] {
            let xi = x as isize;
            o[x] = A * (up[x] + down[x] + at(mid, xi - 1) + at(mid, xi + 1))
                + B * (at(up, xi - 1) + at(up, xi + 1) + at(down, xi - 1) + at(down, xi + 1));
        }
        if w > 2 {
            for x in 1..w - 1 {
                o[x] = A * (up[x] + down[x] + mid[x - 1] + mid[x + 1])
                    + B * (up[x - 1] + up[x + 1] + down[x - 1] + down[x + 1]);
            }
        }
    }
}

impl HornSchunck {
    fn refine(&self, i1: &Plane, i2: &Plane, u: &mut [f32], v: &mut [f32]) {
        let (w, h) = (i1.width, i1.height);
        let n = w * h;
        let alpha2 = self.alpha * self.alpha;
        let mut ix = vec![0.0f32; n];
        let mut iy = vec![0.0f32; n];
        let mut it = vec![0.0f32; n];
        let mut warped = vec![0.0f32; n];
        let mut du = vec![0.0f32; n];
        let mut dv = vec![0.0f32; n];
        let mut avg_u = vec![0.0f32; n];
        let mut avg_v = vec![0.0f32; n];
        let mut base_u = vec![0.0f32; n];
        let mut base_v = vec![0.0f32; n];
        let mut denom = vec![0.0f32; n];
        for _ in 0..self.warps {
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    warped[i] = i2.sample(x as f32 + u[i], y as f32 + v[i]);
                }
            }
            let wp = Plane::new(w, h, std::mem::take(&mut warped));
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let i = y as usize * w + x as usize;
                    let gx1 = 0.5 * (i1.get(x + 1, y) - i1.get(x - 1, y));
                    let gy1 = 0.5 * (i1.get(x, y + 1) - i1.get(x, y - 1));
                    let gx2 = 0.5 * (wp.get(x + 1, y) - wp.get(x - 1, y));
                    let gy2 = 0.5 * (wp.get(x, y + 1) - wp.get(x, y - 1));
                    ix[i] = 0.5 * (gx1 + gx2);
                    iy[i] = 0.5 * (gy1 + gy2);
                    it[i] = wp.data[i] - i1.data[i];
                    denom[i] = 1.0 / (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
                }
            }
            warped = wp.data;
            du.iter_mut().for_each(|d| *d = 0.0);
            dv.iter_mut().for_each(|d| *d = 0.0);
            // smoothness acts on the total flow; the part from u, v is fixed
            smooth(u, w, h, &mut base_u);
            smooth(v, w, h, &mut base_v);
            for i in 0..n {
                base_u[i] -= u[i];
                base_v[i] -= v[i];
            }
            for _ in 0..self.iterations {
                smooth(&du, w, h, &mut avg_u);
                smooth(&dv, w, h, &mut avg_v);
                for i in 0..n {
                    let au = avg_u[i] + base_u[i];
                    let av = avg_v[i] + base_v[i];
                    let t = (ix[i] * au + iy[i] * av + it[i]) * denom[i];
                    du[i] = au - ix[i] * t;
                    dv[i] = av - iy[i] * t;
                }
            }
            for i in 0..n {
                u[i] += du[i];
                v[i] += dv[i];
            }
        }
    }
}

impl FlowProvider for HornSchunck {
    fn name(&self) -> &'static str {
        "horn-schunck"
    }

    fn flow(&self, prev: &Plane, next: &Plane) -> Result<FlowField, FeatureError> {
        if (prev.width, prev.height) != (next.width, next.height) {
            return Err(FeatureError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                prev.width, prev.height, next.width, next.height
            )));
        }
        let (w, h) = (prev.width, prev.height);
        if w == 0 || h == 0 {
            return Ok(FlowField::zeros(w, h));
        }
        if prev.data == next.data {
            return Ok(FlowField::zeros(w, h));
        }
        let mut p1 = vec![prev.clone()];
        let mut p2 = vec![next.clone()];
        for _ in 1..self.levels.max(1) {
            let (a, b) = (p1.last().unwrap(), p2.last().unwrap());
            if a.width < 16 || a.height < 16 {
                break;
            }
            let (da, db) = (a.downsample(), b.downsample());
            p1.push(da);
            p2.push(db);
        }
        let top = p1.len() - 1;
        let (mut u, mut v) = (vec![0.0; p1[top].data.len()], vec![0.0; p1[top].data.len()]);
        for level in (0..=top).rev() {
            let (lw, lh) = (p1[level].width, p1[level].height);
            if level != top {
                let (cw, ch) = (p1[level + 1].width, p1[level + 1].height);
                u = upsample_flow(&u, cw, ch, lw, lh);
                v = upsample_flow(&v, cw, ch, lw, lh);
            }
            self.refine(&p1[level], &p2[level], &mut u, &mut v);
        }
        FlowField::from_components(w, h, u, v)
    }
}

/// Flow for every consecutive frame pair.
pub fn sequence_flows(
    seq: &crate::media::FrameSequence,
    provider: &dyn FlowProvider,
) -> Result<Vec<FlowField>, FeatureError> {
    use rayon::prelude::*;
    let planes: Vec<Plane> = seq.frames().par_iter().map(Plane::from_image).collect();
    (0..planes.len().saturating_sub(1)).into_par_iter().map(|t| provider.flow(&planes[t], &planes[t + 1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{shift_image, textured_background};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_frames_give_zero_flow() {
        let img = Plane::from_image(&textured_background(64, 48, 1));
        let f = HornSchunck::default().flow(&img, &img).unwrap();
        assert!(f.magnitudes().all(|m| m < 1e-3));
    }

    #[test]
    fn recovers_small_shift() {
        let bg = textured_background(160, 120, 2);
        let a = Plane::from_image(&bg);
        let b = Plane::from_image(&shift_image(&bg, 1, 0));
        let f = HornSchunck::default().flow(&a, &b).unwrap();
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
        for y in 16..104 {
            for x in 16..144 {
                let (u, v) = f.at(x, y);
                su += u as f64;
                sv += v as f64;
                n += 1.0;
            }
        }
        assert!((su / n - 1.0).abs() < 0.1 && (sv / n).abs() < 0.1, "{} {}", su / n, sv / n);
    }

    #[test]
    fn noise_frames_give_finite_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut noise = || Plane::new(40, 30, (0..1200).map(|_| rng.random_range(0.0..255.0)).collect());
        let (a, b) = (noise(), noise());
        assert!(HornSchunck::default().flow(&a, &b).unwrap().is_finite());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Plane::new(4, 4, vec![0.0; 16]);
        let b = Plane::new(4, 3, vec![0.0; 12]);
        assert!(matches!(HornSchunck::default().flow(&a, &b), Err(FeatureError::DimensionMismatch(_))));
    }

    #[test]
    fn mirror_negates_horizontal_component() {
        let mut f = FlowField::zeros(3, 1);
        f.set(0, 0, 1.0, 2.0);
        let m = f.mirrored();
        assert_eq!(m.at(2, 0), (-1.0, 2.0));
    }
}
